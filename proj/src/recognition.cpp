#include "veinqa/recognition.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "veinqa/errors.hpp"
#include "veinqa/imgproc.hpp"
#include "veinqa/parallel.hpp"

namespace veinqa {

// ---------------------------------------------------------------------------
// BinaryTemplate

BinaryTemplate::BinaryTemplate(int width, int height)
    : width_(width), height_(height),
      bits_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
  if (width <= 0 || height <= 0) fail(ErrorKind::Dimension, "template dimensions must be positive");
}

BinaryTemplate::BinaryTemplate(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  if (width <= 0 || height <= 0) fail(ErrorKind::Dimension, "template dimensions must be positive");
  if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    fail(ErrorKind::Dimension, "template bit count does not match dimensions");
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryTemplate::count() const noexcept {
  std::size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

std::string_view to_string(FeatureType f) noexcept {
  return f == FeatureType::MaximumCurvature ? "mc" : "gabor";
}

FeatureType parse_feature_type(std::string_view text) {
  if (text == "mc") return FeatureType::MaximumCurvature;
  if (text == "gabor" || text == "gf") return FeatureType::Gabor;
  fail(ErrorKind::Usage, "unknown feature type '" + std::string(text) + "'");
}

namespace {

void require_min_side(const GrayImage& img, int side, std::string_view what) {
  if (img.width() < side || img.height() < side) {
    fail(ErrorKind::Dimension, std::string(what) + " needs at least " + std::to_string(side) + "x" +
                                   std::to_string(side) + " px");
  }
}

// Curvature values at or below this are treated as flat.
constexpr double kCurvatureFloor = 1e-9;

struct Direction {
  int dx;
  int dy;
};

constexpr Direction kDirections[4] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};

// Visits every maximal straight line of the image along direction d.
template <typename Fn>
void for_each_line(int w, int h, Direction d, Fn&& visit) {
  std::vector<std::pair<int, int>> starts;
  if (d.dx == 1 && d.dy == 0) {
    for (int y = 0; y < h; ++y) starts.emplace_back(0, y);
  } else if (d.dx == 0) {
    for (int x = 0; x < w; ++x) starts.emplace_back(x, 0);
  } else if (d.dy == 1) {
    for (int x = 0; x < w; ++x) starts.emplace_back(x, 0);
    for (int y = 1; y < h; ++y) starts.emplace_back(0, y);
  } else {
    for (int x = 0; x < w; ++x) starts.emplace_back(x, h - 1);
    for (int y = 0; y < h - 1; ++y) starts.emplace_back(0, y);
  }
  std::vector<std::pair<int, int>> line;
  for (auto [x, y] : starts) {
    line.clear();
    while (x >= 0 && x < w && y >= 0 && y < h) {
      line.emplace_back(x, y);
      x += d.dx;
      y += d.dy;
    }
    visit(line);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Maximum Curvature

Plane max_curvature_scores(const GrayImage& img, double sigma) {
  require_min_side(img, 32, "Maximum Curvature");
  if (!(sigma > 0.0)) fail(ErrorKind::Input, "Maximum Curvature sigma must be positive");
  const int w = img.width();
  const int h = img.height();
  const int radius = static_cast<int>(std::ceil(4.0 * sigma));

  // Correlation kernels for the first and second Gaussian derivatives.
  const auto g = imgproc::gaussian_kernel(sigma, radius);
  std::vector<double> d1(g.size());
  std::vector<double> d2(g.size());
  const double s2 = sigma * sigma;
  for (int u = -radius; u <= radius; ++u) {
    const auto i = static_cast<std::size_t>(u + radius);
    d1[i] = (u / s2) * g[i];
    d2[i] = ((u * u - s2) / (s2 * s2)) * g[i];
  }
  const Plane& src = img.plane();
  const Plane fx = imgproc::convolve_separable(src, d1, g);
  const Plane fy = imgproc::convolve_separable(src, g, d1);
  const Plane fxx = imgproc::convolve_separable(src, d2, g);
  const Plane fyy = imgproc::convolve_separable(src, g, d2);
  const Plane fxy = imgproc::convolve_separable(src, d1, d1);

  Plane v(w, h);
  for (int d = 0; d < 4; ++d) {
    Plane kappa(w, h);
    for (std::size_t i = 0; i < kappa.size(); ++i) {
      double f1 = 0.0;
      double f2 = 0.0;
      switch (d) {
        case 0: f1 = fx.data[i]; f2 = fxx.data[i]; break;
        case 1: f1 = fy.data[i]; f2 = fyy.data[i]; break;
        case 2:
          f1 = (fx.data[i] + fy.data[i]) / std::numbers::sqrt2;
          f2 = 0.5 * (fxx.data[i] + 2.0 * fxy.data[i] + fyy.data[i]);
          break;
        default:
          f1 = (fx.data[i] - fy.data[i]) / std::numbers::sqrt2;
          f2 = 0.5 * (fxx.data[i] - 2.0 * fxy.data[i] + fyy.data[i]);
      }
      kappa.data[i] = f2 / std::pow(1.0 + f1 * f1, 1.5);
    }
    // Each concave run along a profile scores its peak curvature times its
    // width, credited to the peak position.
    for_each_line(w, h, kDirections[d], [&](const std::vector<std::pair<int, int>>& line) {
      std::size_t i = 0;
      while (i < line.size()) {
        if (kappa(line[i].first, line[i].second) <= kCurvatureFloor) {
          ++i;
          continue;
        }
        std::size_t peak = i;
        std::size_t j = i;
        while (j < line.size() && kappa(line[j].first, line[j].second) > kCurvatureFloor) {
          if (kappa(line[j].first, line[j].second) > kappa(line[peak].first, line[peak].second)) {
            peak = j;
          }
          ++j;
        }
        const auto [px, py] = line[peak];
        v(px, py) += kappa(px, py) * static_cast<double>(j - i);
        i = j;
      }
    });
  }

  auto at = [&](int x, int y) { return (x >= 0 && x < w && y >= 0 && y < h) ? v(x, y) : 0.0; };
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double best = 0.0;
      for (const Direction& d : kDirections) {
        const double fwd = std::max(at(x + d.dx, y + d.dy), at(x + 2 * d.dx, y + 2 * d.dy));
        const double bwd = std::max(at(x - d.dx, y - d.dy), at(x - 2 * d.dx, y - 2 * d.dy));
        best = std::max(best, v(x, y) + std::min(fwd, bwd));
      }
      out(x, y) = best;
    }
  }
  return out;
}

BinaryTemplate extract_mc(const GrayImage& img, double sigma) {
  const Plane g = max_curvature_scores(img, sigma);
  std::vector<double> positive;
  for (double s : g.data) {
    if (s > 0.0) positive.push_back(s);
  }
  BinaryTemplate t(img.width(), img.height());
  if (positive.empty()) return t;
  const auto mid = positive.begin() + static_cast<std::ptrdiff_t>(positive.size() / 2);
  std::nth_element(positive.begin(), mid, positive.end());
  double median = *mid;
  if (positive.size() % 2 == 0) {
    const double lower = *std::max_element(positive.begin(), mid);
    median = 0.5 * (median + lower);
  }
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      if (g(x, y) > 0.0 && g(x, y) >= median) t.set(x, y, true);
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Gabor

std::vector<Plane> gabor_bank(const GaborConfig& cfg) {
  if (!(cfg.wavelength > 0.0 && cfg.sigma > 0.0 && cfg.aspect > 0.0) || cfg.orientations < 1) {
    fail(ErrorKind::Input, "invalid Gabor configuration");
  }
  const int radius = static_cast<int>(std::ceil(3.0 * cfg.sigma / std::min(1.0, cfg.aspect)));
  const int size = 2 * radius + 1;
  std::vector<Plane> bank;
  for (int k = 0; k < cfg.orientations; ++k) {
    const double theta = k * std::numbers::pi / cfg.orientations;
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    Plane kernel(size, size);
    double sum = 0.0;
    for (int y = -radius; y <= radius; ++y) {
      for (int x = -radius; x <= radius; ++x) {
        const double along = x * c + y * s;
        const double across = -x * s + y * c;
        const double env = std::exp(-(across * across + cfg.aspect * cfg.aspect * along * along) /
                                    (2.0 * cfg.sigma * cfg.sigma));
        const double value = env * std::cos(2.0 * std::numbers::pi * across / cfg.wavelength);
        kernel(x + radius, y + radius) = value;
        sum += value;
      }
    }
    const double dc = sum / static_cast<double>(kernel.size());
    double l1 = 0.0;
    for (double& v : kernel.data) {
      v -= dc;
      l1 += std::abs(v);
    }
    for (double& v : kernel.data) v /= l1;
    bank.push_back(std::move(kernel));
  }
  return bank;
}

Plane gabor_line_response(const GrayImage& img, const Plane& kernel) {
  Plane r = imgproc::correlate2d(img.plane(), kernel);
  for (double& v : r.data) v = -v;
  return r;
}

namespace {

void remove_small_components(BinaryTemplate& t, int min_size) {
  const int w = t.width();
  const int h = t.height();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::pair<int, int>> comp;
  std::vector<std::pair<int, int>> stack;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      const auto i0 = static_cast<std::size_t>(y0) * w + x0;
      if (!t(x0, y0) || seen[i0]) continue;
      comp.clear();
      stack.assign(1, {x0, y0});
      seen[i0] = 1;
      while (!stack.empty()) {
        const auto [x, y] = stack.back();
        stack.pop_back();
        comp.emplace_back(x, y);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const auto ni = static_cast<std::size_t>(ny) * w + nx;
            if (t(nx, ny) && !seen[ni]) {
              seen[ni] = 1;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
      if (static_cast<int>(comp.size()) < min_size) {
        for (auto [x, y] : comp) t.set(x, y, false);
      }
    }
  }
}

}  // namespace

BinaryTemplate extract_gabor(const GrayImage& img, const GaborConfig& cfg) {
  require_min_side(img, 32, "Gabor features");
  const auto bank = gabor_bank(cfg);
  Plane best(img.width(), img.height(), -std::numeric_limits<double>::infinity());
  for (const Plane& k : bank) {
    const Plane r = gabor_line_response(img, k);
    for (std::size_t i = 0; i < r.size(); ++i) best.data[i] = std::max(best.data[i], r.data[i]);
  }
  const double mean = imgproc::mean(best.data);
  const double sd = std::sqrt(imgproc::variance(best.data));
  const double threshold = std::max(mean + cfg.threshold_k * sd, 1e-9);
  BinaryTemplate t(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (best(x, y) > threshold) t.set(x, y, true);
    }
  }
  remove_small_components(t, cfg.min_component);
  return t;
}

BinaryTemplate extract_features(const GrayImage& img, const FeatureConfig& cfg) {
  return cfg.type == FeatureType::MaximumCurvature ? extract_mc(img, cfg.mc.sigma)
                                                   : extract_gabor(img, cfg.gabor);
}

// ---------------------------------------------------------------------------
// Miura matcher

namespace {

struct PackedTemplate {
  int width = 0;
  int height = 0;
  int words = 0;
  std::vector<std::uint64_t> rows;
  std::vector<std::int32_t> sat;  // (width+1) x (height+1) summed-area table

  explicit PackedTemplate(const BinaryTemplate& t)
      : width(t.width()), height(t.height()), words((t.width() + 63) / 64) {
    rows.assign(static_cast<std::size_t>(words) * height, 0);
    sat.assign(static_cast<std::size_t>(width + 1) * (height + 1), 0);
    for (int y = 0; y < height; ++y) {
      std::int32_t run = 0;
      for (int x = 0; x < width; ++x) {
        const bool b = t(x, y);
        if (b) rows[static_cast<std::size_t>(y) * words + x / 64] |= std::uint64_t{1} << (x % 64);
        run += b ? 1 : 0;
        sat[static_cast<std::size_t>(y + 1) * (width + 1) + x + 1] =
            sat[static_cast<std::size_t>(y) * (width + 1) + x + 1] + run;
      }
    }
  }

  // True pixels in [x0,x1) x [y0,y1).
  std::int64_t count(int x0, int y0, int x1, int y1) const {
    auto s = [&](int x, int y) { return sat[static_cast<std::size_t>(y) * (width + 1) + x]; };
    return static_cast<std::int64_t>(s(x1, y1)) - s(x0, y1) - s(x1, y0) + s(x0, y0);
  }

  // Bits [start, start+64) of row y, zero outside the row.
  std::uint64_t read64(int y, long start) const {
    const std::uint64_t* r = &rows[static_cast<std::size_t>(y) * words];
    const long q = start >= 0 ? start / 64 : -((-start + 63) / 64);
    const int off = static_cast<int>(start - q * 64);
    const std::uint64_t lo = (q >= 0 && q < words) ? r[q] : 0;
    const std::uint64_t hi = (q + 1 >= 0 && q + 1 < words) ? r[q + 1] : 0;
    return off == 0 ? lo : (lo >> off) | (hi << (64 - off));
  }
};

}  // namespace

double miura_match(const BinaryTemplate& probe, const BinaryTemplate& gallery, int max_shift_x,
                   int max_shift_y) {
  if (max_shift_x < 0 || max_shift_y < 0) fail(ErrorKind::Input, "shift budgets must be >= 0");
  if (probe.width() == 0 || gallery.width() == 0) fail(ErrorKind::Input, "empty template");
  if (probe.count() == 0 && gallery.count() == 0) {
    fail(ErrorKind::UndefinedScore, "both templates contain no vessel pixels");
  }
  const PackedTemplate p(probe);
  const PackedTemplate g(gallery);
  double best = 0.0;
  std::vector<std::uint64_t> shifted(static_cast<std::size_t>(p.words) * g.height);
  for (int dx = -max_shift_x; dx <= max_shift_x; ++dx) {
    const int x0 = std::max(0, -dx);
    const int x1 = std::min(p.width, g.width - dx);
    if (x1 <= x0) continue;
    // Gallery rows re-aligned so bit x holds gallery(x + dx, y).
    for (int y = 0; y < g.height; ++y) {
      for (int k = 0; k < p.words; ++k) {
        shifted[static_cast<std::size_t>(y) * p.words + k] = g.read64(y, 64L * k + dx);
      }
    }
    for (int dy = -max_shift_y; dy <= max_shift_y; ++dy) {
      const int y0 = std::max(0, -dy);
      const int y1 = std::min(p.height, g.height - dy);
      if (y1 <= y0) continue;
      std::int64_t matched = 0;
      for (int y = y0; y < y1; ++y) {
        const std::uint64_t* pr = &p.rows[static_cast<std::size_t>(y) * p.words];
        const std::uint64_t* gr = &shifted[static_cast<std::size_t>(y + dy) * p.words];
        for (int k = 0; k < p.words; ++k) matched += std::popcount(pr[k] & gr[k]);
      }
      const std::int64_t denom = p.count(x0, y0, x1, y1) + g.count(x0 + dx, y0 + dy, x1 + dx, y1 + dy);
      if (denom > 0) {
        best = std::max(best, static_cast<double>(matched) / static_cast<double>(denom));
      }
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Comparison protocol

std::vector<ComparisonPair> plan_comparisons(std::span<const SampleRecord> records) {
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::string> keys(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) keys[i] = records[i].key();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });

  std::map<std::string, std::vector<std::size_t>> instances;
  for (std::size_t i : order) instances[records[i].instance_key()].push_back(i);

  std::vector<ComparisonPair> plan;
  std::vector<std::size_t> firsts;
  for (const auto& [inst, members] : instances) {
    firsts.push_back(members.front());
    for (std::size_t i = 0; i < members.size(); ++i) {
      for (std::size_t j = i + 1; j < members.size(); ++j) plan.push_back({members[i], members[j], true});
    }
  }
  for (std::size_t i = 0; i < firsts.size(); ++i) {
    for (std::size_t j = i + 1; j < firsts.size(); ++j) plan.push_back({firsts[i], firsts[j], false});
  }
  return plan;
}

ComparisonEngine::ComparisonEngine(std::vector<TemplateEntry> entries, VerifyConfig cfg)
    : entries_(std::move(entries)), cfg_(cfg) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (!index_.emplace(entries_[i].record.key(), i).second) {
      fail(ErrorKind::Validation, "duplicate record in comparison set: " + entries_[i].record.image_path);
    }
  }
}

ScoreSet ComparisonEngine::build(std::span<const SampleRecord> records) {
  std::vector<std::size_t> ids;
  std::vector<SampleRecord> usable;
  skipped_last_ = 0;
  for (const auto& r : records) {
    const auto it = index_.find(r.key());
    if (it == index_.end() || !entries_[it->second].tmpl) {
      ++skipped_last_;
      continue;
    }
    ids.push_back(it->second);
    usable.push_back(r);
  }
  std::set<std::string> subjects;
  for (const auto& r : usable) subjects.insert(r.subject_key());
  if (subjects.size() < 2) fail(ErrorKind::Input, "verification needs at least 2 subjects");

  const auto plan = plan_comparisons(usable);
  std::vector<std::pair<std::size_t, std::size_t>> todo;
  for (const auto& c : plan) {
    const auto key = std::minmax(ids[c.a], ids[c.b]);
    if (!cache_.count(key)) todo.push_back(key);
  }
  std::sort(todo.begin(), todo.end());
  todo.erase(std::unique(todo.begin(), todo.end()), todo.end());
  const auto scores = parallel_map(todo.size(), cfg_.jobs, [&](std::size_t i) {
    return miura_match(*entries_[todo[i].first].tmpl, *entries_[todo[i].second].tmpl,
                       cfg_.max_shift_x, cfg_.max_shift_y);
  });
  for (std::size_t i = 0; i < todo.size(); ++i) cache_[todo[i]] = scores[i];

  ScoreSet out;
  for (const auto& c : plan) {
    std::string ka = usable[c.a].key();
    std::string kb = usable[c.b].key();
    if (kb < ka) std::swap(ka, kb);
    const double s = cache_.at(std::minmax(ids[c.a], ids[c.b]));
    (c.genuine ? out.genuine : out.impostor).push_back({std::move(ka), std::move(kb), s});
  }
  out.canonicalize();
  return out;
}

ScoreSet verify_all(std::span<const TemplateEntry> templates, const VerifyConfig& cfg,
                    VerifySummary* summary) {
  ComparisonEngine engine({templates.begin(), templates.end()}, cfg);
  std::vector<SampleRecord> records;
  records.reserve(templates.size());
  for (const auto& t : templates) records.push_back(t.record);
  ScoreSet s = engine.build(records);
  if (summary) summary->skipped_records = engine.skipped_last();
  return s;
}

// ---------------------------------------------------------------------------
// Template cache

namespace {
constexpr char kTemplateMagic[8] = {'V', 'Q', 'T', 'M', 'P', 'L', '0', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}
}  // namespace

std::string encode_template(const BinaryTemplate& t) {
  std::string out(kTemplateMagic, sizeof kTemplateMagic);
  put_u32(out, static_cast<std::uint32_t>(t.width()));
  put_u32(out, static_cast<std::uint32_t>(t.height()));
  const auto& bits = t.bits();
  std::string packed((bits.size() + 7) / 8, '\0');
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) packed[i / 8] = static_cast<char>(packed[i / 8] | (1 << (i % 8)));
  }
  return out + packed;
}

BinaryTemplate decode_template(std::string_view bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kTemplateMagic, 8) != 0) {
    fail(ErrorKind::Parse, "not a template cache file");
  }
  const auto w = get_u32(bytes, 8);
  const auto h = get_u32(bytes, 12);
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) {
    fail(ErrorKind::Parse, "template cache header has invalid dimensions");
  }
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() != 16 + (n + 7) / 8) fail(ErrorKind::Parse, "template cache file is truncated");
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) {
    bits[i] = (static_cast<unsigned char>(bytes[16 + i / 8]) >> (i % 8)) & 1u;
  }
  return BinaryTemplate(static_cast<int>(w), static_cast<int>(h), std::move(bits));
}

void write_template(const std::filesystem::path& path, const BinaryTemplate& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write template " + path.string());
  out << encode_template(t);
  if (!out) fail(ErrorKind::Io, "failed writing template " + path.string());
}

BinaryTemplate read_template(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open template " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_template(buf.str());
}

}  // namespace veinqa
