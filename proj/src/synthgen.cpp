#include "veinqa/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

#include "veinqa/errors.hpp"
#include "veinqa/imgproc.hpp"
#include "veinqa/parallel.hpp"
#include "veinqa/png_io.hpp"
#include "veinqa/preprocess.hpp"
#include "veinqa/random.hpp"

namespace veinqa {

namespace {

constexpr double kTissueLevel = 0.62;
constexpr double kOutsideLevel = 0.3;
constexpr double kStep = 3.0;

void check(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::Validation, what);
}

struct Point {
  double x;
  double y;
};

struct Vessel {
  std::vector<Point> path;
  double width;
  double depth;
};

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Random walk from (x, y) heading `angle` until it leaves the image or the
// length budget runs out. The walk is kept inside the finger rows.
std::vector<Point> walk(Rng& rng, Point start, double angle, double max_len, int w, double top,
                        double bottom, bool stop_at_edge) {
  std::vector<Point> path{start};
  Point p = start;
  const double centre = 0.5 * (top + bottom);
  double travelled = 0.0;
  while (travelled < max_len) {
    angle += 0.12 * rng.normal();
    angle = std::clamp(angle, -0.8, 0.8);
    Point q{p.x + kStep * std::cos(angle), p.y + kStep * std::sin(angle)};
    if (q.y < top + 3.0 || q.y > bottom - 3.0) {
      if (stop_at_edge) break;
      angle = 0.5 * std::atan2(centre - p.y, 20.0);
      q = {p.x + kStep * std::cos(angle), p.y + kStep * std::sin(angle)};
    }
    p = q;
    path.push_back(p);
    travelled += kStep;
    if (p.x > w + 2.0) break;
  }
  return path;
}

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx);
  const double dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

// Exact distance from every pixel centre near the polyline; far pixels stay
// at infinity.
Plane distance_map(const std::vector<Point>& path, int w, int h, double reach) {
  Plane d(w, h, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    const Point a = path[i];
    const Point b = path[i + 1];
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - reach)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - reach)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        d(x, y) = std::min(d(x, y), segment_distance({double(x), double(y)}, a, b));
      }
    }
  }
  return d;
}

}  // namespace

void SynthParams::validate() const {
  check(width >= 16 && height >= 16, "synthetic images must be at least 16x16");
  check(n_vessels >= 0, "n_vessels must be >= 0");
  check(vessel_width.valid() && vessel_width.lo > 0.0, "vessel_width must be a positive range");
  check(blur_sigma >= 0.0 && std::isfinite(blur_sigma), "blur_sigma must be >= 0");
  check(contrast > 0.0 && contrast <= 1.0, "contrast must lie in (0,1]");
  check(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise_sigma must be >= 0");
  check(illum_gradient >= 0.0 && std::isfinite(illum_gradient), "illum_gradient must be >= 0");
  check(jitter_px >= 0.0 && std::isfinite(jitter_px), "jitter_px must be >= 0");
}

SynthSample generate(const SynthParams& params) {
  params.validate();
  const int w = params.width;
  const int h = params.height;
  const std::uint64_t anatomy = params.structure_seed.value_or(params.seed);

  // Anatomy: finger rows, tissue background and the vessel tree.
  Rng shape(derive_seed({anatomy, 1}));
  double top = 0.0;
  double bottom = h - 1.0;
  if (params.finger_band) {
    top = std::round(h * shape.uniform(0.10, 0.18));
    bottom = std::round(h * shape.uniform(0.82, 0.90)) - 1.0;
  }
  struct Bump {
    double cx, cy, sigma, amp;
  };
  std::vector<Bump> bumps;
  for (int i = 0; i < 5; ++i) {
    bumps.push_back({shape.uniform(0.0, w), shape.uniform(0.0, h),
                     shape.uniform(0.15, 0.35) * std::max(w, h), shape.uniform(-0.08, 0.08)});
  }
  std::vector<Vessel> vessels;
  for (int v = 0; v < params.n_vessels; ++v) {
    Vessel main;
    main.width = shape.uniform(params.vessel_width.lo, params.vessel_width.hi);
    main.depth = shape.uniform(0.35, 0.55);
    const Point start{-2.0, shape.uniform(top + 4.0, bottom - 4.0)};
    main.path = walk(shape, start, shape.uniform(-0.35, 0.35), 4.0 * w, w, top, bottom, false);
    const bool branch = shape.uniform() < 0.6;
    const double side = shape.uniform() < 0.5 ? -1.0 : 1.0;
    const double offset = shape.uniform(0.4, 0.8);
    const double length = shape.uniform(0.3, 0.6) * w;
    const double pick = shape.uniform(0.2, 0.6);
    vessels.push_back(main);
    if (branch && main.path.size() > 5) {
      const auto at = static_cast<std::size_t>(pick * static_cast<double>(main.path.size()));
      const Point a = main.path[at];
      const Point b = main.path[at + 1];
      Vessel child;
      child.width = 0.7 * main.width;
      child.depth = 0.8 * main.depth;
      const double heading = std::atan2(b.y - a.y, b.x - a.x) + side * offset;
      child.path = walk(shape, a, heading, length, w, top, bottom, true);
      if (child.path.size() > 1) vessels.push_back(std::move(child));
    }
  }

  // Sample-specific rigid jitter plus a slight per-vertex wobble.
  Rng jitter(derive_seed({params.seed, 2}));
  const double j = params.jitter_px;
  const double tx = j > 0.0 ? jitter.uniform(-j, j) : 0.0;
  const double ty = j > 0.0 ? jitter.uniform(-j, j) : 0.0;
  for (auto& v : vessels) {
    for (auto& p : v.path) {
      p.x += tx + (j > 0.0 ? 0.15 * j * jitter.normal() : 0.0);
      p.y += ty + (j > 0.0 ? 0.15 * j * jitter.normal() : 0.0);
    }
  }

  Plane img(w, h);
  for (int y = 0; y < h; ++y) {
    const double inside = params.finger_band
                              ? sigmoid((y - top) / 1.0) * sigmoid((bottom - y) / 1.0)
                              : 1.0;
    for (int x = 0; x < w; ++x) {
      double tissue = kTissueLevel;
      for (const auto& b : bumps) {
        const double dx = x - b.cx;
        const double dy = y - b.cy;
        tissue += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      img(x, y) = kOutsideLevel + inside * (tissue - kOutsideLevel);
    }
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
  for (const auto& v : vessels) {
    const double sigma = v.width / 2.5;
    const Plane d = distance_map(v.path, w, h, 3.0 * sigma + 1.0);
    for (int y = 0; y < h; ++y) {
      const bool in_band = y >= top && y <= bottom;
      for (int x = 0; x < w; ++x) {
        const double dist = d(x, y);
        if (!std::isfinite(dist) || !in_band) continue;
        img(x, y) *= 1.0 - v.depth * std::exp(-dist * dist / (2.0 * sigma * sigma));
        if (dist <= 0.5 * v.width) mask[static_cast<std::size_t>(y) * w + x] = 1;
      }
    }
  }

  SynthSample out;
  out.params = params;
  out.vessel_mask = std::move(mask);
  if (params.finger_band) out.band_rows = {static_cast<int>(top), static_cast<int>(bottom)};
  out.pristine = GrayImage::from_plane_clamped(img);

  // Degradation chain; neutral parameters leave the render untouched.
  Plane deg = out.pristine.plane();
  if (params.contrast != 1.0) {
    const double m = imgproc::mean(deg.data);
    for (double& v : deg.data) v = m + params.contrast * (v - m);
  }
  if (params.blur_sigma > 0.0) deg = imgproc::gaussian_blur(deg, params.blur_sigma);
  if (params.noise_sigma > 0.0) {
    Rng noise(derive_seed({params.seed, 3}));
    for (double& v : deg.data) v += params.noise_sigma * noise.normal();
  }
  if (params.illum_gradient > 0.0) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double t = w > 1 ? static_cast<double>(x) / (w - 1) : 0.5;
        deg(x, y) *= 1.0 + params.illum_gradient * (t - 0.5);
      }
    }
  }
  out.image = GrayImage::from_plane_clamped(std::move(deg));
  return out;
}

// ---------------------------------------------------------------------------
// Corpus

std::array<DegradationBand, 3> CorpusSpec::default_bands() {
  std::array<DegradationBand, 3> b;
  auto& poor = b[static_cast<int>(QualityClass::Poor)];
  auto& middle = b[static_cast<int>(QualityClass::Middle)];
  auto& good = b[static_cast<int>(QualityClass::Good)];
  good = {{0.0, 0.5}, {0.8, 1.0}, {0.0, 0.005}, {0.0, 0.1}};
  middle = {{0.5, 1.5}, {0.6, 0.9}, {0.0, 0.02}, {0.0, 0.2}};
  poor = {{1.5, 3.0}, {0.3, 0.6}, {0.02, 0.05}, {0.1, 0.4}};
  return b;
}

namespace {

std::array<std::size_t, 3> class_counts(const CorpusSpec& spec, std::size_t total) {
  double sum = 0.0;
  for (double f : spec.class_fractions) sum += f;
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rest{};
  std::size_t used = 0;
  for (int c = 0; c < 3; ++c) {
    const double exact = spec.class_fractions[c] / sum * static_cast<double>(total);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    rest[c] = exact - static_cast<double>(counts[c]);
    used += counts[c];
  }
  // Largest remainder; ties go to the better class.
  while (used < total) {
    int best = 2;
    for (int c = 2; c >= 0; --c) {
      if (rest[c] > rest[best]) best = c;
    }
    ++counts[best];
    rest[best] = -1.0;
    ++used;
  }
  return counts;
}

}  // namespace

void CorpusSpec::validate() const {
  check(!datasets.empty(), "corpus needs at least one dataset");
  std::set<std::string> seen;
  for (const auto& d : datasets) {
    check(!d.empty() && d != "." && d != ".." && d.find_first_of("/\\,\"\n") == std::string::npos,
          "invalid dataset id '" + d + "'");
    check(seen.insert(d).second, "duplicate dataset id '" + d + "'");
  }
  check(n_subjects >= 1 && n_fingers >= 1 && n_samples >= 1, "corpus counts must be >= 1");
  check(width >= 32 && height >= 32, "corpus images must be at least 32x32");
  check(n_vessels.valid() && n_vessels.lo >= 0.0, "n_vessels must be a range >= 0");
  check(vessel_width.valid() && vessel_width.lo > 0.0, "vessel_width must be a positive range");
  check(jitter_px >= 0.0, "jitter_px must be >= 0");
  double sum = 0.0;
  for (double f : class_fractions) {
    check(f >= 0.0 && std::isfinite(f), "class fractions must be >= 0");
    sum += f;
  }
  check(sum > 0.0, "class fractions must not all be zero");
  const auto counts = class_counts(*this, static_cast<std::size_t>(n_subjects) * n_fingers * n_samples);
  for (int c = 0; c < 3; ++c) {
    const auto& b = bands[c];
    const std::string name(to_string(static_cast<QualityClass>(c)));
    check(counts[c] > 0, "class " + name + " would receive no samples");
    check(b.blur.valid() && b.blur.lo >= 0.0, "blur band of class " + name + " is invalid");
    check(b.contrast.valid() && b.contrast.lo > 0.0 && b.contrast.hi <= 1.0,
          "contrast band of class " + name + " must lie in (0,1]");
    check(b.noise.valid() && b.noise.lo >= 0.0, "noise band of class " + name + " is invalid");
    check(b.illum.valid() && b.illum.lo >= 0.0, "illum band of class " + name + " is invalid");
  }
}

namespace {

using Json = nlohmann::ordered_json;

Range range_from(const Json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    fail(ErrorKind::Validation, "'" + key + "' must be a [lo, hi] pair");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

Json range_to(const Range& r) { return Json::array({r.lo, r.hi}); }

QualityClass class_key(const std::string& key) {
  try {
    return parse_quality_class(key);
  } catch (const Error&) {
    fail(ErrorKind::Validation, "unknown quality class '" + key + "' in corpus spec");
  }
}

template <typename T>
T number(const Json& j, const std::string& key) {
  if (!j.is_number()) fail(ErrorKind::Validation, "'" + key + "' must be a number");
  if constexpr (std::is_integral_v<T>) {
    if (!j.is_number_integer()) fail(ErrorKind::Validation, "'" + key + "' must be an integer");
  }
  return j.get<T>();
}

}  // namespace

CorpusSpec parse_corpus_spec(std::string_view json_text) {
  Json doc;
  try {
    doc = Json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("corpus spec is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail(ErrorKind::Parse, "corpus spec must be a JSON object");
  CorpusSpec s;
  for (const auto& [key, v] : doc.items()) {
    if (key == "seed") {
      s.seed = number<std::uint64_t>(v, key);
    } else if (key == "datasets") {
      if (!v.is_array()) fail(ErrorKind::Validation, "'datasets' must be a list of names");
      s.datasets.clear();
      for (const auto& d : v) {
        if (!d.is_string()) fail(ErrorKind::Validation, "'datasets' must be a list of names");
        s.datasets.push_back(d.get<std::string>());
      }
    } else if (key == "n_subjects") {
      s.n_subjects = number<int>(v, key);
    } else if (key == "n_fingers") {
      s.n_fingers = number<int>(v, key);
    } else if (key == "n_samples") {
      s.n_samples = number<int>(v, key);
    } else if (key == "width") {
      s.width = number<int>(v, key);
    } else if (key == "height") {
      s.height = number<int>(v, key);
    } else if (key == "n_vessels") {
      s.n_vessels = range_from(v, key);
    } else if (key == "vessel_width") {
      s.vessel_width = range_from(v, key);
    } else if (key == "finger_band") {
      if (!v.is_boolean()) fail(ErrorKind::Validation, "'finger_band' must be a boolean");
      s.finger_band = v.get<bool>();
    } else if (key == "jitter_px") {
      s.jitter_px = number<double>(v, key);
    } else if (key == "trait_group") {
      if (!v.is_string()) fail(ErrorKind::Validation, "'trait_group' must be a string");
      s.trait_group = parse_trait_group(v.get<std::string>());
    } else if (key == "write_labels") {
      if (!v.is_boolean()) fail(ErrorKind::Validation, "'write_labels' must be a boolean");
      s.write_labels = v.get<bool>();
    } else if (key == "class_fractions") {
      if (!v.is_object()) fail(ErrorKind::Validation, "'class_fractions' must be an object");
      for (const auto& [cls, f] : v.items()) {
        s.class_fractions[static_cast<int>(class_key(cls))] = number<double>(f, cls);
      }
    } else if (key == "bands") {
      if (!v.is_object()) fail(ErrorKind::Validation, "'bands' must be an object");
      for (const auto& [cls, band] : v.items()) {
        auto& b = s.bands[static_cast<int>(class_key(cls))];
        if (!band.is_object()) fail(ErrorKind::Validation, "band '" + cls + "' must be an object");
        for (const auto& [field, r] : band.items()) {
          if (field == "blur") {
            b.blur = range_from(r, field);
          } else if (field == "contrast") {
            b.contrast = range_from(r, field);
          } else if (field == "noise") {
            b.noise = range_from(r, field);
          } else if (field == "illum") {
            b.illum = range_from(r, field);
          } else {
            fail(ErrorKind::Validation, "unknown band field '" + field + "'");
          }
        }
      }
    } else {
      fail(ErrorKind::Validation, "unknown corpus spec key '" + key + "'");
    }
  }
  s.validate();
  return s;
}

CorpusSpec load_corpus_spec(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open corpus spec " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus_spec(buf.str());
}

std::string format_corpus_spec(const CorpusSpec& s) {
  Json doc = Json::object();
  doc["seed"] = s.seed;
  doc["datasets"] = s.datasets;
  doc["n_subjects"] = s.n_subjects;
  doc["n_fingers"] = s.n_fingers;
  doc["n_samples"] = s.n_samples;
  doc["width"] = s.width;
  doc["height"] = s.height;
  doc["n_vessels"] = range_to(s.n_vessels);
  doc["vessel_width"] = range_to(s.vessel_width);
  doc["finger_band"] = s.finger_band;
  doc["jitter_px"] = s.jitter_px;
  doc["trait_group"] = std::string(to_string(s.trait_group));
  doc["write_labels"] = s.write_labels;
  Json fractions = Json::object();
  Json bands = Json::object();
  for (int c = 0; c < 3; ++c) {
    const std::string name(to_string(static_cast<QualityClass>(c)));
    fractions[name] = s.class_fractions[c];
    const auto& b = s.bands[c];
    bands[name] = {{"blur", range_to(b.blur)},
                   {"contrast", range_to(b.contrast)},
                   {"noise", range_to(b.noise)},
                   {"illum", range_to(b.illum)}};
  }
  doc["class_fractions"] = fractions;
  doc["bands"] = bands;
  return doc.dump(2) + "\n";
}

std::vector<CorpusEntry> plan_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::vector<CorpusEntry> plan;
  const std::size_t per_dataset =
      static_cast<std::size_t>(spec.n_subjects) * spec.n_fingers * spec.n_samples;
  for (std::size_t di = 0; di < spec.datasets.size(); ++di) {
    const std::string& ds = spec.datasets[di];
    const auto counts = class_counts(spec, per_dataset);
    std::vector<QualityClass> labels;
    for (int c = 2; c >= 0; --c) labels.insert(labels.end(), counts[c], static_cast<QualityClass>(c));
    Rng assign(derive_seed({spec.seed, di, 13}));
    assign.shuffle(std::span<QualityClass>(labels));

    std::size_t j = 0;
    for (int s = 0; s < spec.n_subjects; ++s) {
      char subject[64];
      std::snprintf(subject, sizeof subject, "s%03d", s + 1);
      for (int f = 0; f < spec.n_fingers; ++f) {
        const std::uint64_t anatomy = derive_seed({spec.seed, di, std::uint64_t(s), std::uint64_t(f), 11});
        Rng finger_rng(derive_seed({anatomy, 5}));
        const int lo = static_cast<int>(std::ceil(spec.n_vessels.lo));
        const int hi = std::max(lo, static_cast<int>(std::floor(spec.n_vessels.hi)));
        const int n_vessels = lo + static_cast<int>(finger_rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
        for (int k = 0; k < spec.n_samples; ++k, ++j) {
          CorpusEntry e;
          e.record.dataset_id = ds;
          e.record.subject_id = ds + "_" + subject;
          e.record.finger_or_hand_id = "f" + std::to_string(f + 1);
          e.record.session = k + 1;
          e.record.image_path = ds + "/" + e.record.subject_id + "_" + e.record.finger_or_hand_id +
                                "_" + std::to_string(k + 1) + ".png";
          const QualityClass cls = labels[j];
          if (spec.write_labels) e.record.quality_class = cls;

          SynthParams& p = e.params;
          p.seed = derive_seed({spec.seed, di, std::uint64_t(s), std::uint64_t(f), std::uint64_t(k), 12});
          p.structure_seed = anatomy;
          p.width = spec.width;
          p.height = spec.height;
          p.n_vessels = n_vessels;
          p.vessel_width = spec.vessel_width;
          p.finger_band = spec.finger_band;
          p.jitter_px = spec.jitter_px;
          const auto& band = spec.bands[static_cast<int>(cls)];
          Rng deg(derive_seed({p.seed, 14}));
          p.blur_sigma = deg.uniform(band.blur.lo, band.blur.hi);
          p.contrast = deg.uniform(band.contrast.lo, band.contrast.hi);
          p.noise_sigma = deg.uniform(band.noise.lo, band.noise.hi);
          p.illum_gradient = deg.uniform(band.illum.lo, band.illum.hi);
          plan.push_back(std::move(e));
        }
      }
    }
  }
  return plan;
}

std::vector<GrayImage> render_corpus(const std::vector<CorpusEntry>& plan, int jobs) {
  return parallel_map(plan.size(), jobs, [&](std::size_t i) {
    return to_gray_normalized(to_raster8(generate(plan[i].params).image));
  });
}

DatasetManifest generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir,
                                int jobs) {
  const auto plan = plan_corpus(spec);
  std::error_code ec;
  for (const auto& d : spec.datasets) {
    std::filesystem::create_directories(out_dir / d, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + (out_dir / d).string() + ": " + ec.message());
  }
  parallel_map(plan.size(), jobs, [&](std::size_t i) {
    save_gray_image(out_dir / plan[i].record.image_path, generate(plan[i].params).image);
    return 0;
  });
  std::vector<SampleRecord> records;
  records.reserve(plan.size());
  for (const auto& e : plan) records.push_back(e.record);
  DatasetManifest manifest(std::move(records), spec.trait_group, out_dir);
  write_manifest(manifest, out_dir / "manifest.csv");
  return manifest;
}

}  // namespace veinqa
