#include "veinqa/classic_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "veinqa/errors.hpp"
#include "veinqa/imgproc.hpp"

namespace veinqa {

std::string_view metric_name(ClassicMetric m) noexcept {
  switch (m) {
    case ClassicMetric::Gcf: return "gcf";
    case ClassicMetric::EntropyBased: return "entropy";
    case ClassicMetric::Radon: return "radon";
    case ClassicMetric::TNorm: return "tnorm";
    case ClassicMetric::Wang: return "wang";
    case ClassicMetric::Hsnr: return "hsnr";
  }
  return "";
}

ClassicMetric parse_classic_metric(std::string_view name) {
  for (ClassicMetric m : kClassicMetrics) {
    if (metric_name(m) == name) return m;
  }
  fail(ErrorKind::Usage, "unknown classic metric '" + std::string(name) + "'");
}

namespace {

void require_size(const GrayImage& img, int min_side, std::string_view what) {
  if (img.width() < min_side || img.height() < min_side) {
    fail(ErrorKind::Dimension, std::string(what) + " needs at least " + std::to_string(min_side) +
                                   "x" + std::to_string(min_side) + " px");
  }
}

double stddev(std::span<const double> v) { return std::sqrt(imgproc::variance(v)); }

double mean_local_contrast(const Plane& p) {
  double total = 0.0;
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      const double v = p(x, y);
      double acc = 0.0;
      int n = 0;
      auto add = [&](int nx, int ny) {
        acc += std::abs(v - p(nx, ny));
        ++n;
      };
      if (x > 0) add(x - 1, y);
      if (x + 1 < p.width) add(x + 1, y);
      if (y > 0) add(x, y - 1);
      if (y + 1 < p.height) add(x, y + 1);
      total += acc / n;
    }
  }
  return total / static_cast<double>(p.size());
}

}  // namespace

double gcf_level_weight(int level) noexcept {
  const double t = static_cast<double>(level) / kGcfLevels;
  return (-0.406385 * t + 0.334573) * t + 0.0877526;
}

GcfLevels gcf_levels(const GrayImage& img) {
  require_size(img, 2, "GCF");
  GcfLevels out;
  Plane current = img.plane();
  for (int level = 1; level <= kGcfLevels; ++level) {
    if (current.width < 2 || current.height < 2) break;
    out.contrast.push_back(mean_local_contrast(current));
    out.weight.push_back(gcf_level_weight(level));
    current = imgproc::box_downsample2(current);
  }
  double sum = 0.0;
  for (double w : out.weight) sum += w;
  for (double& w : out.weight) w /= sum;
  return out;
}

ClassicScore gcf(const GrayImage& img) {
  const GcfLevels l = gcf_levels(img);
  double v = 0.0;
  for (std::size_t i = 0; i < l.contrast.size(); ++i) v += l.weight[i] * l.contrast[i];
  return {ClassicMetric::Gcf, v};
}

ClassicScore entropy_energy(const GrayImage& img) {
  if (img.empty()) fail(ErrorKind::Dimension, "entropy of an empty image");
  const auto hist = imgproc::histogram256(img.pixels());
  const double n = static_cast<double>(img.size());
  double h = 0.0;
  for (double c : hist) {
    if (c > 0.0) {
      const double p = c / n;
      h -= p * std::log2(p);
    }
  }
  return {ClassicMetric::EntropyBased, h == 0.0 ? 0.0 : h};
}

RadonProfile radon_profile(const GrayImage& img) {
  require_size(img, 16, "Radon quality");
  const int w = img.width();
  const int h = img.height();
  const double m = imgproc::mean(img.pixels());
  const double cx = 0.5 * (w - 1);
  const double cy = 0.5 * (h - 1);
  const int nbins = static_cast<int>(std::ceil(std::hypot(w, h))) + 3;
  const double offset = nbins / 2;

  std::vector<double> centered(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) centered[i] = img.pixels()[i] - m;

  RadonProfile out;
  std::vector<double> proj(static_cast<std::size_t>(nbins));
  for (int a = 0; a < 180; ++a) {
    const double rad = a * std::numbers::pi / 180.0;
    const double c = std::cos(rad);
    const double s = std::sin(rad);
    std::fill(proj.begin(), proj.end(), 0.0);
    for (int y = 0; y < h; ++y) {
      const double ty = (y - cy) * s + offset + 0.5;
      const double* row = &centered[static_cast<std::size_t>(y) * w];
      for (int x = 0; x < w; ++x) {
        const auto bin = static_cast<std::size_t>(std::floor((x - cx) * c + ty));
        proj[bin] += row[x];
      }
    }
    out.energy[static_cast<std::size_t>(a)] = imgproc::variance(proj);
  }
  out.best_angle = static_cast<int>(std::max_element(out.energy.begin(), out.energy.end()) -
                                    out.energy.begin());
  return out;
}

ClassicScore radon_quality(const GrayImage& img) {
  const auto px = img.pixels();
  const bool constant =
      std::all_of(px.begin(), px.end(), [first = px.front()](double v) { return v == first; });
  if (constant) {
    require_size(img, 16, "Radon quality");
    return {ClassicMetric::Radon, 1.0};
  }
  const RadonProfile p = radon_profile(img);
  double mean = 0.0;
  double best = 0.0;
  for (double e : p.energy) {
    mean += e;
    best = std::max(best, e);
  }
  mean /= 180.0;
  if (!(mean > 1e-300)) return {ClassicMetric::Radon, 1.0};
  return {ClassicMetric::Radon, best / mean};
}

TNormComponents tnorm_components(const GrayImage& img) {
  if (img.empty()) fail(ErrorKind::Dimension, "TNorm of an empty image");
  TNormComponents c;
  c.gradient = std::min(1.0, imgproc::mean_gradient_magnitude(img.plane()) / std::numbers::sqrt2);
  c.contrast = std::min(1.0, stddev(img.pixels()) / 0.5);
  c.entropy = std::min(1.0, entropy_energy(img).value / 8.0);
  return c;
}

double tnorm_fuse(double a, double b, double c) noexcept { return a * b * c; }

ClassicScore tnorm_quality(const GrayImage& img) {
  const auto c = tnorm_components(img);
  return {ClassicMetric::TNorm, tnorm_fuse(c.gradient, c.contrast, c.entropy)};
}

double block_mean_std(const GrayImage& img, int block) {
  const int bx = img.width() / block;
  const int by = img.height() / block;
  std::vector<double> means;
  means.reserve(static_cast<std::size_t>(bx) * by);
  for (int j = 0; j < by; ++j) {
    for (int i = 0; i < bx; ++i) {
      double acc = 0.0;
      for (int y = 0; y < block; ++y) {
        for (int x = 0; x < block; ++x) acc += img(i * block + x, j * block + y);
      }
      means.push_back(acc / (block * block));
    }
  }
  return stddev(means);
}

WangComponents wang_components(const GrayImage& img) {
  require_size(img, 8, "Wang quality");
  WangComponents c;
  const double g = imgproc::mean_gradient_magnitude(img.plane());
  const double sd = stddev(img.pixels());
  c.clarity = (g + sd) > 0.0 ? g / (g + sd) : 0.0;
  c.block_mean_std = block_mean_std(img);
  c.uniformity = std::clamp(1.0 - c.block_mean_std / 0.5, 0.0, 1.0);
  return c;
}

ClassicScore wang_quality(const GrayImage& img) {
  const auto c = wang_components(img);
  return {ClassicMetric::Wang, 0.5 * c.clarity + 0.5 * c.uniformity};
}

int otsu_threshold(const std::array<double, 256>& hist) noexcept {
  double total = 0.0;
  double weighted = 0.0;
  for (int k = 0; k < 256; ++k) {
    total += hist[static_cast<std::size_t>(k)];
    weighted += k * hist[static_cast<std::size_t>(k)];
  }
  if (total <= 0.0) return -1;
  double w0 = 0.0;
  double sum0 = 0.0;
  double best = 0.0;
  int best_t = -1;
  for (int t = 0; t < 255; ++t) {
    w0 += hist[static_cast<std::size_t>(t)];
    sum0 += t * hist[static_cast<std::size_t>(t)];
    const double w1 = total - w0;
    if (w0 <= 0.0 || w1 <= 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (weighted - sum0) / w1;
    const double between = (w0 / total) * (w1 / total) * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

HsnrComponents hsnr_components(const GrayImage& img) {
  require_size(img, 16, "HSNR");
  HsnrComponents c;
  const int w = img.width();
  const int h = img.height();
  c.contrast = std::min(1.0, stddev(img.pixels()) / 0.5);

  // Vessels are dark: the foreground is the lower Otsu class.
  const auto hist = imgproc::histogram256(img.pixels());
  const int t = otsu_threshold(hist);
  double fx = 0.0;
  double fy = 0.0;
  double count = 0.0;
  if (t >= 0) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (std::lround(img(x, y) * 255.0) <= t) {
          fx += x;
          fy += y;
          count += 1.0;
        }
      }
    }
  }
  if (count == 0.0) {
    c.degenerate_foreground = true;
    c.centroid = 0.0;
    c.effective_area = 0.0;
  } else {
    const double cx = 0.5 * (w - 1);
    const double cy = 0.5 * (h - 1);
    const double d = std::hypot(fx / count - cx, fy / count - cy);
    c.centroid = std::clamp(1.0 - d / std::hypot(cx, cy), 0.0, 1.0);
    c.effective_area = std::clamp(count / static_cast<double>(img.size()), 0.0, 1.0);
  }

  // Noise is the 3x3 median residual, weighted by a Weber-style luminance
  // factor: the same residual is more visible on darker tissue.
  const Plane med = imgproc::median3x3(img.plane());
  const double mean_luma = imgproc::mean(med.data);
  constexpr double kWeber = 0.05;
  double noise = 0.0;
  for (std::size_t i = 0; i < med.size(); ++i) {
    const double r = img.pixels()[i] - med.data[i];
    const double weight = (mean_luma + kWeber) / (med.data[i] + kWeber);
    noise += (weight * r) * (weight * r);
  }
  noise /= static_cast<double>(med.size());
  const double signal = imgproc::variance(med.data);
  if (signal <= 0.0) {
    c.snr = 0.0;
  } else if (noise <= 0.0) {
    c.snr = 1.0;
  } else {
    const double db = 10.0 * std::log10(signal / noise);
    c.snr = 1.0 / (1.0 + std::exp(-(db - 10.0) / 5.0));
  }
  return c;
}

double hsnr_combine(const HsnrComponents& c) noexcept {
  return 30.0 + 60.0 * (c.contrast + c.centroid + c.effective_area + c.snr) / 4.0;
}

ClassicScore hsnr_quality(const GrayImage& img) {
  return {ClassicMetric::Hsnr, hsnr_combine(hsnr_components(img))};
}

ClassicScore classic_score(ClassicMetric m, const GrayImage& img) {
  switch (m) {
    case ClassicMetric::Gcf: return gcf(img);
    case ClassicMetric::EntropyBased: return entropy_energy(img);
    case ClassicMetric::Radon: return radon_quality(img);
    case ClassicMetric::TNorm: return tnorm_quality(img);
    case ClassicMetric::Wang: return wang_quality(img);
    case ClassicMetric::Hsnr: return hsnr_quality(img);
  }
  fail(ErrorKind::Usage, "unknown classic metric");
}

}  // namespace veinqa
