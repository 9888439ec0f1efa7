#include "veinqa/nss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "veinqa/errors.hpp"
#include "veinqa/imgproc.hpp"

namespace veinqa {
namespace {

// Below this the local variance is rounding noise from E[I^2] - E[I]^2.
constexpr double kVarianceFloor = 1e-15;

struct ShapeTable {
  std::vector<double> nu;
  std::vector<double> ratio;

  ShapeTable() {
    const int n = static_cast<int>(std::lround((kAggdShapeMax - kAggdShapeMin) / kAggdShapeStep)) + 1;
    nu.reserve(static_cast<std::size_t>(n));
    ratio.reserve(static_cast<std::size_t>(n));
    const int first = static_cast<int>(std::lround(kAggdShapeMin / kAggdShapeStep));
    for (int k = 0; k < n; ++k) {
      const double v = (first + k) / 1000.0;
      nu.push_back(v);
      ratio.push_back(aggd_shape_ratio(v));
    }
  }
};

const ShapeTable& shape_table() {
  static const ShapeTable table;
  return table;
}

void check_products_input(const CoefficientMap& m) {
  if (m.width < 2 || m.height < 2) {
    fail(ErrorKind::Dimension, "paired products need a map of at least 2x2, got " +
                                   std::to_string(m.width) + "x" + std::to_string(m.height));
  }
}

}  // namespace

MscnMaps mscn_maps(const Plane& image, const NssConfig& cfg) {
  if (!(cfg.window_sigma > 0.0)) fail(ErrorKind::Input, "window sigma must be positive");
  if (cfg.c < 0.0) fail(ErrorKind::Input, "C must be non-negative");
  const auto k = imgproc::gaussian_kernel(cfg.window_sigma, cfg.window_radius);

  Plane squared(image.width, image.height);
  for (std::size_t i = 0; i < image.size(); ++i) squared.data[i] = image.data[i] * image.data[i];
  const Plane mu = imgproc::convolve_separable(image, k, k);
  const Plane mu2 = imgproc::convolve_separable(squared, k, k);

  MscnMaps out{Plane(image.width, image.height), Plane(image.width, image.height)};
  for (std::size_t i = 0; i < image.size(); ++i) {
    double var = mu2.data[i] - mu.data[i] * mu.data[i];
    if (var < kVarianceFloor) var = 0.0;
    const double sigma = std::sqrt(var);
    const double denom = sigma + cfg.c;
    if (denom <= 0.0) {
      fail(ErrorKind::DegenerateInput,
           "MSCN denominator is zero on a locally constant region; use C > 0");
    }
    out.local_sigma.data[i] = sigma;
    out.coefficients.data[i] = (image.data[i] - mu.data[i]) / denom;
  }
  return out;
}

CoefficientMap mscn(const GrayImage& image, double window_sigma, double c) {
  NssConfig cfg;
  cfg.window_sigma = window_sigma;
  cfg.c = c;
  return mscn_maps(image.plane(), cfg).coefficients;
}

PairedProducts paired_products(const CoefficientMap& m) {
  check_products_input(m);
  const int w = m.width;
  const int h = m.height;
  PairedProducts p{Plane(w - 1, h), Plane(w, h - 1), Plane(w - 1, h - 1), Plane(w - 1, h - 1)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) p.horizontal(x, y) = m(x, y) * m(x + 1, y);
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x < w; ++x) p.vertical(x, y) = m(x, y) * m(x, y + 1);
  }
  for (int y = 0; y + 1 < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      p.main_diagonal(x, y) = m(x, y) * m(x + 1, y + 1);
      p.anti_diagonal(x, y) = m(x + 1, y) * m(x, y + 1);
    }
  }
  return p;
}

double aggd_shape_ratio(double nu) {
  return std::exp(2.0 * std::lgamma(2.0 / nu) - std::lgamma(1.0 / nu) - std::lgamma(3.0 / nu));
}

AggdParams fit_aggd(std::span<const double> samples) {
  if (samples.size() < kAggdMinSamples) {
    fail(ErrorKind::Input, "AGGD fit needs at least " + std::to_string(kAggdMinSamples) +
                               " samples, got " + std::to_string(samples.size()));
  }
  const bool all_same = std::all_of(samples.begin(), samples.end(),
                                    [first = samples.front()](double v) { return v == first; });
  if (all_same) fail(ErrorKind::DegenerateInput, "AGGD fit on identical samples");

  double left_sq = 0.0;
  double right_sq = 0.0;
  std::size_t n_left = 0;
  std::size_t n_right = 0;
  double sum_abs = 0.0;
  double sum_sq = 0.0;
  for (double v : samples) {
    const double sq = v * v;
    if (v < 0.0) {
      left_sq += sq;
      ++n_left;
    } else if (v > 0.0) {
      right_sq += sq;
      ++n_right;
    }
    sum_abs += std::abs(v);
    sum_sq += sq;
  }
  const double n = static_cast<double>(samples.size());
  const double sigma_l = n_left ? std::sqrt(left_sq / static_cast<double>(n_left)) : 0.0;
  const double sigma_r = n_right ? std::sqrt(right_sq / static_cast<double>(n_right)) : 0.0;

  const double mean_abs = sum_abs / n;
  const double r_hat = mean_abs * mean_abs / (sum_sq / n);
  double r_norm = r_hat;
  if (n_left && n_right) {
    const double g = sigma_l / sigma_r;
    r_norm = r_hat * (g * g * g + 1.0) * (g + 1.0) / ((g * g + 1.0) * (g * g + 1.0));
  }

  // The ratio is increasing in nu; nearest grid point, ties to the smaller nu.
  const auto& table = shape_table();
  const auto it = std::lower_bound(table.ratio.begin(), table.ratio.end(), r_norm);
  std::size_t idx = static_cast<std::size_t>(it - table.ratio.begin());
  if (idx == table.ratio.size()) {
    idx = table.ratio.size() - 1;
  } else if (idx > 0 &&
             std::abs(table.ratio[idx - 1] - r_norm) <= std::abs(table.ratio[idx] - r_norm)) {
    --idx;
  }
  const double nu = table.nu[idx];

  const double g1 = std::lgamma(1.0 / nu);
  const double g2 = std::lgamma(2.0 / nu);
  const double g3 = std::lgamma(3.0 / nu);
  const double scale = std::exp(0.5 * (g1 - g3));
  const double beta_l = sigma_l * scale;
  const double beta_r = sigma_r * scale;
  AggdParams p;
  p.nu = nu;
  p.mu = (beta_r - beta_l) * std::exp(g2 - g1);
  p.sigma2_l = sigma_l * sigma_l;
  p.sigma2_r = sigma_r * sigma_r;
  return p;
}

ScaleFeatures16 orientation_features(const CoefficientMap& coefficients) {
  const PairedProducts p = paired_products(coefficients);
  const CoefficientMap* maps[4] = {&p.horizontal, &p.vertical, &p.main_diagonal,
                                   &p.anti_diagonal};
  ScaleFeatures16 out{};
  for (std::size_t o = 0; o < 4; ++o) {
    const AggdParams a = fit_aggd(maps[o]->data);
    out[4 * o + 0] = a.mu;
    out[4 * o + 1] = a.nu;
    out[4 * o + 2] = a.sigma2_l;
    out[4 * o + 3] = a.sigma2_r;
  }
  return out;
}

FeatureVector32 brisque_features(const GrayImage& image, const NssConfig& cfg) {
  if (image.width() < 64 || image.height() < 64) {
    fail(ErrorKind::Dimension, "two-scale NSS features need at least 64x64 px, got " +
                                   std::to_string(image.width()) + "x" +
                                   std::to_string(image.height()));
  }
  FeatureVector32 out{};
  const auto s1 = orientation_features(mscn_maps(image.plane(), cfg).coefficients);
  const Plane half = imgproc::box_downsample2(image.plane());
  const auto s2 = orientation_features(mscn_maps(half, cfg).coefficients);
  std::copy(s1.begin(), s1.end(), out.begin());
  std::copy(s2.begin(), s2.end(), out.begin() + 16);
  return out;
}

std::vector<NiqePatch> niqe_patches(const GrayImage& image, int patch, double sharpness_quantile,
                                    const NssConfig& cfg) {
  if (patch < 32) fail(ErrorKind::Input, "NIQE patch size must be >= 32");
  if (!(sharpness_quantile >= 0.0 && sharpness_quantile <= 1.0)) {
    fail(ErrorKind::Input, "sharpness quantile must lie in [0,1]");
  }
  const int nx = image.width() / patch;
  const int ny = image.height() / patch;
  if (nx == 0 || ny == 0) {
    fail(ErrorKind::EmptySelection, "image of " + std::to_string(image.width()) + "x" +
                                        std::to_string(image.height()) + " px has no full " +
                                        std::to_string(patch) + " px patch");
  }

  const MscnMaps full = mscn_maps(image.plane(), cfg);
  struct Tile {
    int x, y;
    double sharpness;
  };
  std::vector<Tile> tiles;
  double max_sharpness = 0.0;
  for (int ty = 0; ty < ny; ++ty) {
    for (int tx = 0; tx < nx; ++tx) {
      double acc = 0.0;
      for (int y = 0; y < patch; ++y) {
        for (int x = 0; x < patch; ++x) acc += full.local_sigma(tx * patch + x, ty * patch + y);
      }
      const double s = acc / (static_cast<double>(patch) * patch);
      tiles.push_back({tx * patch, ty * patch, s});
      max_sharpness = std::max(max_sharpness, s);
    }
  }
  if (max_sharpness <= 0.0) fail(ErrorKind::EmptySelection, "no patch has non-zero sharpness");

  const Plane half_image = imgproc::box_downsample2(image.plane());
  const MscnMaps half = mscn_maps(half_image, cfg);
  const int half_patch = patch / 2;
  const double threshold = sharpness_quantile * max_sharpness;

  std::vector<NiqePatch> out;
  for (const Tile& t : tiles) {
    if (t.sharpness < threshold) continue;
    NiqePatch p;
    p.x = t.x;
    p.y = t.y;
    p.sharpness = t.sharpness;
    const auto s1 = orientation_features(imgproc::crop(full.coefficients, t.x, t.y, patch, patch));
    const auto s2 = orientation_features(
        imgproc::crop(half.coefficients, t.x / 2, t.y / 2, half_patch, half_patch));
    std::copy(s1.begin(), s1.end(), p.features.begin());
    std::copy(s2.begin(), s2.end(), p.features.begin() + 16);
    out.push_back(p);
  }
  if (out.empty()) fail(ErrorKind::EmptySelection, "no patch passed the sharpness threshold");
  return out;
}

std::vector<FeatureVector32> niqe_patch_features(const GrayImage& image, int patch,
                                                 double sharpness_quantile, const NssConfig& cfg) {
  std::vector<FeatureVector32> out;
  for (auto& p : niqe_patches(image, patch, sharpness_quantile, cfg)) out.push_back(p.features);
  return out;
}

}  // namespace veinqa
