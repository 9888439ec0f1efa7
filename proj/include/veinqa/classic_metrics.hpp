#pragma once

#include <array>
#include <string_view>
#include <vector>

#include "veinqa/image.hpp"

namespace veinqa {

enum class ClassicMetric { Gcf, EntropyBased, Radon, TNorm, Wang, Hsnr };

inline constexpr std::array<ClassicMetric, 6> kClassicMetrics = {
    ClassicMetric::Gcf,   ClassicMetric::EntropyBased, ClassicMetric::Radon,
    ClassicMetric::TNorm, ClassicMetric::Wang,         ClassicMetric::Hsnr};

/// CLI / CSV identifier: gcf, entropy, radon, tnorm, wang, hsnr.
std::string_view metric_name(ClassicMetric m) noexcept;
ClassicMetric parse_classic_metric(std::string_view name);

/// Higher is better for every classic metric.
struct ClassicScore {
  ClassicMetric metric_id = ClassicMetric::Gcf;
  double value = 0.0;
};

// --- GCF -------------------------------------------------------------------

inline constexpr int kGcfLevels = 9;

/// Unnormalised level weight for level i in 1..9.
double gcf_level_weight(int level) noexcept;

struct GcfLevels {
  std::vector<double> contrast;
  std::vector<double> weight;  // normalised over the computed levels
};

GcfLevels gcf_levels(const GrayImage& img);
ClassicScore gcf(const GrayImage& img);

// --- Entropy ---------------------------------------------------------------

ClassicScore entropy_energy(const GrayImage& img);

// --- Radon -----------------------------------------------------------------

struct RadonProfile {
  std::array<double, 180> energy{};
  int best_angle = 0;
};

RadonProfile radon_profile(const GrayImage& img);
ClassicScore radon_quality(const GrayImage& img);

// --- TNorm -----------------------------------------------------------------

struct TNormComponents {
  double gradient = 0.0;
  double contrast = 0.0;
  double entropy = 0.0;
};

TNormComponents tnorm_components(const GrayImage& img);
/// Algebraic product t-norm.
double tnorm_fuse(double a, double b, double c) noexcept;
ClassicScore tnorm_quality(const GrayImage& img);

// --- Wang ------------------------------------------------------------------

struct WangComponents {
  double clarity = 0.0;
  double block_mean_std = 0.0;
  double uniformity = 0.0;
};

/// Population standard deviation of the means of the full 8x8 blocks.
double block_mean_std(const GrayImage& img, int block = 8);
WangComponents wang_components(const GrayImage& img);
ClassicScore wang_quality(const GrayImage& img);

// --- HSNR ------------------------------------------------------------------

struct HsnrComponents {
  double contrast = 0.0;
  double centroid = 0.0;
  double effective_area = 0.0;
  double snr = 0.0;
  bool degenerate_foreground = false;
};

/// Otsu threshold bin on the 256-bin histogram; -1 when no split exists.
int otsu_threshold(const std::array<double, 256>& hist) noexcept;
HsnrComponents hsnr_components(const GrayImage& img);
/// 30 + 60 * mean of the four indices.
double hsnr_combine(const HsnrComponents& c) noexcept;
ClassicScore hsnr_quality(const GrayImage& img);

ClassicScore classic_score(ClassicMetric m, const GrayImage& img);

}  // namespace veinqa
