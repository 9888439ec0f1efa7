#pragma once

#include <array>
#include <span>
#include <vector>

#include "veinqa/image.hpp"

namespace veinqa {

/// MSCN coefficients (or products of them); same layout as Plane.
using CoefficientMap = Plane;

struct NssConfig {
  double window_sigma = 7.0 / 6.0;
  /// Half-width of the Gaussian window; 3 gives the 7x7 window.
  int window_radius = 3;
  /// Divisive-normalisation stabiliser on [0,1] intensities.
  double c = 1.0 / 255.0;
};

struct MscnMaps {
  CoefficientMap coefficients;
  /// Local Gaussian-weighted deviation, the denominator before adding C.
  Plane local_sigma;
};

MscnMaps mscn_maps(const Plane& image, const NssConfig& cfg = {});
CoefficientMap mscn(const GrayImage& image, double window_sigma = 7.0 / 6.0,
                    double c = 1.0 / 255.0);

/// Neighbour products at one-pixel distance. Horizontal maps are one column
/// narrower, vertical one row shorter, diagonals both.
struct PairedProducts {
  CoefficientMap horizontal;     // m(x,y) * m(x+1,y)
  CoefficientMap vertical;       // m(x,y) * m(x,y+1)
  CoefficientMap main_diagonal;  // m(x,y) * m(x+1,y+1)
  CoefficientMap anti_diagonal;  // m(x+1,y) * m(x,y+1)
};

PairedProducts paired_products(const CoefficientMap& m);

struct AggdParams {
  double mu = 0.0;
  double nu = 0.0;
  double sigma2_l = 0.0;
  double sigma2_r = 0.0;
};

inline constexpr double kAggdShapeMin = 0.05;
inline constexpr double kAggdShapeMax = 10.0;
inline constexpr double kAggdShapeStep = 0.001;
inline constexpr std::size_t kAggdMinSamples = 100;

/// Generalised-Gaussian moment ratio Gamma(2/nu)^2 / (Gamma(1/nu) Gamma(3/nu)).
double aggd_shape_ratio(double nu);

/// Moment-matching AGGD fit. The shape is the grid point (step 0.001 on
/// [0.05, 10]) whose ratio is closest to the asymmetry-corrected sample
/// ratio; mu is the AGGD mean implied by (nu, sigma_l, sigma_r).
AggdParams fit_aggd(std::span<const double> samples);

/// Layout: [scale][orientation h,v,d1,d2][mu,nu,sigma2_l,sigma2_r].
using FeatureVector32 = std::array<double, 32>;
using ScaleFeatures16 = std::array<double, 16>;

/// Fits the four orientations of one coefficient map.
ScaleFeatures16 orientation_features(const CoefficientMap& coefficients);

/// Two-scale descriptor; scale 2 is the 2x2 box-downsampled image. Both
/// scales need a minimum side of 32 px, so the input needs 64.
FeatureVector32 brisque_features(const GrayImage& image, const NssConfig& cfg = {});

struct NiqePatch {
  int x = 0;
  int y = 0;
  double sharpness = 0.0;
  FeatureVector32 features{};
};

/// Tiles the image into non-overlapping patch x patch blocks, keeps those
/// whose mean local deviation reaches sharpness_quantile times the maximum,
/// and describes each kept patch at both scales.
std::vector<NiqePatch> niqe_patches(const GrayImage& image, int patch, double sharpness_quantile,
                                    const NssConfig& cfg = {});
std::vector<FeatureVector32> niqe_patch_features(const GrayImage& image, int patch,
                                                 double sharpness_quantile,
                                                 const NssConfig& cfg = {});

}  // namespace veinqa
