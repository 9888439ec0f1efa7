#pragma once

#include <array>
#include <span>
#include <vector>

#include "veinqa/image.hpp"

namespace veinqa::imgproc {

/// Symmetric (half-sample) border index: -1 -> 0, n -> n-1.
int reflect_index(int i, int n) noexcept;

/// Sampled Gaussian on [-radius, radius], normalized to unit sum.
std::vector<double> gaussian_kernel(double sigma, int radius);

/// Separable convolution (correlation) with symmetric border extension.
/// kx runs along rows, ky along columns; both must have odd length.
Plane convolve_separable(const Plane& src, std::span<const double> kx,
                         std::span<const double> ky);

/// Dense 2-D correlation with an odd-sized kernel, symmetric border.
Plane correlate2d(const Plane& src, const Plane& kernel);

/// Gaussian blur, kernel radius ceil(3 sigma). sigma <= 0 returns a copy.
Plane gaussian_blur(const Plane& src, double sigma);

/// 2x2 box averaging; odd trailing row/column dropped.
Plane box_downsample2(const Plane& src);

Plane crop(const Plane& src, int x, int y, int width, int height);
Plane rotate180(const Plane& src);
Plane median3x3(const Plane& src);

double mean(std::span<const double> values) noexcept;
/// Population variance.
double variance(std::span<const double> values) noexcept;

/// Mean of sqrt(dx^2 + dy^2) using forward differences over the pixels that
/// have both a right and a lower neighbour.
double mean_gradient_magnitude(const Plane& src);

/// 256-bin histogram of [0,1] intensities, bin = round(v * 255).
std::array<double, 256> histogram256(std::span<const double> values);

}  // namespace veinqa::imgproc
