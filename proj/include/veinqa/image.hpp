#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace veinqa {

/// Dense row-major plane of reals without range restrictions. Used for
/// coefficient maps, filter responses and other intermediate results.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0);

  double& operator()(int x, int y) { return data[index(x, y)]; }
  double operator()(int x, int y) const { return data[index(x, y)]; }

  std::size_t size() const noexcept { return data.size(); }
  bool empty() const noexcept { return data.empty(); }

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(x);
  }
};

/// Grayscale image with intensities in [0,1]. The range and finiteness
/// invariant is checked on construction.
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, std::vector<double> data);

  static GrayImage constant(int width, int height, double value);
  static GrayImage from_plane(Plane plane);
  /// Clamps every value to [0,1] (non-finite values become 0).
  static GrayImage from_plane_clamped(Plane plane);

  int width() const noexcept { return plane_.width; }
  int height() const noexcept { return plane_.height; }
  std::size_t size() const noexcept { return plane_.data.size(); }
  bool empty() const noexcept { return plane_.data.empty(); }

  double operator()(int x, int y) const { return plane_(x, y); }
  std::span<const double> pixels() const noexcept { return plane_.data; }
  const Plane& plane() const noexcept { return plane_; }

  friend bool operator==(const GrayImage& a, const GrayImage& b) {
    return a.plane_.width == b.plane_.width && a.plane_.height == b.plane_.height &&
           a.plane_.data == b.plane_.data;
  }

 private:
  explicit GrayImage(Plane plane) : plane_(std::move(plane)) {}
  Plane plane_;
};

/// Raw 8-bit raster as decoded from disk, interleaved channels.
struct Raster8 {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;
};

}  // namespace veinqa
