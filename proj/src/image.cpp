#include "veinqa/image.hpp"

#include <cmath>
#include <string>

#include "veinqa/errors.hpp"

namespace veinqa {

Plane::Plane(int w, int h, double fill) : width(w), height(h) {
  if (w < 0 || h < 0) fail(ErrorKind::Dimension, "negative plane dimensions");
  data.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> data) {
  if (width <= 0 || height <= 0) {
    fail(ErrorKind::Dimension, "image dimensions must be positive, got " +
                                   std::to_string(width) + "x" + std::to_string(height));
  }
  if (data.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    fail(ErrorKind::Dimension, "pixel count does not match image dimensions");
  }
  for (double v : data) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      fail(ErrorKind::Input, "image intensities must be finite and within [0,1]");
    }
  }
  plane_.width = width;
  plane_.height = height;
  plane_.data = std::move(data);
}

GrayImage GrayImage::constant(int width, int height, double value) {
  return GrayImage(width, height,
                   std::vector<double>(static_cast<std::size_t>(width) *
                                           static_cast<std::size_t>(height),
                                       value));
}

GrayImage GrayImage::from_plane(Plane plane) {
  return GrayImage(plane.width, plane.height, std::move(plane.data));
}

GrayImage GrayImage::from_plane_clamped(Plane plane) {
  if (plane.width <= 0 || plane.height <= 0) {
    fail(ErrorKind::Dimension, "image dimensions must be positive");
  }
  for (double& v : plane.data) {
    if (!std::isfinite(v)) v = 0.0;
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }
  return GrayImage(std::move(plane));
}

}  // namespace veinqa
