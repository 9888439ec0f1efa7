#include "veinqa/imgproc.hpp"

#include <algorithm>
#include <cmath>

#include "veinqa/errors.hpp"

namespace veinqa::imgproc {

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n;
  int m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - 1 - m;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
  if (sigma <= 0.0 || radius < 0) fail(ErrorKind::Input, "gaussian kernel needs sigma > 0");
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

Plane convolve_separable(const Plane& src, std::span<const double> kx,
                         std::span<const double> ky) {
  if (kx.size() % 2 == 0 || ky.size() % 2 == 0) {
    fail(ErrorKind::Input, "separable kernels must have odd length");
  }
  const int w = src.width;
  const int h = src.height;
  const int rx = static_cast<int>(kx.size() / 2);
  const int ry = static_cast<int>(ky.size() / 2);

  Plane tmp(w, h);
  std::vector<double> row(static_cast<std::size_t>(w + 2 * rx));
  for (int y = 0; y < h; ++y) {
    for (int i = -rx; i < w + rx; ++i) row[static_cast<std::size_t>(i + rx)] = src(reflect_index(i, w), y);
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (std::size_t k = 0; k < kx.size(); ++k) acc += kx[k] * row[static_cast<std::size_t>(x) + k];
      tmp(x, y) = acc;
    }
  }

  Plane out(w, h);
  std::vector<double> col(static_cast<std::size_t>(h + 2 * ry));
  for (int x = 0; x < w; ++x) {
    for (int i = -ry; i < h + ry; ++i) col[static_cast<std::size_t>(i + ry)] = tmp(x, reflect_index(i, h));
    for (int y = 0; y < h; ++y) {
      double acc = 0.0;
      for (std::size_t k = 0; k < ky.size(); ++k) acc += ky[k] * col[static_cast<std::size_t>(y) + k];
      out(x, y) = acc;
    }
  }
  return out;
}

Plane correlate2d(const Plane& src, const Plane& kernel) {
  if (kernel.width % 2 == 0 || kernel.height % 2 == 0) {
    fail(ErrorKind::Input, "2-D kernels must have odd dimensions");
  }
  const int w = src.width;
  const int h = src.height;
  const int rx = kernel.width / 2;
  const int ry = kernel.height / 2;
  const int pw = w + 2 * rx;

  // Pad once so the inner loop is branch-free.
  Plane padded(pw, h + 2 * ry);
  for (int y = -ry; y < h + ry; ++y) {
    const int sy = reflect_index(y, h);
    for (int x = -rx; x < w + rx; ++x) padded(x + rx, y + ry) = src(reflect_index(x, w), sy);
  }

  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int ky = 0; ky < kernel.height; ++ky) {
        const double* prow = &padded.data[static_cast<std::size_t>(y + ky) * pw + x];
        const double* krow = &kernel.data[static_cast<std::size_t>(ky) * kernel.width];
        for (int kx = 0; kx < kernel.width; ++kx) acc += krow[kx] * prow[kx];
      }
      out(x, y) = acc;
    }
  }
  return out;
}

Plane gaussian_blur(const Plane& src, double sigma) {
  if (sigma <= 0.0) return src;
  const auto k = gaussian_kernel(sigma, static_cast<int>(std::ceil(3.0 * sigma)));
  return convolve_separable(src, k, k);
}

Plane box_downsample2(const Plane& src) {
  const int w = src.width / 2;
  const int h = src.height / 2;
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      out(x, y) = (src(2 * x, 2 * y) + src(2 * x + 1, 2 * y) + src(2 * x, 2 * y + 1) +
                   src(2 * x + 1, 2 * y + 1)) /
                  4.0;
    }
  }
  return out;
}

Plane crop(const Plane& src, int x0, int y0, int width, int height) {
  if (x0 < 0 || y0 < 0 || width <= 0 || height <= 0 || x0 + width > src.width ||
      y0 + height > src.height) {
    fail(ErrorKind::Dimension, "crop rectangle outside the source plane");
  }
  Plane out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) out(x, y) = src(x0 + x, y0 + y);
  }
  return out;
}

Plane rotate180(const Plane& src) {
  Plane out(src.width, src.height);
  std::reverse_copy(src.data.begin(), src.data.end(), out.data.begin());
  return out;
}

Plane median3x3(const Plane& src) {
  Plane out(src.width, src.height);
  std::array<double, 9> win{};
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      int n = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          win[static_cast<std::size_t>(n++)] =
              src(reflect_index(x + dx, src.width), reflect_index(y + dy, src.height));
        }
      }
      std::nth_element(win.begin(), win.begin() + 4, win.end());
      out(x, y) = win[4];
    }
  }
  return out;
}

double mean(std::span<const double> values) noexcept {
  if (values.empty()) return 0.0;
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

double variance(std::span<const double> values) noexcept {
  if (values.empty()) return 0.0;
  const double m = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - m) * (v - m);
  return s / static_cast<double>(values.size());
}

double mean_gradient_magnitude(const Plane& src) {
  if (src.width < 2 || src.height < 2) return 0.0;
  double acc = 0.0;
  for (int y = 0; y + 1 < src.height; ++y) {
    for (int x = 0; x + 1 < src.width; ++x) {
      const double gx = src(x + 1, y) - src(x, y);
      const double gy = src(x, y + 1) - src(x, y);
      acc += std::sqrt(gx * gx + gy * gy);
    }
  }
  return acc / (static_cast<double>(src.width - 1) * static_cast<double>(src.height - 1));
}

std::array<double, 256> histogram256(std::span<const double> values) {
  std::array<double, 256> hist{};
  for (double v : values) {
    long bin = std::lround(v * 255.0);
    bin = std::clamp(bin, 0L, 255L);
    hist[static_cast<std::size_t>(bin)] += 1.0;
  }
  return hist;
}

}  // namespace veinqa::imgproc
