#include "veinqa/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "veinqa/errors.hpp"
#include "veinqa/imgproc.hpp"

namespace veinqa {

GrayImage to_gray_normalized(const Raster8& raw) {
  if (raw.width <= 0 || raw.height <= 0) {
    fail(ErrorKind::Dimension, "zero-sized raster");
  }
  if (raw.channels != 1 && raw.channels != 3) {
    fail(ErrorKind::Input, "raster must have 1 or 3 channels");
  }
  const std::size_t n = static_cast<std::size_t>(raw.width) * static_cast<std::size_t>(raw.height);
  if (raw.data.size() != n * static_cast<std::size_t>(raw.channels)) {
    fail(ErrorKind::Dimension, "raster buffer does not match its dimensions");
  }
  std::vector<double> px(n);
  if (raw.channels == 1) {
    for (std::size_t i = 0; i < n; ++i) px[i] = raw.data[i] / 255.0;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const int sum = raw.data[3 * i] + raw.data[3 * i + 1] + raw.data[3 * i + 2];
      px[i] = (sum / 3.0) / 255.0;
    }
  }
  return GrayImage(raw.width, raw.height, std::move(px));
}

RoiMode parse_roi_mode(std::string_view text) {
  if (text == "none") return RoiMode::None;
  if (text == "fixed") return RoiMode::Fixed;
  if (text == "finger") return RoiMode::Finger;
  fail(ErrorKind::Usage, "unknown roi mode '" + std::string(text) + "'");
}

std::string_view to_string(RoiMode mode) noexcept {
  switch (mode) {
    case RoiMode::None: return "none";
    case RoiMode::Fixed: return "fixed";
    case RoiMode::Finger: return "finger";
  }
  return "";
}

namespace {

RoiRect finger_roi(const GrayImage& img, const RoiConfig& cfg) {
  const int w = img.width();
  const int h = img.height();
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * cfg.smoothing_sigma)));
  const auto k = imgproc::gaussian_kernel(cfg.smoothing_sigma, radius);
  const std::vector<double> identity{1.0};
  const Plane smooth = imgproc::convolve_separable(img.plane(), identity, k);

  // Per-column edges are combined by their median so that a vessel edge in
  // a few columns cannot pull the crop off the finger.
  std::vector<int> tops;
  std::vector<int> bottoms;
  for (int x = 0; x < w; ++x) {
    // Gradient between rows y and y+1. The finger is brighter than the
    // background: dark-to-bright going down marks the upper edge. Vessel
    // edges inside the finger can be as strong as the boundary, so the
    // outermost step reaching half the strongest one is taken.
    std::vector<double> up(static_cast<std::size_t>(h) / 2, 0.0);
    std::vector<double> down(static_cast<std::size_t>(h) / 2, 0.0);
    for (int y = 0; y < h / 2; ++y) up[y] = smooth(x, y + 1) - smooth(x, y);
    for (int i = 0; i < h / 2; ++i) {
      const int y = h - 2 - i;
      down[i] = smooth(x, y) - smooth(x, y + 1);
    }
    const double best_up = *std::max_element(up.begin(), up.end());
    const double best_down = *std::max_element(down.begin(), down.end());
    const auto outermost = [](const std::vector<double>& g, double best) {
      return static_cast<int>(std::find_if(g.begin(), g.end(), [&](double v) { return v >= 0.5 * best; }) -
                              g.begin());
    };
    const int up_row = outermost(up, best_up) + 1;
    const int down_row = h - 2 - outermost(down, best_down);
    if (best_up < cfg.grad_threshold || best_down < cfg.grad_threshold) continue;
    tops.push_back(up_row);
    bottoms.push_back(down_row);
  }
  const int valid = static_cast<int>(tops.size());
  if (valid < (w + 1) / 2) {
    fail(ErrorKind::RoiFailure, "finger boundaries found in only " + std::to_string(valid) +
                                    " of " + std::to_string(w) + " columns");
  }
  auto median = [](std::vector<int>& v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  const int top = median(tops) + cfg.margin;
  const int bottom = median(bottoms) - cfg.margin;
  if (bottom - top + 1 < 2) fail(ErrorKind::RoiFailure, "detected finger region is empty");
  return RoiRect{0, top, w, bottom - top + 1};
}

}  // namespace

RoiRect locate_roi(const GrayImage& img, const RoiConfig& cfg) {
  if (cfg.mode == RoiMode::None) return RoiRect{0, 0, img.width(), img.height()};
  if (img.width() < cfg.min_size || img.height() < cfg.min_size) {
    fail(ErrorKind::Dimension, "image smaller than the ROI minimum of " +
                                   std::to_string(cfg.min_size) + " px");
  }
  if (cfg.mode == RoiMode::Fixed) {
    if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) {
      fail(ErrorKind::Input, "roi fraction must lie in (0,1]");
    }
    const int cw = std::max(1, static_cast<int>(std::floor(cfg.fraction * img.width())));
    const int ch = std::max(1, static_cast<int>(std::floor(cfg.fraction * img.height())));
    return RoiRect{(img.width() - cw) / 2, (img.height() - ch) / 2, cw, ch};
  }
  return finger_roi(img, cfg);
}

GrayImage extract_roi(const GrayImage& img, const RoiConfig& cfg) {
  if (cfg.mode == RoiMode::None) return img;
  const RoiRect r = locate_roi(img, cfg);
  return GrayImage::from_plane(imgproc::crop(img.plane(), r.x, r.y, r.width, r.height));
}

}  // namespace veinqa
