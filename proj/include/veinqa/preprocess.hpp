#pragma once

#include <string_view>

#include "veinqa/image.hpp"

namespace veinqa {

/// Equal-weight channel average scaled to [0,1].
GrayImage to_gray_normalized(const Raster8& raw);

enum class RoiMode { None, Fixed, Finger };

RoiMode parse_roi_mode(std::string_view text);
std::string_view to_string(RoiMode mode) noexcept;

struct RoiConfig {
  RoiMode mode = RoiMode::None;
  /// Side fraction kept by the central crop in fixed mode.
  double fraction = 0.8;
  /// Minimum vertical gradient (per pixel, on smoothed columns) accepted as
  /// a finger boundary in finger mode.
  double grad_threshold = 0.02;
  /// Column smoothing before differentiation.
  double smoothing_sigma = 2.0;
  /// Rows trimmed inside each detected boundary.
  int margin = 2;
  int min_size = 16;
};

struct RoiRect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
};

RoiRect locate_roi(const GrayImage& img, const RoiConfig& cfg);
GrayImage extract_roi(const GrayImage& img, const RoiConfig& cfg);

}  // namespace veinqa
