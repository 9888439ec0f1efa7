#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "veinqa/dataset.hpp"
#include "veinqa/image.hpp"
#include "veinqa/scores.hpp"

namespace veinqa {

/// Binary vessel map, row-major, true = vessel.
class BinaryTemplate {
 public:
  BinaryTemplate() = default;
  BinaryTemplate(int width, int height);
  BinaryTemplate(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool operator()(int x, int y) const { return bits_[index(x, y)] != 0; }
  void set(int x, int y, bool v) { bits_[index(x, y)] = v ? 1 : 0; }
  std::size_t count() const noexcept;
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  friend bool operator==(const BinaryTemplate&, const BinaryTemplate&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

enum class FeatureType { MaximumCurvature, Gabor };

std::string_view to_string(FeatureType f) noexcept;  // "mc" / "gabor"
FeatureType parse_feature_type(std::string_view text);

// --- Maximum Curvature -------------------------------------------------------

struct McConfig {
  double sigma = 2.5;
};

/// Connected-centre scores before binarization.
Plane max_curvature_scores(const GrayImage& img, double sigma);
/// Binarized Maximum Curvature template (>= median of the positive scores).
BinaryTemplate extract_mc(const GrayImage& img, double sigma);

// --- Gabor -----------------------------------------------------------------

struct GaborConfig {
  double wavelength = 10.0;
  double sigma = 3.0;
  /// Envelope aspect along the line: < 1 elongates the kernel.
  double aspect = 0.8;
  int orientations = 8;
  double threshold_k = 0.5;
  int min_component = 10;
};

/// Even-symmetric, zero-mean kernels. Kernel k is tuned to lines running at
/// angle k * 180 / orientations degrees (0 = horizontal).
std::vector<Plane> gabor_bank(const GaborConfig& cfg);
/// Dark-line response of one kernel: the negated correlation.
Plane gabor_line_response(const GrayImage& img, const Plane& kernel);
BinaryTemplate extract_gabor(const GrayImage& img, const GaborConfig& cfg);

struct FeatureConfig {
  FeatureType type = FeatureType::MaximumCurvature;
  McConfig mc;
  GaborConfig gabor;
};

BinaryTemplate extract_features(const GrayImage& img, const FeatureConfig& cfg);

// --- Matching --------------------------------------------------------------

/// Maximum over integer shifts |dx| <= max_shift_x, |dy| <= max_shift_y of
/// matched / (probe_true + gallery_true), counted inside the overlap.
/// Self-match at zero shift is exactly 0.5.
double miura_match(const BinaryTemplate& probe, const BinaryTemplate& gallery, int max_shift_x,
                   int max_shift_y);

struct VerifyConfig {
  int max_shift_x = 8;
  int max_shift_y = 8;
  int jobs = 1;
};

struct ComparisonPair {
  std::size_t a = 0;
  std::size_t b = 0;
  bool genuine = false;
};

/// Comparison plan under the FVC protocol: every within-instance pair once,
/// and the first sample (canonical key order) of each instance against the
/// first sample of every other instance once.
std::vector<ComparisonPair> plan_comparisons(std::span<const SampleRecord> records);

struct TemplateEntry {
  SampleRecord record;
  std::optional<BinaryTemplate> tmpl;
};

/// Holds the templates of one experiment and memoises comparison scores so
/// repeated score-set builds (rejection curves) only match new pairs.
class ComparisonEngine {
 public:
  ComparisonEngine(std::vector<TemplateEntry> entries, VerifyConfig cfg);

  /// Score set over the given records; records without a template are
  /// skipped and counted.
  ScoreSet build(std::span<const SampleRecord> records);
  std::size_t skipped_last() const noexcept { return skipped_last_; }
  std::size_t matches_computed() const noexcept { return cache_.size(); }

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<TemplateEntry> entries_;
  VerifyConfig cfg_;
  std::map<std::pair<std::size_t, std::size_t>, double> cache_;
  std::size_t skipped_last_ = 0;
};

struct VerifySummary {
  std::size_t skipped_records = 0;
};

ScoreSet verify_all(std::span<const TemplateEntry> templates, const VerifyConfig& cfg,
                    VerifySummary* summary = nullptr);

// --- Template cache file ---------------------------------------------------

/// 16-byte header (8-byte magic "VQTMPL01", u32 LE width, u32 LE height)
/// followed by the bits packed LSB-first in row-major order.
std::string encode_template(const BinaryTemplate& t);
BinaryTemplate decode_template(std::string_view bytes);
void write_template(const std::filesystem::path& path, const BinaryTemplate& t);
BinaryTemplate read_template(const std::filesystem::path& path);

}  // namespace veinqa
