#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "veinqa/dataset.hpp"
#include "veinqa/image.hpp"

namespace veinqa {

struct Range {
  double lo = 0.0;
  double hi = 0.0;

  bool valid() const noexcept { return lo <= hi; }
  friend bool operator==(const Range&, const Range&) = default;
};

struct SynthParams {
  /// Drives the sample-specific randomness: jitter and sensor noise.
  std::uint64_t seed = 0;
  /// Drives the anatomy: background, finger band and vessel tree. Samples
  /// of the same finger share it. Defaults to `seed` when unset.
  std::optional<std::uint64_t> structure_seed;
  int width = 128;
  int height = 128;
  int n_vessels = 6;
  /// Vessel diameter in pixels, drawn per vessel.
  Range vessel_width{2.0, 4.0};
  double blur_sigma = 0.0;
  /// Scale of intensity deviations about the mean, in (0,1].
  double contrast = 1.0;
  double noise_sigma = 0.0;
  /// Relative brightness change from the left to the right edge.
  double illum_gradient = 0.0;
  bool finger_band = true;
  /// Maximum rigid displacement applied to the shared anatomy, in pixels.
  double jitter_px = 0.0;

  /// Throws a validation error naming the first invalid field.
  void validate() const;
};

struct SynthSample {
  GrayImage image;
  /// Render before the degradation chain.
  GrayImage pristine;
  /// Row-major, 1 = vessel pixel.
  std::vector<std::uint8_t> vessel_mask;
  /// First and last finger row (inclusive) when finger_band is set.
  std::optional<std::pair<int, int>> band_rows;
  SynthParams params;
};

SynthSample generate(const SynthParams& params);

// --- Corpora -----------------------------------------------------------------

struct DegradationBand {
  Range blur{0.0, 0.0};
  Range contrast{1.0, 1.0};
  Range noise{0.0, 0.0};
  Range illum{0.0, 0.0};
};

struct CorpusSpec {
  std::uint64_t seed = 1;
  std::vector<std::string> datasets{"synth"};
  int n_subjects = 10;
  int n_fingers = 2;
  int n_samples = 4;
  int width = 128;
  int height = 128;
  Range n_vessels{5.0, 8.0};
  Range vessel_width{2.0, 4.0};
  bool finger_band = true;
  double jitter_px = 2.0;
  TraitGroup trait_group = TraitGroup::FingerPalmar;
  /// Share of each dataset's samples per class, indexed by QualityClass.
  std::array<double, 3> class_fractions{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  /// Degradation band per class, indexed by QualityClass.
  std::array<DegradationBand, 3> bands = default_bands();
  /// When false the manifest leaves quality_class empty.
  bool write_labels = true;

  static std::array<DegradationBand, 3> default_bands();
  void validate() const;
};

CorpusSpec parse_corpus_spec(std::string_view json_text);
CorpusSpec load_corpus_spec(const std::filesystem::path& path);
std::string format_corpus_spec(const CorpusSpec& spec);

struct CorpusEntry {
  SampleRecord record;
  SynthParams params;
};

/// Record metadata and generator parameters for every sample, in manifest
/// order, without rendering anything.
std::vector<CorpusEntry> plan_corpus(const CorpusSpec& spec);

/// Renders the corpus into out_dir (PNG images plus manifest.csv) and
/// returns the manifest as written.
DatasetManifest generate_corpus(const CorpusSpec& spec, const std::filesystem::path& out_dir,
                                int jobs = 1);

/// In-memory variant: the 8-bit quantized images that generate_corpus would
/// write, in plan order.
std::vector<GrayImage> render_corpus(const std::vector<CorpusEntry>& plan, int jobs = 1);

}  // namespace veinqa
