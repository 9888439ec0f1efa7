#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "veinqa/dataset.hpp"
#include "veinqa/scores.hpp"

namespace veinqa {

// --- Error rates -------------------------------------------------------------

/// Verification error rates of one score set. A comparison is accepted when
/// its score is >= the threshold.
struct RateReport {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double fmr1000 = 0.0;
  double zerofmr = 0.0;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;

  friend bool operator==(const RateReport&, const RateReport&) = default;
};

/// Thresholds considered are every distinct observed score plus +infinity.
/// The EER is the FMR/FNMR midpoint at the threshold minimising |FMR - FNMR|
/// (lowest such threshold). FMR1000 and ZeroFMR report the FNMR at the
/// lowest threshold whose FMR is <= 0.001 or exactly 0, i.e. the best FNMR
/// the constraint allows.
RateReport compute_rates(std::span<const double> genuine, std::span<const double> impostor);
RateReport compute_rates(const ScoreSet& scores);

// --- Rejection curves --------------------------------------------------------

struct RejectionStep {
  double reject_fraction = 0.0;
  std::size_t n_rejected = 0;
  std::size_t n_remaining = 0;
  /// False when the survivors no longer support a verification experiment
  /// (fewer than 2 subjects, or no genuine or impostor comparison left).
  bool valid = true;
  RateReport rates;
};

struct RejectionCurve {
  std::vector<RejectionStep> steps;
};

/// Builds the comparison scores over a subset of records.
using ScoreSetBuilder = std::function<ScoreSet(std::span<const SampleRecord>)>;

inline constexpr int kRejectionSteps = 10;     // 5% .. 50%
inline constexpr int kRejectionDivisions = 20;

/// Step i (0..10) drops the floor(i*N/20) worst-quality records, ties broken
/// by record key, and recomputes the rates over the survivors.
RejectionCurve rejection_curve(std::span<const SampleRecord> records, std::span<const double> quality,
                               bool lower_is_better, const ScoreSetBuilder& builder);

/// Records ordered worst quality first (the rejection order).
std::vector<std::size_t> rejection_order(std::span<const SampleRecord> records,
                                         std::span<const double> quality, bool lower_is_better);

// --- Per-class statistics ----------------------------------------------------

struct ClassBox {
  std::string dataset_id;
  QualityClass quality_class = QualityClass::Poor;
  std::string metric_id;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
  std::size_t count = 0;
};

struct ClassStats {
  /// Ordered by dataset id, then Poor < Middle < Good.
  std::vector<ClassBox> boxes;
  std::vector<std::string> warnings;
};

/// Linear-interpolation quantile of sorted data (p in [0,1]).
double quantile_sorted(std::span<const double> sorted, double p);

/// Unlabeled records are ignored with a warning; a (dataset, class) cell
/// with no scores is omitted with a warning.
ClassStats class_stats(std::span<const SampleRecord> records, std::span<const double> scores,
                       std::string_view metric_id);

// --- Report tables -----------------------------------------------------------

enum class ReportFormat { Csv, Json };

ReportFormat parse_report_format(std::string_view text);
/// Picks JSON for a ".json" extension, CSV otherwise.
ReportFormat format_for_path(const std::filesystem::path& path);

struct ScoreRow {
  std::string image_path;
  std::string metric_id;
  double value = 0.0;
  bool lower_is_better = true;

  friend bool operator==(const ScoreRow&, const ScoreRow&) = default;
};

struct CurveRow {
  std::string metric_id;
  std::string feature_type;
  double reject_fraction = 0.0;
  std::size_t n_remaining = 0;
  double eer = 0.0;
  double fmr1000 = 0.0;
  double zerofmr = 0.0;
  bool valid = true;
};

struct StatsRow {
  std::string dataset_id;
  std::string quality_class;
  std::string metric_id;
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
  double mean = 0.0;
};

struct BaselineRow {
  std::string dataset_id;
  std::string feature_type;
  double eer = 0.0;
  double eer_threshold = 0.0;
  double fmr1000 = 0.0;
  double zerofmr = 0.0;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;
};

inline constexpr std::string_view kScoreHeader = "image_path,metric_id,value,lower_is_better";
inline constexpr std::string_view kCurveHeader =
    "metric_id,feature_type,reject_fraction,n_remaining,eer,fmr1000,zerofmr,valid";
inline constexpr std::string_view kStatsHeader =
    "dataset_id,quality_class,metric_id,min,q1,median,q3,max,mean";
inline constexpr std::string_view kBaselineHeader =
    "dataset_id,feature_type,eer,eer_threshold,fmr1000,zerofmr,n_genuine,n_impostor";

std::vector<CurveRow> curve_rows(const RejectionCurve& curve, std::string_view metric_id,
                                 std::string_view feature_type);
std::vector<StatsRow> stats_rows(const ClassStats& stats);
BaselineRow baseline_row(const RateReport& rates, std::string_view dataset_id,
                         std::string_view feature_type);

std::string format_report(std::span<const ScoreRow> rows, ReportFormat format);
std::string format_report(std::span<const CurveRow> rows, ReportFormat format);
std::string format_report(std::span<const StatsRow> rows, ReportFormat format);
std::string format_report(std::span<const BaselineRow> rows, ReportFormat format);

std::vector<ScoreRow> parse_score_report(std::string_view text, ReportFormat format);
std::vector<CurveRow> parse_curve_report(std::string_view text, ReportFormat format);
std::vector<StatsRow> parse_stats_report(std::string_view text, ReportFormat format);
std::vector<BaselineRow> parse_baseline_report(std::string_view text, ReportFormat format);

/// Writes the formatted table; I/O failures name the path.
template <typename Row>
void emit_report(std::span<const Row> rows, const std::filesystem::path& path, ReportFormat format);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace veinqa
