#include "veinqa/evaluation.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "veinqa/csv.hpp"
#include "veinqa/errors.hpp"

namespace veinqa {

void ScoreSet::canonicalize() {
  auto by_key = [](const ScoredComparison& a, const ScoredComparison& b) {
    if (a.key_a != b.key_a) return a.key_a < b.key_a;
    return a.key_b < b.key_b;
  };
  std::sort(genuine.begin(), genuine.end(), by_key);
  std::sort(impostor.begin(), impostor.end(), by_key);
}

// ---------------------------------------------------------------------------
// Rates

namespace {

std::vector<double> sorted_finite(std::span<const double> v, std::string_view what) {
  if (v.empty()) fail(ErrorKind::Input, std::string(what) + " score list is empty");
  std::vector<double> out(v.begin(), v.end());
  for (double s : out) {
    if (!std::isfinite(s)) fail(ErrorKind::Input, std::string(what) + " scores must be finite");
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

RateReport compute_rates(std::span<const double> genuine, std::span<const double> impostor) {
  const auto gen = sorted_finite(genuine, "genuine");
  const auto imp = sorted_finite(impostor, "impostor");
  const auto ng = static_cast<double>(gen.size());
  const auto ni = static_cast<double>(imp.size());

  std::vector<double> thresholds;
  thresholds.reserve(gen.size() + imp.size() + 1);
  std::merge(gen.begin(), gen.end(), imp.begin(), imp.end(), std::back_inserter(thresholds));
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());

  RateReport r;
  r.n_genuine = gen.size();
  r.n_impostor = imp.size();
  bool have_eer = false;
  bool have_fmr1000 = false;
  bool have_zero = false;
  double best_gap = 0.0;
  std::size_t gi = 0;  // genuine scores < t
  std::size_t ii = 0;  // impostor scores < t
  for (double t : thresholds) {
    while (gi < gen.size() && gen[gi] < t) ++gi;
    while (ii < imp.size() && imp[ii] < t) ++ii;
    const double fnmr = static_cast<double>(gi) / ng;
    const double fmr = static_cast<double>(imp.size() - ii) / ni;
    const double gap = std::abs(fmr - fnmr);
    if (!have_eer || gap < best_gap) {
      best_gap = gap;
      r.eer = (fmr + fnmr) / 2.0;
      r.eer_threshold = t;
      have_eer = true;
    }
    if (!have_fmr1000 && fmr <= 0.001) {
      r.fmr1000 = fnmr;
      have_fmr1000 = true;
    }
    if (!have_zero && fmr == 0.0) {
      r.zerofmr = fnmr;
      have_zero = true;
    }
  }
  return r;
}

RateReport compute_rates(const ScoreSet& scores) {
  std::vector<double> g;
  std::vector<double> i;
  g.reserve(scores.genuine.size());
  i.reserve(scores.impostor.size());
  for (const auto& c : scores.genuine) g.push_back(c.score);
  for (const auto& c : scores.impostor) i.push_back(c.score);
  return compute_rates(g, i);
}

// ---------------------------------------------------------------------------
// Rejection

std::vector<std::size_t> rejection_order(std::span<const SampleRecord> records,
                                         std::span<const double> quality, bool lower_is_better) {
  if (records.size() != quality.size()) {
    fail(ErrorKind::Input, "every record needs exactly one quality score");
  }
  for (double q : quality) {
    if (!std::isfinite(q)) fail(ErrorKind::Input, "quality scores must be finite");
  }
  std::vector<std::string> keys(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) keys[i] = records[i].key();
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (quality[a] != quality[b]) {
      return lower_is_better ? quality[a] > quality[b] : quality[a] < quality[b];
    }
    return keys[a] < keys[b];
  });
  return order;
}

RejectionCurve rejection_curve(std::span<const SampleRecord> records, std::span<const double> quality,
                               bool lower_is_better, const ScoreSetBuilder& builder) {
  if (records.size() < static_cast<std::size_t>(kRejectionDivisions)) {
    fail(ErrorKind::Input, "a rejection curve needs at least 20 records");
  }
  const auto order = rejection_order(records, quality, lower_is_better);
  const std::size_t n = records.size();
  RejectionCurve curve;
  for (int step = 0; step <= kRejectionSteps; ++step) {
    RejectionStep s;
    s.reject_fraction = static_cast<double>(step) / kRejectionDivisions;
    s.n_rejected = static_cast<std::size_t>(step) * n / kRejectionDivisions;
    s.n_remaining = n - s.n_rejected;

    std::vector<bool> dropped(n, false);
    for (std::size_t i = 0; i < s.n_rejected; ++i) dropped[order[i]] = true;
    std::vector<SampleRecord> survivors;
    std::set<std::string> subjects;
    for (std::size_t i = 0; i < n; ++i) {
      if (dropped[i]) continue;
      survivors.push_back(records[i]);
      subjects.insert(records[i].subject_key());
    }
    if (subjects.size() < 2) {
      s.valid = false;
    } else {
      const ScoreSet scores = builder(survivors);
      if (scores.genuine.empty() || scores.impostor.empty()) {
        s.valid = false;
      } else {
        s.rates = compute_rates(scores);
      }
    }
    curve.steps.push_back(s);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Class statistics

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) fail(ErrorKind::Input, "quantile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

ClassStats class_stats(std::span<const SampleRecord> records, std::span<const double> scores,
                       std::string_view metric_id) {
  if (records.size() != scores.size()) fail(ErrorKind::Input, "every record needs exactly one score");
  std::map<std::string, std::array<std::vector<double>, 3>> cells;
  std::size_t unlabeled = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& row = cells[records[i].dataset_id];
    if (!records[i].quality_class) {
      ++unlabeled;
      continue;
    }
    if (!std::isfinite(scores[i])) {
      fail(ErrorKind::Input, "non-finite score for " + records[i].image_path);
    }
    row[static_cast<int>(*records[i].quality_class)].push_back(scores[i]);
  }
  ClassStats out;
  if (unlabeled > 0) out.warnings.push_back(std::to_string(unlabeled) + " unlabeled records ignored");
  for (auto& [dataset, row] : cells) {
    for (int c = 0; c < 3; ++c) {
      const auto cls = static_cast<QualityClass>(c);
      std::vector<double>& v = row[c];
      if (v.empty()) {
        out.warnings.push_back("dataset " + dataset + " has no " + std::string(to_string(cls)) +
                               " scores; class omitted");
        continue;
      }
      ClassBox b;
      b.dataset_id = dataset;
      b.quality_class = cls;
      b.metric_id = std::string(metric_id);
      b.count = v.size();
      double sum = 0.0;
      for (double x : v) sum += x;
      b.mean = sum / static_cast<double>(v.size());
      std::sort(v.begin(), v.end());
      b.min = v.front();
      b.max = v.back();
      b.q1 = quantile_sorted(v, 0.25);
      b.median = quantile_sorted(v, 0.5);
      b.q3 = quantile_sorted(v, 0.75);
      out.boxes.push_back(b);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report tables

ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::Csv;
  if (text == "json") return ReportFormat::Json;
  fail(ErrorKind::Usage, "unknown report format '" + std::string(text) + "'");
}

ReportFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".json" ? ReportFormat::Json : ReportFormat::Csv;
}

std::vector<CurveRow> curve_rows(const RejectionCurve& curve, std::string_view metric_id,
                                 std::string_view feature_type) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<CurveRow> rows;
  for (const auto& s : curve.steps) {
    CurveRow r;
    r.metric_id = std::string(metric_id);
    r.feature_type = std::string(feature_type);
    r.reject_fraction = s.reject_fraction;
    r.n_remaining = s.n_remaining;
    r.valid = s.valid;
    r.eer = s.valid ? s.rates.eer : nan;
    r.fmr1000 = s.valid ? s.rates.fmr1000 : nan;
    r.zerofmr = s.valid ? s.rates.zerofmr : nan;
    rows.push_back(r);
  }
  return rows;
}

std::vector<StatsRow> stats_rows(const ClassStats& stats) {
  std::vector<StatsRow> rows;
  for (const auto& b : stats.boxes) {
    rows.push_back({b.dataset_id, std::string(to_string(b.quality_class)), b.metric_id, b.min, b.q1,
                    b.median, b.q3, b.max, b.mean});
  }
  return rows;
}

BaselineRow baseline_row(const RateReport& rates, std::string_view dataset_id,
                         std::string_view feature_type) {
  return {std::string(dataset_id), std::string(feature_type), rates.eer, rates.eer_threshold,
          rates.fmr1000, rates.zerofmr, rates.n_genuine, rates.n_impostor};
}

namespace {

using Json = nlohmann::ordered_json;

// Column descriptions shared by the CSV and JSON codecs. Reals that are not
// finite are written as strings in JSON, since JSON has no NaN/Inf literals.
enum class Kind { Text, Real, Count, Flag };

std::string format_bool(bool b) { return b ? "true" : "false"; }

bool parse_bool(std::string_view t) {
  if (t == "true" || t == "1") return true;
  if (t == "false" || t == "0") return false;
  fail(ErrorKind::Parse, "not a boolean: '" + std::string(t) + "'");
}

std::size_t parse_count(std::string_view t) {
  std::size_t v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) {
    fail(ErrorKind::Parse, "not a count: '" + std::string(t) + "'");
  }
  return v;
}

template <typename Row>
struct Field {
  std::string_view name;
  Kind kind;
  std::string Row::*text = nullptr;
  double Row::*real = nullptr;
  std::size_t Row::*count = nullptr;
  bool Row::*flag = nullptr;
};

template <typename Row>
Field<Row> text(std::string_view n, std::string Row::*m) { return {n, Kind::Text, m}; }
template <typename Row>
Field<Row> real(std::string_view n, double Row::*m) { return {n, Kind::Real, nullptr, m}; }
template <typename Row>
Field<Row> count(std::string_view n, std::size_t Row::*m) {
  return {n, Kind::Count, nullptr, nullptr, m};
}
template <typename Row>
Field<Row> flag(std::string_view n, bool Row::*m) { return {n, Kind::Flag, nullptr, nullptr, nullptr, m}; }

template <typename Row>
const std::vector<Field<Row>>& schema();

template <>
const std::vector<Field<ScoreRow>>& schema<ScoreRow>() {
  static const std::vector<Field<ScoreRow>> s = {
      text("image_path", &ScoreRow::image_path), text("metric_id", &ScoreRow::metric_id),
      real("value", &ScoreRow::value), flag("lower_is_better", &ScoreRow::lower_is_better)};
  return s;
}

template <>
const std::vector<Field<CurveRow>>& schema<CurveRow>() {
  static const std::vector<Field<CurveRow>> s = {
      text("metric_id", &CurveRow::metric_id),     text("feature_type", &CurveRow::feature_type),
      real("reject_fraction", &CurveRow::reject_fraction), count("n_remaining", &CurveRow::n_remaining),
      real("eer", &CurveRow::eer),                 real("fmr1000", &CurveRow::fmr1000),
      real("zerofmr", &CurveRow::zerofmr),         flag("valid", &CurveRow::valid)};
  return s;
}

template <>
const std::vector<Field<StatsRow>>& schema<StatsRow>() {
  static const std::vector<Field<StatsRow>> s = {
      text("dataset_id", &StatsRow::dataset_id), text("quality_class", &StatsRow::quality_class),
      text("metric_id", &StatsRow::metric_id),   real("min", &StatsRow::min),
      real("q1", &StatsRow::q1),                 real("median", &StatsRow::median),
      real("q3", &StatsRow::q3),                 real("max", &StatsRow::max),
      real("mean", &StatsRow::mean)};
  return s;
}

template <>
const std::vector<Field<BaselineRow>>& schema<BaselineRow>() {
  static const std::vector<Field<BaselineRow>> s = {
      text("dataset_id", &BaselineRow::dataset_id), text("feature_type", &BaselineRow::feature_type),
      real("eer", &BaselineRow::eer),               real("eer_threshold", &BaselineRow::eer_threshold),
      real("fmr1000", &BaselineRow::fmr1000),       real("zerofmr", &BaselineRow::zerofmr),
      count("n_genuine", &BaselineRow::n_genuine),  count("n_impostor", &BaselineRow::n_impostor)};
  return s;
}

template <typename Row>
std::string cell_text(const Field<Row>& f, const Row& r) {
  switch (f.kind) {
    case Kind::Text: return r.*(f.text);
    case Kind::Real: return csv::format_real(r.*(f.real));
    case Kind::Count: return std::to_string(r.*(f.count));
    case Kind::Flag: return format_bool(r.*(f.flag));
  }
  return {};
}

template <typename Row>
void set_cell(const Field<Row>& f, Row& r, std::string_view t) {
  switch (f.kind) {
    case Kind::Text: r.*(f.text) = std::string(t); break;
    case Kind::Real: r.*(f.real) = csv::parse_real(t); break;
    case Kind::Count: r.*(f.count) = parse_count(t); break;
    case Kind::Flag: r.*(f.flag) = parse_bool(t); break;
  }
}

template <typename Row>
std::string header_of() {
  std::string h;
  for (const auto& f : schema<Row>()) {
    if (!h.empty()) h += ',';
    h += f.name;
  }
  return h;
}

template <typename Row>
std::string format_table(std::span<const Row> rows, ReportFormat format) {
  const auto& fields = schema<Row>();
  if (format == ReportFormat::Csv) {
    std::string out = header_of<Row>() + "\n";
    for (const Row& r : rows) {
      std::vector<std::string> cells;
      for (const auto& f : fields) cells.push_back(cell_text(f, r));
      out += csv::join(cells) + "\n";
    }
    return out;
  }
  Json arr = Json::array();
  for (const Row& r : rows) {
    Json obj = Json::object();
    for (const auto& f : fields) {
      const std::string key(f.name);
      switch (f.kind) {
        case Kind::Text: obj[key] = r.*(f.text); break;
        case Kind::Real: {
          const double v = r.*(f.real);
          if (std::isfinite(v)) {
            obj[key] = v;
          } else {
            obj[key] = csv::format_real(v);
          }
          break;
        }
        case Kind::Count: obj[key] = r.*(f.count); break;
        case Kind::Flag: obj[key] = r.*(f.flag); break;
      }
    }
    arr.push_back(std::move(obj));
  }
  return arr.dump(2) + "\n";
}

template <typename Row>
std::vector<Row> parse_table(std::string_view text, ReportFormat format) {
  const auto& fields = schema<Row>();
  std::vector<Row> rows;
  if (format == ReportFormat::Csv) {
    const auto parsed = csv::parse(text);
    if (parsed.empty() || csv::join(parsed.front().fields) != header_of<Row>()) {
      fail(ErrorKind::Parse, "expected header '" + header_of<Row>() + "'");
    }
    for (std::size_t i = 1; i < parsed.size(); ++i) {
      const auto& p = parsed[i];
      if (p.fields.size() != fields.size()) {
        fail(ErrorKind::Parse, "line " + std::to_string(p.line) + ": expected " +
                                   std::to_string(fields.size()) + " fields");
      }
      Row r;
      try {
        for (std::size_t c = 0; c < fields.size(); ++c) set_cell(fields[c], r, p.fields[c]);
      } catch (const Error& e) {
        fail(ErrorKind::Parse, "line " + std::to_string(p.line) + ": " + e.what());
      }
      rows.push_back(std::move(r));
    }
    return rows;
  }
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::Parse, std::string("invalid JSON report: ") + e.what());
  }
  if (!doc.is_array()) fail(ErrorKind::Parse, "JSON report must be an array");
  for (const auto& obj : doc) {
    Row r;
    try {
      for (const auto& f : fields) {
        const auto& v = obj.at(std::string(f.name));
        switch (f.kind) {
          case Kind::Text: r.*(f.text) = v.get<std::string>(); break;
          case Kind::Real:
            r.*(f.real) = v.is_string() ? csv::parse_real(v.get<std::string>()) : v.get<double>();
            break;
          case Kind::Count: r.*(f.count) = v.get<std::size_t>(); break;
          case Kind::Flag: r.*(f.flag) = v.get<bool>(); break;
        }
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::Parse, std::string("malformed JSON report row: ") + e.what());
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

std::string format_report(std::span<const ScoreRow> rows, ReportFormat f) { return format_table(rows, f); }
std::string format_report(std::span<const CurveRow> rows, ReportFormat f) { return format_table(rows, f); }
std::string format_report(std::span<const StatsRow> rows, ReportFormat f) { return format_table(rows, f); }
std::string format_report(std::span<const BaselineRow> rows, ReportFormat f) { return format_table(rows, f); }

std::vector<ScoreRow> parse_score_report(std::string_view t, ReportFormat f) {
  return parse_table<ScoreRow>(t, f);
}
std::vector<CurveRow> parse_curve_report(std::string_view t, ReportFormat f) {
  return parse_table<CurveRow>(t, f);
}
std::vector<StatsRow> parse_stats_report(std::string_view t, ReportFormat f) {
  return parse_table<StatsRow>(t, f);
}
std::vector<BaselineRow> parse_baseline_report(std::string_view t, ReportFormat f) {
  return parse_table<BaselineRow>(t, f);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

template <typename Row>
void emit_report(std::span<const Row> rows, const std::filesystem::path& path, ReportFormat format) {
  write_text_file(path, format_report(rows, format));
}

template void emit_report<ScoreRow>(std::span<const ScoreRow>, const std::filesystem::path&, ReportFormat);
template void emit_report<CurveRow>(std::span<const CurveRow>, const std::filesystem::path&, ReportFormat);
template void emit_report<StatsRow>(std::span<const StatsRow>, const std::filesystem::path&, ReportFormat);
template void emit_report<BaselineRow>(std::span<const BaselineRow>, const std::filesystem::path&,
                                       ReportFormat);

}  // namespace veinqa
