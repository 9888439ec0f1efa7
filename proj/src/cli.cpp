#include "veinqa/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "veinqa/classic_metrics.hpp"
#include "veinqa/csv.hpp"
#include "veinqa/dataset.hpp"
#include "veinqa/errors.hpp"
#include "veinqa/evaluation.hpp"
#include "veinqa/parallel.hpp"
#include "veinqa/png_io.hpp"
#include "veinqa/preprocess.hpp"
#include "veinqa/quality_models.hpp"
#include "veinqa/recognition.hpp"
#include "veinqa/synthgen.hpp"

namespace veinqa {

namespace {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Option groups shared by several subcommands

struct InputOptions {
  std::string manifest;
  std::string trait = "finger-palmar";
  std::string roi = "none";
  double roi_fraction = RoiConfig{}.fraction;
  double roi_grad_threshold = RoiConfig{}.grad_threshold;
  int jobs = 1;

  RoiConfig roi_config() const {
    RoiConfig c;
    c.mode = parse_roi_mode(roi);
    c.fraction = roi_fraction;
    c.grad_threshold = roi_grad_threshold;
    return c;
  }

  DatasetManifest load() const {
    if (manifest.empty()) fail(ErrorKind::Usage, "--manifest is required");
    return load_manifest(manifest, parse_trait_group(trait));
  }
};

void add_input_options(CLI::App* cmd, InputOptions& o, bool manifest_required = true) {
  auto* m = cmd->add_option("--manifest", o.manifest, "Dataset manifest CSV");
  if (manifest_required) m->required();
  cmd->add_option("--trait", o.trait, "Trait group: finger-dorsal, finger-palmar or hand")
      ->capture_default_str();
  cmd->add_option("--roi", o.roi, "Region of interest: none, fixed or finger")->capture_default_str();
  cmd->add_option("--roi-fraction", o.roi_fraction, "Side fraction kept by --roi fixed")
      ->capture_default_str();
  cmd->add_option("--roi-grad-threshold", o.roi_grad_threshold,
                  "Minimum boundary gradient for --roi finger")
      ->capture_default_str();
  cmd->add_option("--jobs", o.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

struct FeatureOptions {
  std::string feature = "mc";
  double mc_sigma = McConfig{}.sigma;
  double gabor_wavelength = GaborConfig{}.wavelength;
  double gabor_sigma = GaborConfig{}.sigma;
  int shift_x = VerifyConfig{}.max_shift_x;
  int shift_y = VerifyConfig{}.max_shift_y;

  std::vector<FeatureType> types() const {
    if (feature == "all") return {FeatureType::MaximumCurvature, FeatureType::Gabor};
    return {parse_feature_type(feature)};
  }

  FeatureConfig config(FeatureType t) const {
    FeatureConfig c;
    c.type = t;
    c.mc.sigma = mc_sigma;
    c.gabor.wavelength = gabor_wavelength;
    c.gabor.sigma = gabor_sigma;
    return c;
  }
};

void add_feature_options(CLI::App* cmd, FeatureOptions& o, bool allow_all) {
  cmd->add_option("--feature", o.feature, allow_all ? "Feature type: mc, gabor or all" : "Feature type: mc or gabor")
      ->capture_default_str();
  cmd->add_option("--mc-sigma", o.mc_sigma, "Maximum Curvature smoothing sigma")->capture_default_str();
  cmd->add_option("--gabor-wavelength", o.gabor_wavelength, "Gabor wavelength in px")->capture_default_str();
  cmd->add_option("--gabor-sigma", o.gabor_sigma, "Gabor envelope sigma in px")->capture_default_str();
  cmd->add_option("--shift-x", o.shift_x, "Matcher horizontal shift budget")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--shift-y", o.shift_y, "Matcher vertical shift budget")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
}

struct ProtocolOptions {
  std::string protocol = "all";
  std::string held_out;
  int k = 10;
  int fold = 0;
  std::uint64_t seed = 1;
};

void add_protocol_options(CLI::App* cmd, ProtocolOptions& o) {
  cmd->add_option("--protocol", o.protocol, "Training records: all, lodo or kfold")->capture_default_str();
  cmd->add_option("--held-out", o.held_out, "Dataset excluded from training (lodo)");
  cmd->add_option("--k", o.k, "Number of folds (kfold)")->capture_default_str();
  cmd->add_option("--fold", o.fold, "Fold whose training part is used (kfold, 0-based)")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Fold shuffling seed (kfold)")->capture_default_str();
}

std::vector<SampleRecord> training_records(const DatasetManifest& m, const ProtocolOptions& o) {
  if (o.protocol == "all") return m.records();
  if (o.protocol == "lodo") {
    if (o.held_out.empty()) fail(ErrorKind::Usage, "--protocol lodo needs --held-out");
    return make_lodo_split(m, o.held_out).train;
  }
  if (o.protocol == "kfold") {
    const auto splits = make_kfold_splits(m, o.k, o.seed);
    if (o.fold < 0 || o.fold >= o.k) fail(ErrorKind::Usage, "--fold must lie in [0, k)");
    return splits[static_cast<std::size_t>(o.fold)].train;
  }
  fail(ErrorKind::Usage, "unknown protocol '" + o.protocol + "'");
}

// ---------------------------------------------------------------------------
// Output helpers

void emit_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    write_text_file(path, text);
  }
}

ReportFormat choose_format(const std::string& path, const std::string& format) {
  if (!format.empty()) return parse_report_format(format);
  if (path.empty() || path == "-") return ReportFormat::Csv;
  return format_for_path(path);
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

void warn(std::ostream& err, const std::string& message) {
  err << "veinqa: warning: " << one_line(message) << "\n";
}

GrayImage load_sample(const fs::path& path, const RoiConfig& roi) {
  return extract_roi(load_gray_image(path), roi);
}

std::vector<SampleRecord> filter_dataset(const DatasetManifest& m, const std::string& dataset) {
  std::vector<SampleRecord> out;
  for (const auto& r : m.records()) {
    if (dataset.empty() || r.dataset_id == dataset) out.push_back(r);
  }
  if (out.empty()) fail(ErrorKind::NotFound, "dataset '" + dataset + "' not in manifest");
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

struct Metric {
  std::string id;
  bool lower_is_better = false;
  std::function<double(const GrayImage&)> score;
};

std::vector<Metric> resolve_metrics(const std::vector<std::string>& requested,
                                    const std::string& niqe_path, const std::string& brisque_path) {
  std::vector<std::string> ids;
  for (const auto& item : requested) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty()) ids.push_back(part);
    }
  }
  if (ids.empty()) ids.push_back("all");

  std::optional<NiqeModel> niqe;
  std::optional<BrisqueModel> brisque;
  if (!niqe_path.empty()) {
    auto m = load_model(niqe_path);
    if (!std::holds_alternative<NiqeModel>(m)) fail(ErrorKind::IncompatibleModel, niqe_path + " is not a NIQE model");
    niqe = std::get<NiqeModel>(std::move(m));
  }
  if (!brisque_path.empty()) {
    auto m = load_model(brisque_path);
    if (!std::holds_alternative<BrisqueModel>(m)) {
      fail(ErrorKind::IncompatibleModel, brisque_path + " is not a BRISQUE model");
    }
    brisque = std::get<BrisqueModel>(std::move(m));
  }

  std::vector<std::string> expanded;
  for (const auto& id : ids) {
    if (id == "all") {
      for (ClassicMetric c : kClassicMetrics) expanded.emplace_back(metric_name(c));
      if (niqe) expanded.emplace_back("niqe");
      if (brisque) expanded.emplace_back("brisque");
    } else {
      expanded.push_back(id);
    }
  }
  std::vector<Metric> out;
  std::set<std::string> seen;
  for (const auto& id : expanded) {
    if (!seen.insert(id).second) continue;
    if (id == "niqe") {
      if (!niqe) fail(ErrorKind::Usage, "metric niqe needs --niqe-model");
      const NiqeModel model = *niqe;
      out.push_back({id, true, [model](const GrayImage& g) { return score_niqe(model, g).value; }});
    } else if (id == "brisque") {
      if (!brisque) fail(ErrorKind::Usage, "metric brisque needs --brisque-model");
      const BrisqueModel model = *brisque;
      out.push_back({id, true, [model](const GrayImage& g) { return score_brisque(model, g).value; }});
    } else {
      const ClassicMetric c = parse_classic_metric(id);
      out.push_back({id, false, [c](const GrayImage& g) { return classic_score(c, g).value; }});
    }
  }
  return out;
}

std::vector<ScoreRow> score_records(const DatasetManifest& m, std::span<const SampleRecord> records,
                                    const std::vector<Metric>& metrics, const InputOptions& in) {
  const RoiConfig roi = in.roi_config();
  const auto values = parallel_map(records.size(), in.jobs, [&](std::size_t i) {
    const auto path = m.resolve(records[i]);
    try {
      const GrayImage img = load_sample(path, roi);
      std::vector<double> v;
      for (const auto& metric : metrics) v.push_back(metric.score(img));
      return v;
    } catch (const Error& e) {
      fail(e.kind(), records[i].image_path + ": " + e.what());
    }
  });
  std::vector<ScoreRow> rows;
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t k = 0; k < metrics.size(); ++k) {
      rows.push_back({records[i].image_path, metrics[k].id, values[i][k], metrics[k].lower_is_better});
    }
  }
  return rows;
}

struct QualityColumn {
  std::vector<double> values;
  bool lower_is_better = true;
};

QualityColumn quality_from_rows(std::span<const ScoreRow> rows, const std::string& metric,
                                std::span<const SampleRecord> records) {
  std::map<std::string, const ScoreRow*> by_path;
  for (const auto& r : rows) {
    if (r.metric_id == metric) by_path[r.image_path] = &r;
  }
  QualityColumn q;
  bool first = true;
  for (const auto& rec : records) {
    const auto it = by_path.find(rec.image_path);
    if (it == by_path.end()) {
      fail(ErrorKind::Input, "no " + metric + " score for " + rec.image_path);
    }
    q.values.push_back(it->second->value);
    if (first) q.lower_is_better = it->second->lower_is_better;
    first = false;
  }
  return q;
}

// ---------------------------------------------------------------------------
// Templates

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_tag(const FeatureConfig& f, const RoiConfig& roi) {
  std::string tag = std::string(to_string(f.type)) + "|" + std::string(to_string(roi.mode)) + "|" +
                    csv::format_real(roi.fraction) + "|" + csv::format_real(roi.grad_threshold);
  if (f.type == FeatureType::MaximumCurvature) {
    tag += "|" + csv::format_real(f.mc.sigma);
  } else {
    const auto& g = f.gabor;
    tag += "|" + csv::format_real(g.wavelength) + "|" + csv::format_real(g.sigma) + "|" +
           csv::format_real(g.aspect) + "|" + std::to_string(g.orientations) + "|" +
           csv::format_real(g.threshold_k) + "|" + std::to_string(g.min_component);
  }
  return tag;
}

std::optional<fs::path> cache_dir() {
  const char* env = std::getenv("VEINQA_CACHE");
  if (env == nullptr || *env == '\0') return std::nullopt;
  return fs::path(env);
}

std::vector<TemplateEntry> build_templates(const DatasetManifest& m, std::span<const SampleRecord> records,
                                           const FeatureConfig& feature, const InputOptions& in,
                                           std::ostream& err) {
  const RoiConfig roi = in.roi_config();
  const auto cache = cache_dir();
  if (cache) {
    std::error_code ec;
    fs::create_directories(*cache, ec);
    if (ec) fail(ErrorKind::Io, "cannot create template cache " + cache->string());
  }
  const std::string tag = config_tag(feature, roi);
  struct Result {
    std::optional<BinaryTemplate> tmpl;
    std::string problem;
  };
  const auto results = parallel_map(records.size(), in.jobs, [&](std::size_t i) {
    Result r;
    const auto path = m.resolve(records[i]);
    try {
      std::optional<fs::path> cached;
      if (cache) {
        char name[40];
        const std::uint64_t h = fnv1a(tag, fnv1a(read_text_file(path)));
        std::snprintf(name, sizeof name, "%016llx.vqt", static_cast<unsigned long long>(h));
        cached = *cache / name;
        if (fs::exists(*cached)) {
          r.tmpl = read_template(*cached);
          return r;
        }
      }
      r.tmpl = extract_features(load_sample(path, roi), feature);
      if (cached) {
        // Write to a private name first so concurrent runs never see a
        // partially written file.
        const fs::path tmp = cached->string() + ".tmp" + std::to_string(i);
        write_template(tmp, *r.tmpl);
        fs::rename(tmp, *cached);
      }
    } catch (const Error& e) {
      r.tmpl.reset();
      r.problem = e.what();
    }
    return r;
  });
  std::vector<TemplateEntry> entries;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!results[i].problem.empty()) {
      warn(err, "no template for " + records[i].image_path + ": " + results[i].problem);
    }
    entries.push_back({records[i], results[i].tmpl});
  }
  return entries;
}

VerifyConfig verify_config(const FeatureOptions& f, const InputOptions& in) {
  VerifyConfig v;
  v.max_shift_x = f.shift_x;
  v.max_shift_y = f.shift_y;
  v.jobs = in.jobs;
  return v;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_synth(const std::string& spec_path, const std::string& out_dir, int jobs, bool print_spec,
              std::ostream& out) {
  const CorpusSpec spec = spec_path.empty() ? CorpusSpec{} : load_corpus_spec(spec_path);
  if (print_spec) {
    out << format_corpus_spec(spec);
    return 0;
  }
  if (out_dir.empty()) fail(ErrorKind::Usage, "--out is required");
  const auto manifest = generate_corpus(spec, out_dir, jobs);
  out << "wrote " << manifest.size() << " images and " << (fs::path(out_dir) / "manifest.csv").string()
      << "\n";
  return 0;
}

struct ScoreOptions {
  InputOptions in;
  std::string image;
  std::vector<std::string> metrics;
  std::string niqe_model;
  std::string brisque_model;
  std::string out;
  std::string format;
};

int cmd_score(const ScoreOptions& o, std::ostream& out) {
  const auto metrics = resolve_metrics(o.metrics, o.niqe_model, o.brisque_model);
  std::vector<ScoreRow> rows;
  if (!o.image.empty()) {
    if (!o.in.manifest.empty()) fail(ErrorKind::Usage, "give either --image or --manifest");
    SampleRecord r;
    r.image_path = o.image;
    r.dataset_id = "-";
    r.subject_id = "-";
    r.finger_or_hand_id = "-";
    const DatasetManifest single({r}, parse_trait_group(o.in.trait));
    rows = score_records(single, single.records(), metrics, o.in);
  } else {
    const auto m = o.in.load();
    rows = score_records(m, m.records(), metrics, o.in);
  }
  emit_text(o.out, format_report(std::span<const ScoreRow>(rows), choose_format(o.out, o.format)), out);
  return 0;
}

struct TrainOptions {
  InputOptions in;
  ProtocolOptions protocol;
  std::string out;
  bool dry_run = false;
  std::string audit;
  // NIQE
  int patch = NiqeConfig{}.patch;
  double sharpness_quantile = NiqeConfig{}.sharpness_quantile;
  std::size_t min_images = NiqeConfig{}.min_images;
  std::size_t min_patches = NiqeConfig{}.min_patches;
  // BRISQUE
  double epsilon = BrisqueConfig{}.epsilon;
  double c = BrisqueConfig{}.c;
  std::size_t min_per_class = BrisqueConfig{}.min_per_class;
};

std::string format_audit(const LabelAudit& audit, std::span<const SampleRecord> records) {
  std::map<std::string, const SampleRecord*> by_key;
  for (const auto& r : records) by_key[r.key()] = &r;
  std::string text = "image_path,dataset_id,subject_id,finger_or_hand_id,session\n";
  for (const auto& k : audit.keys()) {
    const SampleRecord& r = *by_key.at(k);
    text += csv::join({r.image_path, r.dataset_id, r.subject_id, r.finger_or_hand_id,
                       std::to_string(r.session)}) +
            "\n";
  }
  return text;
}

std::vector<GrayImage> load_images(const DatasetManifest& m, std::span<const SampleRecord> records,
                                   const InputOptions& in) {
  const RoiConfig roi = in.roi_config();
  return parallel_map(records.size(), in.jobs, [&](std::size_t i) {
    try {
      return load_sample(m.resolve(records[i]), roi);
    } catch (const Error& e) {
      fail(e.kind(), records[i].image_path + ": " + e.what());
    }
  });
}

int cmd_train(bool niqe, const TrainOptions& o, std::ostream& out) {
  const auto m = o.in.load();
  const auto train = training_records(m, o.protocol);
  LabelAudit audit;
  const auto good = select_labeled(train, QualityClass::Good, &audit);
  std::vector<SampleRecord> poor;
  if (!niqe) poor = select_labeled(train, QualityClass::Poor, &audit);
  if (o.dry_run) {
    emit_text(o.audit, format_audit(audit, m.records()), out);
    return 0;
  }
  if (o.out.empty()) fail(ErrorKind::Usage, "--out is required");
  if (niqe) {
    NiqeConfig cfg;
    cfg.patch = o.patch;
    cfg.sharpness_quantile = o.sharpness_quantile;
    cfg.min_images = o.min_images;
    cfg.min_patches = o.min_patches;
    cfg.jobs = o.in.jobs;
    NiqeTrainReport report;
    const auto model = train_niqe(load_images(m, good, o.in), cfg, &report);
    save_model(model, o.out);
    out << "niqe model: " << report.images_used << " images, " << report.patches << " patches, "
        << report.images_without_patches << " images without sharp patches\n";
  } else {
    BrisqueConfig cfg;
    cfg.epsilon = o.epsilon;
    cfg.c = o.c;
    cfg.min_per_class = o.min_per_class;
    cfg.jobs = o.in.jobs;
    BrisqueTrainReport report;
    const auto model = train_brisque(load_images(m, good, o.in), load_images(m, poor, o.in), cfg, &report);
    save_model(model, o.out);
    out << "brisque model: " << good.size() << " good, " << poor.size() << " poor, " << report.epochs
        << " epochs, converged " << (report.converged ? "yes" : "no") << "\n";
  }
  return 0;
}

struct BaselineOptions {
  InputOptions in;
  FeatureOptions feature;
  std::string dataset;
  std::string out;
  std::string format;
};

int cmd_baseline(const BaselineOptions& o, std::ostream& out, std::ostream& err) {
  const auto m = o.in.load();
  std::vector<BaselineRow> rows;
  std::vector<std::string> datasets = o.dataset.empty() ? m.dataset_ids() : std::vector{o.dataset};
  for (const auto& ds : datasets) {
    const auto records = filter_dataset(m, ds);
    for (FeatureType t : o.feature.types()) {
      auto templates = build_templates(m, records, o.feature.config(t), o.in, err);
      VerifySummary summary;
      const ScoreSet scores = verify_all(templates, verify_config(o.feature, o.in), &summary);
      if (summary.skipped_records > 0) {
        warn(err, ds + ": " + std::to_string(summary.skipped_records) + " records skipped without template");
      }
      rows.push_back(baseline_row(compute_rates(scores), ds, to_string(t)));
    }
  }
  emit_text(o.out, format_report(std::span<const BaselineRow>(rows), choose_format(o.out, o.format)), out);
  return 0;
}

struct CurveOptions {
  InputOptions in;
  FeatureOptions feature;
  std::string dataset;
  std::string scores;
  std::vector<std::string> metrics;
  std::string niqe_model;
  std::string brisque_model;
  std::string out;
  std::string format;
};

int cmd_reject_curve(const CurveOptions& o, std::ostream& out, std::ostream& err) {
  const auto m = o.in.load();
  std::string dataset = o.dataset;
  if (dataset.empty()) {
    const auto ids = m.dataset_ids();
    if (ids.size() > 1) fail(ErrorKind::Usage, "manifest holds several datasets; choose one with --dataset");
    dataset = ids.front();
  }
  const auto records = filter_dataset(m, dataset);

  // Quality columns, either read from a score table or computed here.
  std::vector<std::pair<std::string, QualityColumn>> columns;
  if (!o.scores.empty()) {
    const auto rows = parse_score_report(read_text_file(o.scores), format_for_path(o.scores));
    std::vector<std::string> ids;
    for (const auto& item : o.metrics) {
      std::stringstream ss(item);
      std::string part;
      while (std::getline(ss, part, ',')) {
        if (!part.empty()) ids.push_back(part);
      }
    }
    if (ids.empty() || (ids.size() == 1 && ids[0] == "all")) {
      ids.clear();
      std::set<std::string> seen;
      for (const auto& r : rows) {
        if (seen.insert(r.metric_id).second) ids.push_back(r.metric_id);
      }
    }
    for (const auto& id : ids) columns.emplace_back(id, quality_from_rows(rows, id, records));
  } else {
    const auto metrics = resolve_metrics(o.metrics, o.niqe_model, o.brisque_model);
    const auto rows = score_records(m, records, metrics, o.in);
    for (const auto& metric : metrics) {
      columns.emplace_back(metric.id, quality_from_rows(rows, metric.id, records));
    }
  }

  std::vector<CurveRow> out_rows;
  for (FeatureType t : o.feature.types()) {
    ComparisonEngine engine(build_templates(m, records, o.feature.config(t), o.in, err),
                            verify_config(o.feature, o.in));
    const ScoreSetBuilder builder = [&](std::span<const SampleRecord> survivors) {
      return engine.build(survivors);
    };
    for (const auto& [id, col] : columns) {
      const auto curve = rejection_curve(records, col.values, col.lower_is_better, builder);
      const auto rows = curve_rows(curve, id, to_string(t));
      out_rows.insert(out_rows.end(), rows.begin(), rows.end());
    }
    if (engine.skipped_last() > 0) {
      warn(err, std::to_string(engine.skipped_last()) + " records skipped without template");
    }
  }
  emit_text(o.out, format_report(std::span<const CurveRow>(out_rows), choose_format(o.out, o.format)), out);
  return 0;
}

struct FoldsOptions {
  InputOptions in;
  std::string protocol = "kfold";
  int k = 10;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_folds(const FoldsOptions& o, std::ostream& out) {
  const auto m = o.in.load();
  std::vector<TrainEvalSplit> splits;
  if (o.protocol == "lodo") {
    for (const auto& ds : m.dataset_ids()) splits.push_back(make_lodo_split(m, ds));
  } else if (o.protocol == "kfold") {
    splits = make_kfold_splits(m, o.k, o.seed);
  } else {
    fail(ErrorKind::Usage, "unknown protocol '" + o.protocol + "'");
  }
  std::string text = "split,role,dataset_id,subject_id,finger_or_hand_id,session,image_path\n";
  for (const auto& s : splits) {
    for (const auto* part : {&s.train, &s.eval}) {
      const std::string role = part == &s.train ? "train" : "eval";
      for (const auto& r : *part) {
        text += csv::join({s.label, role, r.dataset_id, r.subject_id, r.finger_or_hand_id,
                           std::to_string(r.session), r.image_path}) +
                "\n";
      }
    }
  }
  emit_text(o.out, text, out);
  return 0;
}

struct StatsOptions {
  InputOptions in;
  std::string scores;
  std::vector<std::string> metrics;
  std::string out;
  std::string format;
};

int cmd_stats(const StatsOptions& o, std::ostream& out, std::ostream& err) {
  const auto m = o.in.load();
  const auto rows = parse_score_report(read_text_file(o.scores), format_for_path(o.scores));
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& item : o.metrics) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ',')) {
      if (!part.empty() && part != "all" && seen.insert(part).second) ids.push_back(part);
    }
  }
  if (ids.empty()) {
    for (const auto& r : rows) {
      if (seen.insert(r.metric_id).second) ids.push_back(r.metric_id);
    }
  }
  std::vector<StatsRow> out_rows;
  for (const auto& id : ids) {
    const auto col = quality_from_rows(rows, id, m.records());
    const auto stats = class_stats(m.records(), col.values, id);
    for (const auto& w : stats.warnings) warn(err, id + ": " + w);
    const auto r = stats_rows(stats);
    out_rows.insert(out_rows.end(), r.begin(), r.end());
  }
  emit_text(o.out, format_report(std::span<const StatsRow>(out_rows), choose_format(o.out, o.format)), out);
  return 0;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Vein image quality toolkit", "veinqa"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "veinqa 0.1.0");

  std::string synth_spec;
  std::string synth_out;
  int synth_jobs = 1;
  bool synth_print = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled vein corpus");
  synth->add_option("--spec", synth_spec, "Corpus spec JSON (defaults apply when omitted)");
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--jobs", synth_jobs, "Worker threads")->check(CLI::PositiveNumber);
  synth->add_flag("--print-spec", synth_print, "Print the effective spec and exit");

  ScoreOptions score_o;
  auto* score = app.add_subcommand("score", "Score images with quality metrics");
  add_input_options(score, score_o.in, false);
  score->add_option("--image", score_o.image, "Single image to score");
  score->add_option("--metric", score_o.metrics,
                    "Metrics (comma separated): gcf, entropy, radon, tnorm, wang, hsnr, niqe, brisque or all");
  score->add_option("--niqe-model", score_o.niqe_model, "Trained NIQE model");
  score->add_option("--brisque-model", score_o.brisque_model, "Trained BRISQUE model");
  score->add_option("--out", score_o.out, "Output file (stdout when omitted)");
  score->add_option("--format", score_o.format, "csv or json (default from extension)");

  TrainOptions niqe_o;
  auto* train_niqe_cmd = app.add_subcommand("train-niqe", "Fit a NIQE model on good-class images");
  add_input_options(train_niqe_cmd, niqe_o.in);
  add_protocol_options(train_niqe_cmd, niqe_o.protocol);
  train_niqe_cmd->add_option("--out", niqe_o.out, "Model file to write");
  train_niqe_cmd->add_option("--patch-size", niqe_o.patch, "Patch side in px")->capture_default_str();
  train_niqe_cmd->add_option("--sharpness-quantile", niqe_o.sharpness_quantile,
                             "Keep patches with sharpness >= q * max")
      ->capture_default_str();
  train_niqe_cmd->add_option("--min-images", niqe_o.min_images, "Minimum training images")
      ->capture_default_str();
  train_niqe_cmd->add_option("--min-patches", niqe_o.min_patches, "Minimum pooled patches")
      ->capture_default_str();
  train_niqe_cmd->add_flag("--dry-run", niqe_o.dry_run, "Only select training records and write the label audit");
  train_niqe_cmd->add_option("--audit", niqe_o.audit, "Label audit output for --dry-run (stdout when omitted)");

  TrainOptions brisque_o;
  auto* train_brisque_cmd = app.add_subcommand("train-brisque", "Fit a BRISQUE model on good and poor images");
  add_input_options(train_brisque_cmd, brisque_o.in);
  add_protocol_options(train_brisque_cmd, brisque_o.protocol);
  train_brisque_cmd->add_option("--out", brisque_o.out, "Model file to write");
  train_brisque_cmd->add_option("--epsilon", brisque_o.epsilon, "SVR insensitive-zone half width")
      ->capture_default_str();
  train_brisque_cmd->add_option("--c", brisque_o.c, "SVR box constraint")->capture_default_str();
  train_brisque_cmd->add_option("--min-per-class", brisque_o.min_per_class, "Minimum images per class")
      ->capture_default_str();
  train_brisque_cmd->add_flag("--dry-run", brisque_o.dry_run,
                              "Only select training records and write the label audit");
  train_brisque_cmd->add_option("--audit", brisque_o.audit,
                                "Label audit output for --dry-run (stdout when omitted)");

  BaselineOptions base_o;
  auto* baseline = app.add_subcommand("baseline", "Recognition error rates per dataset and feature");
  add_input_options(baseline, base_o.in);
  add_feature_options(baseline, base_o.feature, true);
  baseline->add_option("--dataset", base_o.dataset, "Restrict to one dataset");
  baseline->add_option("--out", base_o.out, "Output file (stdout when omitted)");
  baseline->add_option("--format", base_o.format, "csv or json (default from extension)");

  CurveOptions curve_o;
  auto* curve = app.add_subcommand("reject-curve", "Error rates while rejecting low-quality samples");
  add_input_options(curve, curve_o.in);
  add_feature_options(curve, curve_o.feature, true);
  curve->add_option("--dataset", curve_o.dataset, "Dataset to evaluate (needed when several)");
  curve->add_option("--scores", curve_o.scores, "Score table from `veinqa score`");
  curve->add_option("--metric", curve_o.metrics, "Quality metrics to rank by (comma separated)");
  curve->add_option("--niqe-model", curve_o.niqe_model, "NIQE model, when scoring here");
  curve->add_option("--brisque-model", curve_o.brisque_model, "BRISQUE model, when scoring here");
  curve->add_option("--out", curve_o.out, "Output file (stdout when omitted)");
  curve->add_option("--format", curve_o.format, "csv or json (default from extension)");

  FoldsOptions folds_o;
  auto* folds = app.add_subcommand("folds", "Write LODO or k-fold split assignments");
  add_input_options(folds, folds_o.in);
  folds->add_option("--protocol", folds_o.protocol, "lodo or kfold")->capture_default_str();
  folds->add_option("--k", folds_o.k, "Number of folds")->capture_default_str();
  folds->add_option("--seed", folds_o.seed, "Shuffling seed")->capture_default_str();
  folds->add_option("--out", folds_o.out, "Output file (stdout when omitted)");

  StatsOptions stats_o;
  auto* stats = app.add_subcommand("stats", "Per-class five-number summaries of quality scores");
  add_input_options(stats, stats_o.in);
  stats->add_option("--scores", stats_o.scores, "Score table from `veinqa score`")->required();
  stats->add_option("--metric", stats_o.metrics, "Metrics to summarise (default: all in the table)");
  stats->add_option("--out", stats_o.out, "Output file (stdout when omitted)");
  stats->add_option("--format", stats_o.format, "csv or json (default from extension)");

  std::vector<const char*> argv{"veinqa"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "veinqa: error[usage]: " << one_line(e.what()) << "\n";
    return 2;
  }

  if (*synth) return cmd_synth(synth_spec, synth_out, synth_jobs, synth_print, out);
  if (*score) {
    if (score_o.image.empty() && score_o.in.manifest.empty()) {
      fail(ErrorKind::Usage, "score needs --image or --manifest");
    }
    return cmd_score(score_o, out);
  }
  if (*train_niqe_cmd) return cmd_train(true, niqe_o, out);
  if (*train_brisque_cmd) return cmd_train(false, brisque_o, out);
  if (*baseline) return cmd_baseline(base_o, out, err);
  if (*curve) return cmd_reject_curve(curve_o, out, err);
  if (*folds) return cmd_folds(folds_o, out);
  if (*stats) return cmd_stats(stats_o, out, err);
  return 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const Error& e) {
    err << "veinqa: error[" << to_string(e.kind()) << "]: " << one_line(e.what()) << "\n";
    return e.kind() == ErrorKind::Usage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "veinqa: error[internal]: " << one_line(e.what()) << "\n";
    return 1;
  }
}

int run_cli(const std::vector<std::string>& args) { return run_cli(args, std::cout, std::cerr); }

}  // namespace veinqa
