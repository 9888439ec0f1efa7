// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
// any required criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "veinqa/classic_metrics.hpp"
#include "veinqa/cli.hpp"
#include "veinqa/dataset.hpp"
#include "veinqa/evaluation.hpp"
#include "veinqa/imgproc.hpp"
#include "veinqa/nss.hpp"
#include "veinqa/parallel.hpp"
#include "veinqa/quality_models.hpp"
#include "veinqa/recognition.hpp"
#include "veinqa/synthgen.hpp"

using namespace veinqa;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Suite {
  int failed_required = 0;

  void run(const std::string& name, const std::function<Outcome()>& body, bool optional = false) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    char time[32];
    std::snprintf(time, sizeof time, "%.1fs", seconds_since(t0));
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << (optional ? " [optional]" : "") << "  (" << time
              << ")  " << o.detail << std::endl;
    if (!o.pass && !optional) ++failed_required;
  }
};

std::string fmt(double v, int digits = 4) {
  char b[64];
  std::snprintf(b, sizeof b, "%.*g", digits, v);
  return b;
}

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

double relative_error(double got, double want) { return std::abs(got - want) / std::abs(want); }

// --- NSS distribution fitting ------------------------------------------------

Outcome aggd_recovery() {
  const double sigma2_l = 0.5;
  const double sigma2_r = 2.0;
  Outcome o{true, ""};
  for (double nu : {0.5, 1.0, 2.0, 4.0}) {
    oracle::AggdSampler draw(nu, sigma2_l, sigma2_r, 1000 + static_cast<std::uint64_t>(nu * 10));
    std::vector<double> samples(1000000);
    for (double& s : samples) s = draw();
    const auto t0 = Clock::now();
    const auto fit = fit_aggd(samples);
    const double t = seconds_since(t0);
    const double worst = std::max({relative_error(fit.nu, nu), relative_error(fit.sigma2_l, sigma2_l),
                                   relative_error(fit.sigma2_r, sigma2_r)});
    const bool ok = worst <= 0.10 && t < 5.0;
    o.pass = o.pass && ok;
    o.detail += "nu=" + fmt(nu, 2) + ": fit (" + fmt(fit.nu) + ", " + fmt(fit.sigma2_l) + ", " +
                fmt(fit.sigma2_r) + ") max rel err " + fmt(worst, 2) + " in " + fmt(t, 2) + "s; ";
  }
  return o;
}

Outcome gaussian_limit() {
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> samples(1000000);
  for (double& s : samples) s = n(gen);
  const auto fit = fit_aggd(samples);
  const double ratio = std::sqrt(fit.sigma2_l / fit.sigma2_r);
  const bool ok = fit.nu >= 1.9 && fit.nu <= 2.1 && ratio >= 0.9 && ratio <= 1.1;
  return {ok, "nu " + fmt(fit.nu) + ", sigma_l/sigma_r " + fmt(ratio)};
}

// --- Verification rates and matching -----------------------------------------

Outcome eer_oracle() {
  std::mt19937_64 gen(77);
  int mismatches = 0;
  const auto t0 = Clock::now();
  for (int trial = 0; trial < 1000; ++trial) {
    const int total = std::uniform_int_distribution<int>(2, 200)(gen);
    const int n_gen = std::uniform_int_distribution<int>(1, total - 1)(gen);
    // A third of the sets are coarsely quantised so ties are frequent.
    const int levels = trial % 3 == 0 ? std::uniform_int_distribution<int>(2, 12)(gen) : 0;
    const double shift = std::uniform_real_distribution<double>(0.0, 0.4)(gen);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto draw = [&](double offset) {
      double v = std::clamp(u(gen) * 0.7 + offset, 0.0, 1.0);
      if (levels > 0) v = std::round(v * levels) / levels;
      return v;
    };
    std::vector<double> genuine(static_cast<std::size_t>(n_gen));
    std::vector<double> impostor(static_cast<std::size_t>(total - n_gen));
    for (double& g : genuine) g = draw(shift);
    for (double& i : impostor) i = draw(0.0);
    const auto got = compute_rates(genuine, impostor);
    const auto want = oracle::sweep(genuine, impostor);
    if (got.eer != want.eer || got.eer_threshold != want.eer_threshold || got.fmr1000 != want.fmr1000 ||
        got.zerofmr != want.zerofmr) {
      ++mismatches;
    }
  }
  const double t = seconds_since(t0);
  return {mismatches == 0 && t < 10.0,
          std::to_string(mismatches) + " of 1000 score sets differ from the sweep; " + fmt(t, 2) + "s"};
}

Outcome matcher_oracle() {
  Rng rng(31);
  int mismatches = 0;
  int pairs = 0;
  int self_failures = 0;
  while (pairs < 500) {
    auto pick = [&](int n) { return std::min(n - 1, static_cast<int>(rng.uniform() * n)); };
    const int w = 1 + pick(8);
    const int h = 1 + pick(8);
    const double density = rng.uniform(0.05, 0.7);
    const int sx = pick(4);
    const int sy = pick(4);
    auto make = [&] {
      BinaryTemplate t(w, h);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) t.set(x, y, rng.uniform() < density);
      }
      return t;
    };
    const BinaryTemplate a = make();
    const BinaryTemplate b = make();
    if (a.count() == 0 || b.count() == 0) continue;
    ++pairs;
    if (miura_match(a, b, sx, sy) != oracle::miura(a, b, sx, sy)) ++mismatches;
    if (miura_match(a, a, sx, sy) != 0.5) ++self_failures;
  }
  return {mismatches == 0 && self_failures == 0,
          std::to_string(mismatches) + " of 500 pairs differ from brute force; " + std::to_string(self_failures) +
              " self-matches differ from 0.5"};
}

// --- Trained quality models --------------------------------------------------

struct RenderedCorpus {
  std::vector<SampleRecord> records;
  std::vector<GrayImage> images;

  std::vector<std::size_t> select(const std::function<bool(const SampleRecord&)>& keep) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (keep(records[i])) out.push_back(i);
    }
    return out;
  }
  std::vector<GrayImage> images_of(const std::vector<std::size_t>& idx) const {
    std::vector<GrayImage> out;
    for (std::size_t i : idx) out.push_back(images[i]);
    return out;
  }
};

RenderedCorpus render(const CorpusSpec& spec) {
  RenderedCorpus c;
  const auto plan = plan_corpus(spec);
  for (const auto& e : plan) c.records.push_back(e.record);
  c.images = render_corpus(plan, worker_count());
  return c;
}

NiqeConfig small_patch_niqe() {
  NiqeConfig cfg;
  cfg.patch = 32;
  cfg.jobs = worker_count();
  return cfg;
}

Outcome trained_model_ordering() {
  CorpusSpec spec;
  spec.seed = 300;
  spec.datasets = {"A", "B"};
  spec.n_subjects = 15;
  spec.n_fingers = 2;
  spec.n_samples = 5;
  const auto corpus = render(spec);
  std::array<int, 3> per_class{};
  for (const auto& r : corpus.records) per_class[static_cast<int>(*r.quality_class)]++;
  if (corpus.records.size() != 300 || per_class != std::array<int, 3>{100, 100, 100}) {
    return {false, "corpus does not hold 100 images per class"};
  }

  // Each dataset is scored by models trained on the other one only.
  std::map<std::string, std::array<double, 3>> sums;
  std::array<int, 3> counts{};
  double worst_niqe_time = 0.0;
  double worst_brisque_time = 0.0;
  for (const std::string held_out : {"A", "B"}) {
    auto training = [&](QualityClass c) {
      return corpus.images_of(corpus.select([&](const SampleRecord& r) {
        return r.dataset_id != held_out && r.quality_class == c;
      }));
    };
    auto t0 = Clock::now();
    const auto niqe = train_niqe(training(QualityClass::Good), small_patch_niqe());
    worst_niqe_time = std::max(worst_niqe_time, seconds_since(t0));
    BrisqueConfig bcfg;
    bcfg.jobs = worker_count();
    t0 = Clock::now();
    const auto brisque = train_brisque(training(QualityClass::Good), training(QualityClass::Poor), bcfg);
    worst_brisque_time = std::max(worst_brisque_time, seconds_since(t0));

    for (std::size_t i : corpus.select([&](const SampleRecord& r) { return r.dataset_id == held_out; })) {
      const int c = static_cast<int>(*corpus.records[i].quality_class);
      sums["niqe"][c] += score_niqe(niqe, corpus.images[i]).value;
      sums["brisque"][c] += score_brisque(brisque, corpus.images[i]).value;
      counts[c]++;
    }
  }
  Outcome o{worst_niqe_time < 60.0 && worst_brisque_time < 60.0, ""};
  const int poor = static_cast<int>(QualityClass::Poor);
  const int middle = static_cast<int>(QualityClass::Middle);
  const int good = static_cast<int>(QualityClass::Good);
  for (const auto& [name, s] : sums) {
    const double mg = s[good] / counts[good];
    const double mm = s[middle] / counts[middle];
    const double mp = s[poor] / counts[poor];
    o.pass = o.pass && mg < mm && mm < mp;
    o.detail += name + " good/middle/poor means " + fmt(mg) + " < " + fmt(mm) + " < " + fmt(mp) + "; ";
  }
  o.detail += "slowest training: niqe " + fmt(worst_niqe_time, 2) + "s, brisque " + fmt(worst_brisque_time, 2) + "s";
  return o;
}

// --- Quality-based rejection -------------------------------------------------

Outcome rejection_trend() {
  // The poor band is harsh enough to break vein extraction, so the baseline
  // error rate is driven by the poor samples.
  CorpusSpec spec;
  spec.seed = 17;
  spec.datasets = {"train", "eval"};
  spec.n_subjects = 20;
  spec.n_fingers = 2;
  spec.n_samples = 4;
  auto& poor = spec.bands[static_cast<int>(QualityClass::Poor)];
  poor.blur = {3.0, 5.0};
  poor.contrast = {0.15, 0.3};
  poor.noise = {0.04, 0.08};
  poor.illum = {0.2, 0.5};
  const auto corpus = render(spec);

  const auto train_good = corpus.images_of(corpus.select([](const SampleRecord& r) {
    return r.dataset_id == "train" && r.quality_class == QualityClass::Good;
  }));
  const auto model = train_niqe(train_good, small_patch_niqe());

  const auto eval_idx = corpus.select([](const SampleRecord& r) { return r.dataset_id == "eval"; });
  std::vector<SampleRecord> records;
  std::vector<double> quality;
  std::vector<TemplateEntry> entries;
  for (std::size_t i : eval_idx) {
    records.push_back(corpus.records[i]);
    quality.push_back(score_niqe(model, corpus.images[i]).value);
  }
  const std::vector<GrayImage> eval_images = corpus.images_of(eval_idx);
  const auto templates = parallel_map(eval_images.size(), worker_count(), [&](std::size_t i) {
    std::optional<BinaryTemplate> t;
    try {
      t = extract_mc(eval_images[i], 2.5);
    } catch (const Error&) {
    }
    return t;
  });
  for (std::size_t i = 0; i < records.size(); ++i) entries.push_back({records[i], templates[i]});

  const VerifyConfig vcfg{8, 8, worker_count()};
  const RateReport baseline = compute_rates(verify_all(entries, vcfg));
  ComparisonEngine engine(entries, vcfg);
  const auto curve = rejection_curve(records, quality, true,
                                     [&](std::span<const SampleRecord> s) { return engine.build(s); });
  const auto& first = curve.steps.front();
  const auto& half = curve.steps.back();
  const bool same_start = first.reject_fraction == 0.0 && first.rates == baseline;
  const bool halved = half.reject_fraction == 0.5 && half.valid && half.rates.eer <= 0.5 * first.rates.eer;
  std::string trace;
  for (const auto& s : curve.steps) trace += fmt(s.rates.eer, 3) + " ";
  return {same_start && halved && baseline.eer > 0.0,
          "EER(0) " + fmt(first.rates.eer) + (same_start ? " equals" : " differs from") + " baseline " +
              fmt(baseline.eer) + ", EER(0.5) " + fmt(half.rates.eer) + "; curve " + trace};
}

// --- Classical metrics -------------------------------------------------------

Outcome classic_monotonicity() {
  const std::array<ClassicMetric, 3> metrics{ClassicMetric::Gcf, ClassicMetric::TNorm, ClassicMetric::Wang};
  const std::array<double, 4> sigmas{0.0, 1.0, 2.0, 3.0};
  std::array<std::array<double, 4>, 3> means{};
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    const auto per_image = parallel_map(100, worker_count(), [&](std::size_t i) {
      SynthParams p;
      p.seed = 5000 + i;
      p.structure_seed = 5000 + i;
      p.blur_sigma = sigmas[s];
      const auto img = generate(p).image;
      std::array<double, 3> v{};
      for (std::size_t m = 0; m < metrics.size(); ++m) v[m] = classic_score(metrics[m], img).value;
      return v;
    });
    for (const auto& v : per_image) {
      for (std::size_t m = 0; m < metrics.size(); ++m) means[m][s] += v[m] / 100.0;
    }
  }
  Outcome o{true, ""};
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    o.detail += std::string(metric_name(metrics[m])) + " ";
    for (std::size_t s = 0; s < sigmas.size(); ++s) {
      o.detail += fmt(means[m][s]) + (s + 1 < sigmas.size() ? ">=" : "; ");
      if (s > 0 && means[m][s] > means[m][s - 1]) o.pass = false;
    }
  }
  const double flat = entropy_energy(GrayImage(32, 32, std::vector<double>(32 * 32, 0.4))).value;
  std::vector<double> ramp(256);
  for (int k = 0; k < 256; ++k) ramp[static_cast<std::size_t>(k)] = k / 255.0;
  const double uniform = entropy_energy(GrayImage(16, 16, std::move(ramp))).value;
  o.pass = o.pass && flat == 0.0 && std::abs(uniform - 8.0) < 1e-12;
  o.detail += "entropy constant " + fmt(flat) + ", uniform " + fmt(uniform, 12);
  return o;
}

// --- Real data ---------------------------------------------------------------

bool real_data_present() {
  const char* m = std::getenv("VEINQA_UTFVP_MANIFEST");
  return m != nullptr && *m != '\0';
}

Outcome utfvp_baseline() {
  const fs::path manifest = std::getenv("VEINQA_UTFVP_MANIFEST");
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli({"baseline", "--manifest", manifest.string(), "--trait", "finger-palmar", "--feature",
                            "mc", "--roi", "finger", "--jobs", std::to_string(worker_count())},
                           out, err);
  if (code != 0) return {false, "baseline failed: " + err.str()};
  const auto rows = parse_baseline_report(out.str(), ReportFormat::Csv);
  if (rows.empty()) return {false, "no baseline row"};
  const double eer = rows.front().eer;
  return {std::abs(eer - 0.0069) <= 0.01, "MC EER " + fmt(eer) + " (target 0.0069 +- 0.01)"};
}

// --- Command-line determinism ------------------------------------------------

struct CliRun {
  int code = 0;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(args, out, err);
  return {code, err.str()};
}

// Runs every command of the tool into `root` and returns the produced files
// by relative path. The single-image score row carries the absolute image
// path, so occurrences of `root` are replaced by a placeholder.
std::map<std::string, std::string> cli_pipeline(const fs::path& root, int jobs) {
  const std::string j = std::to_string(jobs);
  const auto spec = root / "spec.json";
  std::ofstream(spec) << R"({"seed": 8, "datasets": ["A", "B"], "n_subjects": 6, "n_fingers": 1,
    "n_samples": 4, "width": 96, "height": 96})";
  const std::string m = (root / "corpus" / "manifest.csv").string();
  auto p = [&](const std::string& name) { return (root / name).string(); };
  const std::vector<std::vector<std::string>> steps{
      {"synth", "--spec", spec.string(), "--out", (root / "corpus").string(), "--jobs", j},
      {"train-niqe", "--manifest", m, "--protocol", "lodo", "--held-out", "A", "--patch-size", "32", "--min-images",
       "4", "--min-patches", "20", "--jobs", j, "--out", p("niqe.json")},
      {"train-niqe", "--manifest", m, "--protocol", "lodo", "--held-out", "A", "--dry-run", "--audit",
       p("niqe_audit.csv")},
      {"train-brisque", "--manifest", m, "--protocol", "lodo", "--held-out", "A", "--min-per-class", "4", "--jobs", j,
       "--out", p("brisque.json")},
      {"train-brisque", "--manifest", m, "--protocol", "kfold", "--k", "3", "--fold", "1", "--seed", "4",
       "--dry-run", "--audit", p("brisque_audit.csv")},
      {"score", "--manifest", m, "--metric", "all", "--niqe-model", p("niqe.json"), "--brisque-model",
       p("brisque.json"), "--jobs", j, "--out", p("scores.csv")},
      {"score", "--image", (root / "corpus" / "A" / "A_s001_f1_1.png").string(), "--metric", "all", "--out",
       p("single.json")},
      {"baseline", "--manifest", m, "--feature", "all", "--jobs", j, "--out", p("baseline.csv")},
      {"reject-curve", "--manifest", m, "--dataset", "A", "--scores", p("scores.csv"), "--feature", "mc", "--jobs", j,
       "--out", p("curve.csv")},
      {"reject-curve", "--manifest", m, "--dataset", "A", "--metric", "niqe,entropy", "--niqe-model",
       p("niqe.json"), "--feature", "mc", "--jobs", j, "--out", p("curve_direct.csv")},
      {"folds", "--manifest", m, "--protocol", "kfold", "--k", "3", "--seed", "9", "--out", p("folds.csv")},
      {"folds", "--manifest", m, "--protocol", "lodo", "--out", p("lodo.csv")},
      {"stats", "--manifest", m, "--scores", p("scores.csv"), "--out", p("stats.csv")},
  };
  for (const auto& args : steps) {
    const auto r = cli(args);
    if (r.code != 0) throw std::runtime_error(args.front() + " failed: " + r.err);
  }
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::string bytes = fixture::read_file(e.path());
    const std::string prefix = root.string();
    for (std::size_t at = bytes.find(prefix); at != std::string::npos; at = bytes.find(prefix, at)) {
      bytes.replace(at, prefix.size(), "<root>");
    }
    files[fs::relative(e.path(), root).string()] = std::move(bytes);
  }
  return files;
}

Outcome cli_determinism() {
  fixture::TempDir first("accept-cli-1");
  fixture::TempDir second("accept-cli-2");
  fixture::TempDir threaded("accept-cli-3");
  const auto a = cli_pipeline(first.path(), 1);
  const auto b = cli_pipeline(second.path(), 1);
  const auto c = cli_pipeline(threaded.path(), std::max(2, worker_count()));
  std::size_t differing = 0;
  for (const auto* other : {&b, &c}) {
    if (other->size() != a.size()) return {false, "runs produced different file sets"};
    for (const auto& [name, bytes] : a) {
      const auto it = other->find(name);
      if (it == other->end() || it->second != bytes) ++differing;
    }
  }
  return {differing == 0, std::to_string(a.size()) + " files per run, " + std::to_string(differing) +
                              " differ across three runs (two single-threaded, one multi-threaded)"};
}

}  // namespace

int main() {
  Suite suite;
  suite.run("AGGD parameter recovery", aggd_recovery);
  suite.run("AGGD Gaussian limit", gaussian_limit);
  suite.run("EER oracle equivalence", eer_oracle);
  suite.run("Miura matcher equivalence", matcher_oracle);
  suite.run("trained-model class ordering", trained_model_ordering);
  suite.run("rejection-curve trend", rejection_trend);
  suite.run("classical-metric monotonicity", classic_monotonicity);
  if (real_data_present()) {
    suite.run("UTFVP MC baseline EER", utfvp_baseline, true);
  } else {
    std::cout << "SKIP  UTFVP MC baseline EER [optional]  set VEINQA_UTFVP_MANIFEST to a UTFVP manifest to run"
              << std::endl;
  }
  suite.run("CLI determinism", cli_determinism);
  std::cout << (suite.failed_required == 0 ? "all required criteria passed"
                                           : std::to_string(suite.failed_required) + " required criteria failed")
            << std::endl;
  return suite.failed_required == 0 ? 0 : 1;
}
