#include "veinqa/quality_models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "veinqa/errors.hpp"
#include "veinqa/parallel.hpp"

namespace veinqa {

using json = nlohmann::json;

Vector32 to_vector(const FeatureVector32& f) {
  Vector32 v;
  for (int i = 0; i < 32; ++i) v(i) = f[static_cast<std::size_t>(i)];
  return v;
}

namespace {

Matrix32 sample_covariance(std::span<const FeatureVector32> rows, const Vector32& mean) {
  Matrix32 cov = Matrix32::Zero();
  if (rows.size() < 2) return cov;
  for (const auto& r : rows) {
    const Vector32 d = to_vector(r) - mean;
    cov.noalias() += d * d.transpose();
  }
  cov /= static_cast<double>(rows.size() - 1);
  return 0.5 * (cov + cov.transpose());
}

Vector32 sample_mean(std::span<const FeatureVector32> rows) {
  Vector32 mean = Vector32::Zero();
  for (const auto& r : rows) mean += to_vector(r);
  return mean / static_cast<double>(rows.size());
}

}  // namespace

NiqeModel fit_niqe_model(std::span<const FeatureVector32> pooled, const NiqeConfig& cfg) {
  if (pooled.empty()) fail(ErrorKind::Training, "NIQE training pool has no patches");
  NiqeModel m;
  m.patch = cfg.patch;
  m.sharpness_quantile = cfg.sharpness_quantile;
  m.nss = cfg.nss;
  m.mean = sample_mean(pooled);
  m.covariance = sample_covariance(pooled, m.mean);
  m.covariance.diagonal().array() += cfg.ridge;
  return m;
}

NiqeModel train_niqe(std::span<const GrayImage> good, const NiqeConfig& cfg,
                     NiqeTrainReport* report) {
  if (good.size() < cfg.min_images) {
    fail(ErrorKind::Training, "NIQE training needs at least " + std::to_string(cfg.min_images) +
                                  " images, got " + std::to_string(good.size()));
  }
  struct PerImage {
    std::vector<FeatureVector32> patches;
    bool empty = false;
  };
  const auto per_image = parallel_map(good.size(), cfg.jobs, [&](std::size_t i) {
    PerImage out;
    try {
      out.patches = niqe_patch_features(good[i], cfg.patch, cfg.sharpness_quantile, cfg.nss);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::EmptySelection) throw;
      out.empty = true;
    }
    return out;
  });

  std::vector<FeatureVector32> pooled;
  NiqeTrainReport rep;
  for (const auto& p : per_image) {
    if (p.empty) {
      ++rep.images_without_patches;
      continue;
    }
    ++rep.images_used;
    pooled.insert(pooled.end(), p.patches.begin(), p.patches.end());
  }
  rep.patches = pooled.size();
  if (report) *report = rep;
  if (pooled.empty()) fail(ErrorKind::Training, "no training image produced a sharp patch");
  if (pooled.size() < cfg.min_patches) {
    fail(ErrorKind::Training, "NIQE training pool has " + std::to_string(pooled.size()) +
                                  " patches, need " + std::to_string(cfg.min_patches));
  }
  return fit_niqe_model(pooled, cfg);
}

double niqe_distance(const NiqeModel& model, std::span<const FeatureVector32> patches) {
  if (patches.empty()) fail(ErrorKind::EmptySelection, "image has no patches to score");
  const Vector32 mean = sample_mean(patches);
  const Matrix32 cov = sample_covariance(patches, mean);
  const Matrix32 pooled = 0.5 * (model.covariance + cov);
  const Vector32 d = model.mean - mean;
  const Vector32 sol = pooled.ldlt().solve(d);
  const double q = d.dot(sol);
  return std::sqrt(std::max(0.0, q));
}

QualityScore score_niqe(const NiqeModel& model, const GrayImage& image) {
  const auto patches =
      niqe_patch_features(image, model.patch, model.sharpness_quantile, model.nss);
  return QualityScore{niqe_distance(model, patches), true};
}

SvrSolution solve_linear_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double epsilon,
                             double c, double tolerance, int max_epochs) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (n == 0 || y.size() != n) fail(ErrorKind::Training, "SVR needs matching non-empty data");

  SvrSolution s;
  s.weights = Eigen::VectorXd::Zero(d);
  s.dual = Eigen::VectorXd::Zero(n);
  const Eigen::VectorXd q_diag = x.rowwise().squaredNorm();

  auto objectives = [&] {
    double slack = 0.0;
    double dual_linear = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = std::abs(x.row(i).dot(s.weights) - y(i)) - epsilon;
      if (r > 0.0) slack += r;
      dual_linear += y(i) * s.dual(i) - epsilon * std::abs(s.dual(i));
    }
    const double half_norm = 0.5 * s.weights.squaredNorm();
    s.primal = half_norm + c * slack;
    s.dual_objective = dual_linear - half_norm;
  };

  for (int epoch = 1; epoch <= max_epochs; ++epoch) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = q_diag(i);
      if (h <= 0.0) continue;
      const double g = x.row(i).dot(s.weights) - y(i);
      // One-variable subproblem: 0.5 h b^2 + a b + epsilon |b| on [-c, c].
      const double a = g - h * s.dual(i);
      double b = 0.0;
      if (a < -epsilon) {
        b = -(a + epsilon) / h;
      } else if (a > epsilon) {
        b = -(a - epsilon) / h;
      }
      b = std::clamp(b, -c, c);
      const double delta = b - s.dual(i);
      if (delta != 0.0) {
        s.weights.noalias() += delta * x.row(i).transpose();
        s.dual(i) = b;
      }
    }
    objectives();
    s.epochs = epoch;
    if (s.primal - s.dual_objective <= tolerance) {
      s.converged = true;
      break;
    }
  }
  return s;
}

BrisqueModel fit_brisque_model(std::span<const FeatureVector32> good,
                               std::span<const FeatureVector32> poor, const BrisqueConfig& cfg,
                               BrisqueTrainReport* report) {
  if (good.empty() || poor.empty()) {
    fail(ErrorKind::Training, "BRISQUE training needs both good and poor samples");
  }
  if (!(cfg.poor_target > cfg.good_target)) {
    fail(ErrorKind::Training, "poor target must exceed the good target");
  }
  const std::size_t n = good.size() + poor.size();
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(n), 32);
  Eigen::VectorXd target(static_cast<Eigen::Index>(n));
  // Training happens in canonical units (good 0, poor 100) so epsilon and C
  // keep their meaning; the affine map to the requested targets is folded
  // into the stored weights afterwards.
  Eigen::Index row = 0;
  for (const auto& f : good) {
    raw.row(row) = to_vector(f).transpose();
    target(row++) = 0.0;
  }
  for (const auto& f : poor) {
    raw.row(row) = to_vector(f).transpose();
    target(row++) = 100.0;
  }

  BrisqueTrainReport rep;
  BrisqueModel m;
  m.nss = cfg.nss;
  m.feature_mean = raw.colwise().mean().transpose();
  for (int j = 0; j < 32; ++j) {
    const double var = (raw.col(j).array() - m.feature_mean(j)).square().mean();
    const double sd = std::sqrt(var);
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      m.feature_scale(j) = 1.0;
      rep.constant_dimensions.push_back(j);
    } else {
      m.feature_scale(j) = sd;
    }
  }

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 33);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    design.row(i).head(32) =
        ((raw.row(i).transpose() - m.feature_mean).array() / m.feature_scale.array()).transpose();
    design(i, 32) = 1.0;
  }
  const SvrSolution sol =
      solve_linear_svr(design, target, cfg.epsilon, cfg.c, cfg.tolerance, cfg.max_epochs);
  rep.duality_gap = sol.primal - sol.dual_objective;
  rep.epochs = sol.epochs;
  rep.converged = sol.converged;

  const double span = (cfg.poor_target - cfg.good_target) / 100.0;
  m.weights = span * sol.weights.head(32);
  m.bias = cfg.good_target + span * sol.weights(32);
  m.score_min = cfg.good_target - 0.25 * (cfg.poor_target - cfg.good_target);
  m.score_max = cfg.poor_target + 0.25 * (cfg.poor_target - cfg.good_target);
  if (report) *report = rep;
  return m;
}

BrisqueModel train_brisque(std::span<const GrayImage> good, std::span<const GrayImage> poor,
                           const BrisqueConfig& cfg, BrisqueTrainReport* report) {
  if (good.empty() || poor.empty()) {
    fail(ErrorKind::Training, "BRISQUE training needs images of both classes");
  }
  if (good.size() < cfg.min_per_class || poor.size() < cfg.min_per_class) {
    fail(ErrorKind::Training, "BRISQUE training needs at least " +
                                  std::to_string(cfg.min_per_class) +
                                  " images per class, got " + std::to_string(good.size()) +
                                  " good and " + std::to_string(poor.size()) + " poor");
  }
  auto features = [&](std::span<const GrayImage> imgs) {
    return parallel_map(imgs.size(), cfg.jobs,
                        [&](std::size_t i) { return brisque_features(imgs[i], cfg.nss); });
  };
  const auto good_f = features(good);
  const auto poor_f = features(poor);
  return fit_brisque_model(good_f, poor_f, cfg, report);
}

double brisque_predict(const BrisqueModel& model, const FeatureVector32& features) {
  const Vector32 z =
      (to_vector(features) - model.feature_mean).array() / model.feature_scale.array();
  return std::clamp(model.weights.dot(z) + model.bias, model.score_min, model.score_max);
}

QualityScore score_brisque(const BrisqueModel& model, const GrayImage& image) {
  return QualityScore{brisque_predict(model, brisque_features(image, model.nss)), true};
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json vector_json(const Vector32& v) {
  json a = json::array();
  for (int i = 0; i < 32; ++i) a.push_back(v(i));
  return a;
}

Vector32 vector_from(const json& a, const char* name) {
  if (!a.is_array() || a.size() != 32) {
    fail(ErrorKind::Parse, std::string("model field '") + name + "' must hold 32 reals");
  }
  Vector32 v;
  for (int i = 0; i < 32; ++i) v(i) = a.at(static_cast<std::size_t>(i)).get<double>();
  return v;
}

json nss_json(const NssConfig& c) {
  return json{{"window_sigma", c.window_sigma}, {"window_radius", c.window_radius}, {"c", c.c}};
}

NssConfig nss_from(const json& j) {
  NssConfig c;
  c.window_sigma = j.at("window_sigma").get<double>();
  c.window_radius = j.at("window_radius").get<int>();
  c.c = j.at("c").get<double>();
  return c;
}

json to_json(const NiqeModel& m) {
  json cov = json::array();
  for (int r = 0; r < 32; ++r) {
    json rowj = json::array();
    for (int c = 0; c < 32; ++c) rowj.push_back(m.covariance(r, c));
    cov.push_back(std::move(rowj));
  }
  return json{{"kind", "niqe"},
              {"version", m.version},
              {"params",
               {{"patch", m.patch},
                {"sharpness_quantile", m.sharpness_quantile},
                {"nss", nss_json(m.nss)},
                {"mean", vector_json(m.mean)},
                {"covariance", std::move(cov)}}}};
}

json to_json(const BrisqueModel& m) {
  return json{{"kind", "brisque"},
              {"version", m.version},
              {"params",
               {{"weights", vector_json(m.weights)},
                {"bias", m.bias},
                {"feature_mean", vector_json(m.feature_mean)},
                {"feature_scale", vector_json(m.feature_scale)},
                {"score_min", m.score_min},
                {"score_max", m.score_max},
                {"nss", nss_json(m.nss)}}}};
}

}  // namespace

std::string serialize_model(const QualityModel& model) {
  const json j = std::visit([](const auto& m) { return to_json(m); }, model);
  return j.dump(2) + "\n";
}

QualityModel parse_model(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    const std::string version = j.at("version").get<std::string>();
    if (version != kModelVersion) {
      fail(ErrorKind::IncompatibleModel, "model version '" + version + "' is not supported (want '" +
                                             kModelVersion + "')");
    }
    const std::string kind = j.at("kind").get<std::string>();
    const json& p = j.at("params");
    if (kind == "niqe") {
      NiqeModel m;
      m.version = version;
      m.patch = p.at("patch").get<int>();
      m.sharpness_quantile = p.at("sharpness_quantile").get<double>();
      m.nss = nss_from(p.at("nss"));
      m.mean = vector_from(p.at("mean"), "mean");
      const json& cov = p.at("covariance");
      if (!cov.is_array() || cov.size() != 32) fail(ErrorKind::Parse, "covariance must be 32x32");
      for (int r = 0; r < 32; ++r) m.covariance.row(r) = vector_from(cov.at(static_cast<std::size_t>(r)), "covariance").transpose();
      if (!m.covariance.isApprox(m.covariance.transpose(), 1e-9)) {
        fail(ErrorKind::Validation, "NIQE covariance is not symmetric");
      }
      return m;
    }
    if (kind == "brisque") {
      BrisqueModel m;
      m.version = version;
      m.weights = vector_from(p.at("weights"), "weights");
      m.bias = p.at("bias").get<double>();
      m.feature_mean = vector_from(p.at("feature_mean"), "feature_mean");
      m.feature_scale = vector_from(p.at("feature_scale"), "feature_scale");
      m.score_min = p.at("score_min").get<double>();
      m.score_max = p.at("score_max").get<double>();
      m.nss = nss_from(p.at("nss"));
      if ((m.feature_scale.array() <= 0.0).any()) {
        fail(ErrorKind::Validation, "BRISQUE feature scales must be positive");
      }
      return m;
    }
    fail(ErrorKind::IncompatibleModel, "unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const QualityModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write model " + path.string());
  out << serialize_model(model);
  if (!out) fail(ErrorKind::Io, "failed writing model " + path.string());
}

QualityModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open model " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_model(buf.str());
  } catch (const Error& e) {
    fail(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace veinqa
