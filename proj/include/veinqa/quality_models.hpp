#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "veinqa/image.hpp"
#include "veinqa/nss.hpp"

namespace veinqa {

using Vector32 = Eigen::Matrix<double, 32, 1>;
using Matrix32 = Eigen::Matrix<double, 32, 32>;

inline constexpr const char* kModelVersion = "1";

Vector32 to_vector(const FeatureVector32& f);

struct QualityScore {
  double value = 0.0;
  bool lower_is_better = true;
};

struct NiqeConfig {
  int patch = 96;
  double sharpness_quantile = 0.75;
  double ridge = 1e-6;
  std::size_t min_images = 10;
  std::size_t min_patches = 200;
  NssConfig nss;
  int jobs = 1;
};

struct NiqeModel {
  Vector32 mean = Vector32::Zero();
  Matrix32 covariance = Matrix32::Zero();
  int patch = 96;
  double sharpness_quantile = 0.75;
  NssConfig nss;
  std::string version = kModelVersion;
};

struct NiqeTrainReport {
  std::size_t images_used = 0;
  std::size_t images_without_patches = 0;
  std::size_t patches = 0;
};

/// Sample mean and (n-1)-normalised covariance of pooled patch descriptors,
/// with ridge * I added to the covariance.
NiqeModel fit_niqe_model(std::span<const FeatureVector32> pooled, const NiqeConfig& cfg);
NiqeModel train_niqe(std::span<const GrayImage> good, const NiqeConfig& cfg,
                     NiqeTrainReport* report = nullptr);

/// Distance between the image's patch statistics and the model:
/// sqrt(d^T ((S_model + S_image) / 2)^-1 d). Lower is better.
QualityScore score_niqe(const NiqeModel& model, const GrayImage& image);
/// Same distance for precomputed patch descriptors of one image.
double niqe_distance(const NiqeModel& model, std::span<const FeatureVector32> patches);

struct BrisqueConfig {
  double epsilon = 1.0;
  double c = 10.0;
  double tolerance = 1e-6;
  int max_epochs = 200000;
  double good_target = 0.0;
  double poor_target = 100.0;
  std::size_t min_per_class = 10;
  NssConfig nss;
  int jobs = 1;
};

struct BrisqueModel {
  Vector32 weights = Vector32::Zero();
  double bias = 0.0;
  Vector32 feature_mean = Vector32::Zero();
  Vector32 feature_scale = Vector32::Ones();
  double score_min = -25.0;
  double score_max = 125.0;
  NssConfig nss;
  std::string version = kModelVersion;
};

struct BrisqueTrainReport {
  /// Feature dimensions with zero training variance; their scale is 1.
  std::vector<int> constant_dimensions;
  double duality_gap = 0.0;
  int epochs = 0;
  bool converged = false;
};

/// Result of the linear epsilon-SVR dual coordinate descent. The last
/// column of the design matrix is expected to be the constant bias feature.
struct SvrSolution {
  Eigen::VectorXd weights;
  Eigen::VectorXd dual;
  double primal = 0.0;
  double dual_objective = 0.0;
  int epochs = 0;
  bool converged = false;
};

SvrSolution solve_linear_svr(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double epsilon,
                             double c, double tolerance, int max_epochs);

BrisqueModel fit_brisque_model(std::span<const FeatureVector32> good,
                               std::span<const FeatureVector32> poor, const BrisqueConfig& cfg,
                               BrisqueTrainReport* report = nullptr);
BrisqueModel train_brisque(std::span<const GrayImage> good, std::span<const GrayImage> poor,
                           const BrisqueConfig& cfg, BrisqueTrainReport* report = nullptr);

QualityScore score_brisque(const BrisqueModel& model, const GrayImage& image);
double brisque_predict(const BrisqueModel& model, const FeatureVector32& features);

using QualityModel = std::variant<NiqeModel, BrisqueModel>;

std::string serialize_model(const QualityModel& model);
QualityModel parse_model(std::string_view text);
void save_model(const QualityModel& model, const std::filesystem::path& path);
QualityModel load_model(const std::filesystem::path& path);

}  // namespace veinqa
