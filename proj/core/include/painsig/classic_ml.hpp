#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "painsig/la.hpp"

namespace painsig {

// Per-dimension standardization fitted on training data only.
struct StandardScaler {
  std::vector<double> means;
  std::vector<double> stds;  // floored at 1e-12

  static StandardScaler fit(const Matrix& x);
  std::vector<double> transform(std::span<const double> x) const;
  Matrix transform_matrix(const Matrix& x) const;
};

enum class LdaMode { Pooled, PerClass };

// Gaussian discriminant classifier. Pooled mode shares one within-class
// covariance (scatter / (n - K)); PerClass keeps a covariance per class.
// Each covariance is ridge-regularized with lambda = 1e-6 * trace / d.
struct LdaModel {
  LdaMode mode = LdaMode::Pooled;
  std::size_t dim = 0;
  std::vector<int> class_ids;            // sorted ascending
  std::vector<double> priors;            // sum to 1
  std::vector<std::vector<double>> means;
  std::vector<Matrix> covariances;       // 1 (pooled) or one per class
  std::vector<Matrix> chol_factors;      // lower factors matching covariances
  std::vector<double> log_dets;
};

// Raises DegenerateClass (fewer than 2 classes, or any class with < 2 rows)
// or SingularCovariance (not positive definite even after regularization).
LdaModel lda_fit(const Matrix& x, const std::vector<int>& y,
                 LdaMode mode = LdaMode::Pooled);

struct LdaPrediction {
  int class_id = 0;
  std::vector<double> log_scores;  // log prior + log density, per class
};

// argmax_k [log pi_k + log P(x | y=k)]; ties break to the lowest class id.
LdaPrediction lda_predict(const LdaModel& model, std::span<const double> x);

enum class KernelType { Linear, Rbf };

struct Kernel {
  KernelType type = KernelType::Linear;
  double sigma = 1.0;  // RBF width

  // Linear: x1 . x2;  RBF: exp(-|x1 - x2|^2 / (2 sigma^2))
  double operator()(std::span<const double> a, std::span<const double> b) const;
};

struct SvmOptions {
  double c = 1.0;
  double tol = 1e-3;       // KKT violation tolerance during training
  int max_passes = 100;    // consecutive full sweeps without change before stop
  double sigma = 0.0;      // RBF width; <= 0 selects the median heuristic
};

// One-vs-rest multiclass SVM trained per subproblem with an SMO-style dual
// optimizer. alphas/labels cover the support vectors only (all other duals
// are exactly zero).
struct SvmModel {
  Kernel kernel;
  double c = 1.0;
  std::vector<int> class_ids;  // sorted ascending
  bool converged = true;       // false when any subproblem hit max_passes

  struct Binary {
    int positive_class = 0;
    double bias = 0.0;
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> alphas;  // dual variables, 0 < alpha <= C
    std::vector<double> labels;  // +1 / -1 per support vector
  };
  std::vector<Binary> binaries;
};

// Raises DegenerateClass (< 2 classes) or InvalidParameter (C <= 0).
SvmModel svm_fit(const Matrix& x, const std::vector<int>& y, KernelType kernel,
                 const SvmOptions& options = {});

// Decision value of one binary subproblem: sum alpha_i y_i K(sv_i, x) + b.
double svm_decision(const SvmModel& model, const SvmModel::Binary& binary,
                    std::span<const double> x);

// argmax over one-vs-rest decision values; ties break to the lowest class id.
int svm_predict(const SvmModel& model, std::span<const double> x);

// Median of all pairwise Euclidean distances between rows (even count:
// mean of the two central values); 1.0 when every distance is zero.
double median_pairwise_distance(const Matrix& x);

// Versioned JSON round-trip for trained models and scalers; floats keep full
// round-trip precision.
std::string to_json(const StandardScaler& scaler);
std::string to_json(const LdaModel& model);
std::string to_json(const SvmModel& model);
StandardScaler scaler_from_json(const std::string& text);
LdaModel lda_from_json(const std::string& text);
SvmModel svm_from_json(const std::string& text);

}  // namespace painsig
