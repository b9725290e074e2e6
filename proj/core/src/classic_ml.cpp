#include "painsig/classic_ml.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <json.hpp>

#include "painsig/errors.hpp"

namespace painsig {

StandardScaler StandardScaler::fit(const Matrix& x) {
  if (x.rows == 0 || x.cols == 0) raise(Errc::ShapeMismatch, "empty matrix");
  StandardScaler s;
  s.means.assign(x.cols, 0.0);
  s.stds.assign(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) s.means[c] += x(r, c);
  for (double& m : s.means) m /= static_cast<double>(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) {
      double d = x(r, c) - s.means[c];
      s.stds[c] += d * d;
    }
  for (double& v : s.stds) {
    v = std::sqrt(v / static_cast<double>(x.rows));
    if (v < 1e-12) v = 1e-12;
  }
  return s;
}

std::vector<double> StandardScaler::transform(std::span<const double> x) const {
  if (x.size() != means.size()) raise(Errc::DimensionMismatch, "scaler transform");
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = (x[i] - means[i]) / stds[i];
  return out;
}

Matrix StandardScaler::transform_matrix(const Matrix& x) const {
  if (x.cols != means.size()) raise(Errc::DimensionMismatch, "scaler transform");
  Matrix out(x.rows, x.cols);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c)
      out(r, c) = (x(r, c) - means[c]) / stds[c];
  return out;
}

namespace {

// Ridge factor keeping covariances invertible: lambda = 1e-6 * trace / d.
void regularize(Matrix& cov) {
  double trace = 0.0;
  for (std::size_t i = 0; i < cov.rows; ++i) trace += cov(i, i);
  double lambda = 1e-6 * trace / static_cast<double>(cov.rows);
  for (std::size_t i = 0; i < cov.rows; ++i) cov(i, i) += lambda;
}

}  // namespace

LdaModel lda_fit(const Matrix& x, const std::vector<int>& y, LdaMode mode) {
  if (x.rows != y.size()) raise(Errc::ShapeMismatch, "lda_fit rows vs labels");
  if (x.rows == 0 || x.cols == 0) raise(Errc::ShapeMismatch, "lda_fit empty input");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t r = 0; r < x.rows; ++r) by_class[y[r]].push_back(r);
  if (by_class.size() < 2)
    raise(Errc::DegenerateClass, "need at least 2 classes, got " +
                                     std::to_string(by_class.size()));
  for (const auto& [cls, rows] : by_class)
    if (rows.size() < 2)
      raise(Errc::DegenerateClass, "class " + std::to_string(cls) +
                                       " has fewer than 2 samples");

  LdaModel m;
  m.mode = mode;
  m.dim = x.cols;
  const std::size_t d = x.cols;
  const std::size_t k = by_class.size();

  for (const auto& [cls, rows] : by_class) {
    m.class_ids.push_back(cls);
    m.priors.push_back(static_cast<double>(rows.size()) /
                       static_cast<double>(x.rows));
    std::vector<double> mean(d, 0.0);
    for (std::size_t r : rows)
      for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
    for (double& v : mean) v /= static_cast<double>(rows.size());
    m.means.push_back(std::move(mean));
  }

  auto scatter_of = [&](std::size_t ki) {
    Matrix s(d, d);
    const auto& rows = by_class.at(m.class_ids[ki]);
    for (std::size_t r : rows) {
      for (std::size_t i = 0; i < d; ++i) {
        double di = x(r, i) - m.means[ki][i];
        for (std::size_t j = 0; j < d; ++j)
          s(i, j) += di * (x(r, j) - m.means[ki][j]);
      }
    }
    return s;
  };

  if (mode == LdaMode::Pooled) {
    Matrix pooled(d, d);
    for (std::size_t ki = 0; ki < k; ++ki) {
      Matrix s = scatter_of(ki);
      for (std::size_t i = 0; i < d * d; ++i) pooled.v[i] += s.v[i];
    }
    double denom = static_cast<double>(x.rows - k);
    for (double& v : pooled.v) v /= denom;
    regularize(pooled);
    m.covariances.push_back(std::move(pooled));
  } else {
    for (std::size_t ki = 0; ki < k; ++ki) {
      Matrix s = scatter_of(ki);
      double denom = static_cast<double>(by_class.at(m.class_ids[ki]).size() - 1);
      for (double& v : s.v) v /= denom;
      regularize(s);
      m.covariances.push_back(std::move(s));
    }
  }

  for (const Matrix& cov : m.covariances) {
    Matrix l = cov;
    if (!cholesky(l))
      raise(Errc::SingularCovariance,
            "covariance not positive definite after regularization");
    m.log_dets.push_back(cholesky_logdet(l));
    m.chol_factors.push_back(std::move(l));
  }
  return m;
}

LdaPrediction lda_predict(const LdaModel& model, std::span<const double> x) {
  if (x.size() != model.dim) raise(Errc::DimensionMismatch, "lda_predict input");
  const double d = static_cast<double>(model.dim);
  const double log2pi = std::log(2.0 * M_PI);

  LdaPrediction out;
  out.log_scores.resize(model.class_ids.size());
  for (std::size_t ki = 0; ki < model.class_ids.size(); ++ki) {
    const Matrix& l = model.mode == LdaMode::Pooled ? model.chol_factors[0]
                                                    : model.chol_factors[ki];
    double logdet = model.mode == LdaMode::Pooled ? model.log_dets[0]
                                                  : model.log_dets[ki];
    std::vector<double> diff(model.dim);
    for (std::size_t i = 0; i < model.dim; ++i) diff[i] = x[i] - model.means[ki][i];
    std::vector<double> solved = cholesky_solve(l, diff);
    double maha = 0.0;
    for (std::size_t i = 0; i < model.dim; ++i) maha += diff[i] * solved[i];
    out.log_scores[ki] = std::log(model.priors[ki]) -
                         0.5 * (maha + logdet + d * log2pi);
  }
  std::size_t best = 0;
  for (std::size_t ki = 1; ki < out.log_scores.size(); ++ki)
    if (out.log_scores[ki] > out.log_scores[best]) best = ki;
  out.class_id = model.class_ids[best];
  return out;
}

double Kernel::operator()(std::span<const double> a, std::span<const double> b) const {
  if (a.size() != b.size()) raise(Errc::DimensionMismatch, "kernel arguments");
  if (type == KernelType::Linear) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

double median_pairwise_distance(const Matrix& x) {
  std::vector<double> dists;
  dists.reserve(x.rows * (x.rows - 1) / 2);
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = i + 1; j < x.rows; ++j) {
      double d2 = 0.0;
      for (std::size_t c = 0; c < x.cols; ++c) {
        double d = x(i, c) - x(j, c);
        d2 += d * d;
      }
      dists.push_back(std::sqrt(d2));
    }
  if (dists.empty()) return 1.0;
  std::sort(dists.begin(), dists.end());
  std::size_t n = dists.size();
  double median = n % 2 == 1 ? dists[n / 2]
                             : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
  return median > 0.0 ? median : 1.0;
}

namespace {

// One-vs-rest binary subproblem solved with sequential minimal optimization:
// pick a KKT violator, pair it with the partner maximizing |E_i - E_j| (with
// deterministic fallbacks over the remaining points), and solve the
// two-variable subproblem analytically. Sweeps over the full set alternate
// with sweeps over the non-bound alphas until a full sweep changes nothing.
// Returns false when max_passes sweeps still change pairs.
bool smo_binary(const Matrix& x, const std::vector<double>& y, const Kernel& kernel,
                double c, double tol, int max_passes, std::vector<double>& alpha,
                double& bias) {
  const std::size_t n = x.rows;
  alpha.assign(n, 0.0);
  bias = 0.0;

  // Cached kernel matrix; training sets here are small enough to afford it.
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double v = kernel(x.row(i), x.row(j));
      k[i * n + j] = v;
      k[j * n + i] = v;
    }

  // Error cache err[t] = f(t) - y[t], updated incrementally after each pair
  // step; with all alpha at zero, f(t) = bias = 0.
  std::vector<double> err(n);
  for (std::size_t t = 0; t < n; ++t) err[t] = -y[t];

  // Analytic two-variable step; returns false when the pair cannot move
  // (clipped box, flat curvature, or a negligible update).
  auto try_pair = [&](std::size_t i, std::size_t j) {
    double ei = err[i];
    double ej = err[j];
    double ai_old = alpha[i];
    double aj_old = alpha[j];
    double lo, hi;
    if (y[i] != y[j]) {
      lo = std::max(0.0, aj_old - ai_old);
      hi = std::min(c, c + aj_old - ai_old);
    } else {
      lo = std::max(0.0, ai_old + aj_old - c);
      hi = std::min(c, ai_old + aj_old);
    }
    if (lo >= hi) return false;
    double eta = 2.0 * k[i * n + j] - k[i * n + i] - k[j * n + j];
    if (eta >= 0.0) return false;

    double aj = aj_old - y[j] * (ei - ej) / eta;
    aj = std::clamp(aj, lo, hi);
    if (std::abs(aj - aj_old) < 1e-12) return false;
    double ai = ai_old + y[i] * y[j] * (aj_old - aj);
    // The complementary update can leave dust at the box edges; snap it so a
    // point meant to leave the working set does not linger as a fake support
    // vector that no pair step can clean up.
    const double snap = 1e-10 * c;
    if (ai < snap) ai = 0.0;
    if (ai > c - snap) ai = c;

    alpha[i] = ai;
    alpha[j] = aj;

    double b1 = bias - ei - y[i] * (ai - ai_old) * k[i * n + i] -
                y[j] * (aj - aj_old) * k[i * n + j];
    double b2 = bias - ej - y[i] * (ai - ai_old) * k[i * n + j] -
                y[j] * (aj - aj_old) * k[j * n + j];
    double new_bias;
    if (ai > 0.0 && ai < c) {
      new_bias = b1;
    } else if (aj > 0.0 && aj < c) {
      new_bias = b2;
    } else {
      new_bias = 0.5 * (b1 + b2);
    }

    double di = y[i] * (ai - ai_old);
    double dj = y[j] * (aj - aj_old);
    double db = new_bias - bias;
    bias = new_bias;
    for (std::size_t t = 0; t < n; ++t)
      err[t] += di * k[i * n + t] + dj * k[j * n + t] + db;
    return true;
  };

  auto non_bound = [&](std::size_t t) { return alpha[t] > 0.0 && alpha[t] < c; };

  // Second choice: maximize |E_i - E_j| over the non-bound alphas (or over
  // everything when none are free), ties to the lowest index. When that pair
  // is stuck at the box boundary, fall back to the remaining partners in
  // index order so a violator is never silently abandoned.
  auto examine = [&](std::size_t i) {
    double ei = err[i];
    bool violates = (y[i] * ei < -tol && alpha[i] < c) ||
                    (y[i] * ei > tol && alpha[i] > 0.0);
    if (!violates) return false;

    std::size_t jbest = n;
    double best_gap = -1.0;
    for (std::size_t t = 0; t < n; ++t) {
      if (t == i || !non_bound(t)) continue;
      double gap = std::abs(ei - err[t]);
      if (gap > best_gap) {
        best_gap = gap;
        jbest = t;
      }
    }
    if (jbest == n) {
      for (std::size_t t = 0; t < n; ++t) {
        if (t == i) continue;
        double gap = std::abs(ei - err[t]);
        if (gap > best_gap) {
          best_gap = gap;
          jbest = t;
        }
      }
    }
    if (jbest == n) return false;
    if (try_pair(i, jbest)) return true;
    for (std::size_t t = 0; t < n; ++t)
      if (t != i && t != jbest && non_bound(t) && try_pair(i, t)) return true;
    for (std::size_t t = 0; t < n; ++t)
      if (t != i && t != jbest && !non_bound(t) && try_pair(i, t)) return true;
    return false;
  };

  int passes = 0;
  bool examine_all = true;
  while (true) {
    if (passes >= max_passes) return false;
    ++passes;
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!examine_all && !non_bound(i)) continue;
      if (examine(i)) ++changed;
    }
    if (examine_all) {
      if (changed == 0) return true;  // a clean full sweep means KKT holds
      examine_all = false;
    } else if (changed == 0) {
      examine_all = true;
    }
  }
}

}  // namespace

SvmModel svm_fit(const Matrix& x, const std::vector<int>& y, KernelType kernel,
                 const SvmOptions& options) {
  if (x.rows != y.size()) raise(Errc::ShapeMismatch, "svm_fit rows vs labels");
  if (x.rows == 0 || x.cols == 0) raise(Errc::ShapeMismatch, "svm_fit empty input");
  if (!(options.c > 0.0)) raise(Errc::InvalidParameter, "C must be > 0");

  std::set<int> classes(y.begin(), y.end());
  if (classes.size() < 2)
    raise(Errc::DegenerateClass, "need at least 2 classes");

  SvmModel m;
  m.c = options.c;
  m.kernel.type = kernel;
  m.kernel.sigma = options.sigma > 0.0 ? options.sigma : median_pairwise_distance(x);
  m.class_ids.assign(classes.begin(), classes.end());

  for (int positive : m.class_ids) {
    std::vector<double> labels(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r)
      labels[r] = y[r] == positive ? 1.0 : -1.0;

    std::vector<double> alpha;
    double bias = 0.0;
    bool ok = smo_binary(x, labels, m.kernel, options.c, options.tol,
                         options.max_passes, alpha, bias);
    if (!ok) m.converged = false;

    SvmModel::Binary bin;
    bin.positive_class = positive;
    bin.bias = bias;
    for (std::size_t r = 0; r < x.rows; ++r) {
      if (alpha[r] == 0.0) continue;
      std::span<const double> row = x.row(r);
      bin.support_vectors.emplace_back(row.begin(), row.end());
      bin.alphas.push_back(alpha[r]);
      bin.labels.push_back(labels[r]);
    }
    m.binaries.push_back(std::move(bin));
  }
  return m;
}

double svm_decision(const SvmModel& model, const SvmModel::Binary& binary,
                    std::span<const double> x) {
  double s = binary.bias;
  for (std::size_t i = 0; i < binary.support_vectors.size(); ++i)
    s += binary.alphas[i] * binary.labels[i] *
         model.kernel(binary.support_vectors[i], x);
  return s;
}

int svm_predict(const SvmModel& model, std::span<const double> x) {
  if (model.binaries.empty()) raise(Errc::DegenerateClass, "empty model");
  std::size_t best = 0;
  double best_value = svm_decision(model, model.binaries[0], x);
  for (std::size_t i = 1; i < model.binaries.size(); ++i) {
    double v = svm_decision(model, model.binaries[i], x);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return model.binaries[best].positive_class;
}

// --- JSON round-trips ------------------------------------------------------

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  return json{{"rows", m.rows}, {"cols", m.cols}, {"values", m.v}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.v = j.at("values").get<std::vector<double>>();
  if (m.v.size() != m.rows * m.cols)
    raise(Errc::InvalidConfig, "matrix value count mismatch");
  return m;
}

}  // namespace

std::string to_json(const StandardScaler& scaler) {
  json j{{"schema_version", 1},
         {"kind", "standard_scaler"},
         {"means", scaler.means},
         {"stds", scaler.stds}};
  return j.dump(2);
}

StandardScaler scaler_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("kind") != "standard_scaler") raise(Errc::InvalidConfig, "wrong kind");
  StandardScaler s;
  s.means = j.at("means").get<std::vector<double>>();
  s.stds = j.at("stds").get<std::vector<double>>();
  return s;
}

std::string to_json(const LdaModel& model) {
  json covs = json::array();
  for (const Matrix& c : model.covariances) covs.push_back(matrix_to_json(c));
  json j{{"schema_version", 1},
         {"kind", "lda"},
         {"mode", model.mode == LdaMode::Pooled ? "pooled" : "per_class"},
         {"dim", model.dim},
         {"class_ids", model.class_ids},
         {"priors", model.priors},
         {"means", model.means},
         {"covariances", covs}};
  return j.dump(2);
}

LdaModel lda_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("kind") != "lda") raise(Errc::InvalidConfig, "wrong kind");
  LdaModel m;
  m.mode = j.at("mode") == "pooled" ? LdaMode::Pooled : LdaMode::PerClass;
  m.dim = j.at("dim").get<std::size_t>();
  m.class_ids = j.at("class_ids").get<std::vector<int>>();
  m.priors = j.at("priors").get<std::vector<double>>();
  m.means = j.at("means").get<std::vector<std::vector<double>>>();
  for (const json& c : j.at("covariances")) m.covariances.push_back(matrix_from_json(c));
  for (const Matrix& cov : m.covariances) {
    Matrix l = cov;
    if (!cholesky(l)) raise(Errc::SingularCovariance, "stored covariance");
    m.log_dets.push_back(cholesky_logdet(l));
    m.chol_factors.push_back(std::move(l));
  }
  return m;
}

std::string to_json(const SvmModel& model) {
  json bins = json::array();
  for (const SvmModel::Binary& b : model.binaries) {
    bins.push_back(json{{"positive_class", b.positive_class},
                        {"bias", b.bias},
                        {"support_vectors", b.support_vectors},
                        {"alphas", b.alphas},
                        {"labels", b.labels}});
  }
  json j{{"schema_version", 1},
         {"kind", "svm"},
         {"kernel", model.kernel.type == KernelType::Linear ? "linear" : "rbf"},
         {"sigma", model.kernel.sigma},
         {"c", model.c},
         {"converged", model.converged},
         {"class_ids", model.class_ids},
         {"binaries", bins}};
  return j.dump(2);
}

SvmModel svm_from_json(const std::string& text) {
  json j = json::parse(text);
  if (j.at("kind") != "svm") raise(Errc::InvalidConfig, "wrong kind");
  SvmModel m;
  m.kernel.type = j.at("kernel") == "linear" ? KernelType::Linear : KernelType::Rbf;
  m.kernel.sigma = j.at("sigma").get<double>();
  m.c = j.at("c").get<double>();
  m.converged = j.at("converged").get<bool>();
  m.class_ids = j.at("class_ids").get<std::vector<int>>();
  for (const json& b : j.at("binaries")) {
    SvmModel::Binary bin;
    bin.positive_class = b.at("positive_class").get<int>();
    bin.bias = b.at("bias").get<double>();
    bin.support_vectors = b.at("support_vectors").get<std::vector<std::vector<double>>>();
    bin.alphas = b.at("alphas").get<std::vector<double>>();
    bin.labels = b.at("labels").get<std::vector<double>>();
    m.binaries.push_back(std::move(bin));
  }
  return m;
}

}  // namespace painsig
