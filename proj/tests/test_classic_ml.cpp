#include <doctest.h>

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "painsig/classic_ml.hpp"
#include "painsig/errors.hpp"
#include "painsig/la.hpp"

using namespace painsig;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return static_cast<Errc>(-1);
}

Matrix matrix_of(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

// 3x3 determinant and inverse by cofactor expansion / adjugate: a second,
// Cholesky-free path through the density computation.
double det3(const Matrix& a) {
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Matrix inv3(const Matrix& a) {
  double d = det3(a);
  Matrix r(3, 3);
  r(0, 0) = (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) / d;
  r(0, 1) = (a(0, 2) * a(2, 1) - a(0, 1) * a(2, 2)) / d;
  r(0, 2) = (a(0, 1) * a(1, 2) - a(0, 2) * a(1, 1)) / d;
  r(1, 0) = (a(1, 2) * a(2, 0) - a(1, 0) * a(2, 2)) / d;
  r(1, 1) = (a(0, 0) * a(2, 2) - a(0, 2) * a(2, 0)) / d;
  r(1, 2) = (a(0, 2) * a(1, 0) - a(0, 0) * a(1, 2)) / d;
  r(2, 0) = (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0)) / d;
  r(2, 1) = (a(0, 1) * a(2, 0) - a(0, 0) * a(2, 1)) / d;
  r(2, 2) = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)) / d;
  return r;
}

// Gaussian log density with explicit inverse and determinant.
double ref_log_density(std::span<const double> x, const std::vector<double>& mean,
                       const Matrix& cov) {
  const double pi = std::acos(-1.0);
  Matrix inv = inv3(cov);
  std::array<double, 3> diff{};
  for (int i = 0; i < 3; ++i) diff[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)];
  double maha = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) maha += diff[i] * inv(i, j) * diff[j];
  return -0.5 * (maha + std::log(det3(cov)) + 3.0 * std::log(2.0 * pi));
}

// Recomputes the regularized covariance(s) exactly as documented: scatter
// sums, pooled /(n-K) or per-class /(n_k-1), ridge 1e-6 * trace / d.
std::map<int, Matrix> ref_covariances(const Matrix& x, const std::vector<int>& y,
                                      LdaMode mode,
                                      std::map<int, std::vector<double>>& means_out) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t r = 0; r < x.rows; ++r) by_class[y[r]].push_back(r);
  const std::size_t d = x.cols;

  means_out.clear();
  for (auto& [cls, rows] : by_class) {
    std::vector<double> mean(d, 0.0);
    for (std::size_t r : rows)
      for (std::size_t c = 0; c < d; ++c) mean[c] += x(r, c);
    for (double& v : mean) v /= static_cast<double>(rows.size());
    means_out[cls] = mean;
  }

  auto scatter = [&](int cls) {
    Matrix s(d, d);
    for (std::size_t r : by_class[cls])
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
          s(i, j) += (x(r, i) - means_out[cls][i]) * (x(r, j) - means_out[cls][j]);
    return s;
  };
  auto ridge = [&](Matrix& cov) {
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += cov(i, i);
    for (std::size_t i = 0; i < d; ++i)
      cov(i, i) += 1e-6 * trace / static_cast<double>(d);
  };

  std::map<int, Matrix> out;
  if (mode == LdaMode::Pooled) {
    Matrix pooled(d, d);
    for (auto& [cls, rows] : by_class) {
      Matrix s = scatter(cls);
      for (std::size_t i = 0; i < d * d; ++i) pooled.v[i] += s.v[i];
    }
    for (double& v : pooled.v)
      v /= static_cast<double>(x.rows - by_class.size());
    ridge(pooled);
    for (auto& [cls, rows] : by_class) out[cls] = pooled;
  } else {
    for (auto& [cls, rows] : by_class) {
      Matrix s = scatter(cls);
      for (double& v : s.v) v /= static_cast<double>(rows.size() - 1);
      ridge(s);
      out[cls] = s;
    }
  }
  return out;
}

struct Blobs {
  Matrix x;
  std::vector<int> y;
};

Blobs make_blobs(const std::vector<std::array<double, 2>>& centers, int per_class,
                 double spread, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd(0.0, spread);
  Blobs b;
  b.x = Matrix(centers.size() * static_cast<std::size_t>(per_class), 2);
  std::size_t r = 0;
  for (std::size_t k = 0; k < centers.size(); ++k)
    for (int i = 0; i < per_class; ++i, ++r) {
      b.x(r, 0) = centers[k][0] + nd(rng);
      b.x(r, 1) = centers[k][1] + nd(rng);
      b.y.push_back(static_cast<int>(k));
    }
  return b;
}

}  // namespace

TEST_CASE("scaler fits population statistics per column") {
  Matrix x = matrix_of({{1.0, 10.0}, {3.0, 20.0}, {5.0, 30.0}});
  StandardScaler s = StandardScaler::fit(x);
  REQUIRE(s.means.size() == 2);
  CHECK(s.means[0] == 3.0);
  CHECK(s.means[1] == 20.0);
  CHECK(s.stds[0] == doctest::Approx(std::sqrt(8.0 / 3.0)).epsilon(1e-15));
  CHECK(s.stds[1] == doctest::Approx(std::sqrt(200.0 / 3.0)).epsilon(1e-15));

  Matrix t = s.transform_matrix(x);
  for (std::size_t c = 0; c < 2; ++c) {
    double mean = 0.0, var = 0.0;
    for (std::size_t r = 0; r < 3; ++r) mean += t(r, c);
    mean /= 3.0;
    for (std::size_t r = 0; r < 3; ++r) var += (t(r, c) - mean) * (t(r, c) - mean);
    var /= 3.0;
    CHECK(mean == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
  }

  std::vector<double> one = s.transform(std::vector<double>{5.0, 10.0});
  CHECK(one[0] == doctest::Approx(2.0 / std::sqrt(8.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("scaler floors a zero-variance column") {
  Matrix x = matrix_of({{7.0, 1.0}, {7.0, 2.0}, {7.0, 3.0}});
  StandardScaler s = StandardScaler::fit(x);
  CHECK(s.stds[0] == 1e-12);
  // the constant value maps to exactly zero, not to an explosion
  CHECK(s.transform(std::vector<double>{7.0, 2.0})[0] == 0.0);
}

TEST_CASE("scaler rejects shape problems") {
  CHECK(code_of([] { StandardScaler::fit(Matrix()); }) == Errc::ShapeMismatch);
  CHECK(code_of([] {
          Matrix x = matrix_of({{1.0, 2.0}, {3.0, 4.0}});
          StandardScaler s = StandardScaler::fit(x);
          s.transform(std::vector<double>{1.0});
        }) == Errc::DimensionMismatch);
}

TEST_CASE("lda log scores match an explicit density recompute") {
  std::mt19937 rng(99u);
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix x(40, 3);
  std::vector<int> y(40);
  for (std::size_t r = 0; r < 40; ++r) {
    bool second = r >= 15;  // unbalanced on purpose: priors 15/40 and 25/40
    y[r] = second ? 4 : 1;
    x(r, 0) = (second ? 2.0 : -1.0) + nd(rng);
    x(r, 1) = (second ? -1.0 : 1.5) + nd(rng);
    x(r, 2) = (second ? 0.5 : 0.0) + nd(rng);
  }

  for (LdaMode mode : {LdaMode::Pooled, LdaMode::PerClass}) {
    CAPTURE(static_cast<int>(mode));
    LdaModel m = lda_fit(x, y, mode);
    REQUIRE(m.class_ids == std::vector<int>{1, 4});
    CHECK(m.priors[0] == 15.0 / 40.0);
    CHECK(m.priors[1] == 25.0 / 40.0);

    std::map<int, std::vector<double>> ref_means;
    std::map<int, Matrix> ref_covs = ref_covariances(x, y, mode, ref_means);

    // stored covariance agrees with the documented construction
    const Matrix& c0 = m.covariances[0];
    for (std::size_t i = 0; i < 9; ++i)
      CHECK(c0.v[i] == doctest::Approx(ref_covs[1].v[i]).epsilon(1e-12));

    std::vector<double> probe = {0.3, 0.4, -0.2};
    LdaPrediction p = lda_predict(m, probe);
    for (std::size_t ki = 0; ki < 2; ++ki) {
      int cls = m.class_ids[ki];
      double want = std::log(m.priors[ki]) +
                    ref_log_density(probe, ref_means[cls], ref_covs[cls]);
      CHECK(p.log_scores[ki] == doctest::Approx(want).epsilon(1e-9));
    }
    CHECK(p.class_id == m.class_ids[p.log_scores[0] >= p.log_scores[1] ? 0 : 1]);
  }
}

TEST_CASE("lda separates clean blobs in both modes") {
  Blobs b = make_blobs({{0.0, 0.0}, {8.0, 0.0}, {0.0, 8.0}}, 15, 0.5, 7u);
  for (LdaMode mode : {LdaMode::Pooled, LdaMode::PerClass}) {
    LdaModel m = lda_fit(b.x, b.y, mode);
    std::size_t hits = 0;
    for (std::size_t r = 0; r < b.x.rows; ++r)
      if (lda_predict(m, b.x.row(r)).class_id == b.y[r]) ++hits;
    CHECK(hits == b.x.rows);
  }
}

TEST_CASE("lda ties break to the lowest class id") {
  // identical per-class data makes the scores of both classes bit-identical
  Matrix x = matrix_of({{0.0, 0.0}, {1.0, 1.0}, {0.0, 0.0}, {1.0, 1.0}});
  std::vector<int> y = {7, 7, 3, 3};
  LdaModel m = lda_fit(x, y);
  REQUIRE(m.class_ids == std::vector<int>{3, 7});
  LdaPrediction p = lda_predict(m, std::vector<double>{0.3, 0.3});
  CHECK(p.log_scores[0] == p.log_scores[1]);
  CHECK(p.class_id == 3);
}

TEST_CASE("lda error paths") {
  CHECK(code_of([] {
          Matrix x = matrix_of({{1.0}, {2.0}, {3.0}});
          lda_fit(x, {5, 5, 5});
        }) == Errc::DegenerateClass);
  CHECK(code_of([] {
          Matrix x = matrix_of({{1.0}, {2.0}, {3.0}});
          lda_fit(x, {0, 0, 1});  // class 1 has a single row
        }) == Errc::DegenerateClass);
  CHECK(code_of([] {
          Matrix x = matrix_of({{1.0}, {2.0}});
          lda_fit(x, {0, 1});
        }) == Errc::DegenerateClass);
  CHECK(code_of([] {
          // all-zero data: zero trace disables the ridge, nothing is PD
          Matrix x(4, 2);
          lda_fit(x, {0, 0, 1, 1});
        }) == Errc::SingularCovariance);
  CHECK(code_of([] { lda_fit(Matrix(), {}); }) == Errc::ShapeMismatch);
  CHECK(code_of([] {
          Matrix x = matrix_of({{1.0}, {2.0}});
          lda_fit(x, {0});
        }) == Errc::ShapeMismatch);
  CHECK(code_of([] {
          Matrix x = matrix_of({{1.0, 0.0}, {2.0, 1.0}, {3.0, 0.0}, {4.0, 1.0}});
          LdaModel m = lda_fit(x, {0, 0, 1, 1});
          lda_predict(m, std::vector<double>{1.0});
        }) == Errc::DimensionMismatch);
}

TEST_CASE("kernels follow their formulas") {
  Kernel lin{KernelType::Linear, 1.0};
  std::vector<double> a = {1.0, -2.0, 3.0};
  std::vector<double> b = {4.0, 0.5, -1.0};
  CHECK(lin(a, b) == 4.0 - 1.0 - 3.0);

  Kernel rbf{KernelType::Rbf, 0.7};
  double d2 = 9.0 + 6.25 + 16.0;
  CHECK(rbf(a, b) == doctest::Approx(std::exp(-d2 / (2.0 * 0.49))).epsilon(1e-15));
  CHECK(rbf(a, a) == 1.0);

  CHECK(code_of([&] { lin(a, std::vector<double>{1.0}); }) == Errc::DimensionMismatch);
}

TEST_CASE("median pairwise distance covers odd, even, and degenerate counts") {
  CHECK(median_pairwise_distance(matrix_of({{0.0}, {1.0}, {3.0}})) == 2.0);
  // distances {1,2,3,3,5,6} -> mean of the middle two
  CHECK(median_pairwise_distance(matrix_of({{0.0}, {1.0}, {3.0}, {6.0}})) == 3.0);
  CHECK(median_pairwise_distance(matrix_of({{2.0}, {2.0}, {2.0}})) == 1.0);
  CHECK(median_pairwise_distance(matrix_of({{5.0}})) == 1.0);
}

TEST_CASE("svm training satisfies the dual constraints") {
  Blobs b = make_blobs({{0.0, 0.0}, {6.0, 6.0}}, 15, 0.8, 21u);
  SvmOptions opt;
  opt.c = 1.0;
  SvmModel m = svm_fit(b.x, b.y, KernelType::Linear, opt);
  CHECK(m.converged);
  REQUIRE(m.binaries.size() == 2);

  for (const SvmModel::Binary& bin : m.binaries) {
    double alpha_dot_y = 0.0;
    for (std::size_t i = 0; i < bin.alphas.size(); ++i) {
      CHECK(bin.alphas[i] > 0.0);
      CHECK(bin.alphas[i] <= opt.c + 1e-12);
      alpha_dot_y += bin.alphas[i] * bin.labels[i];
    }
    CHECK(std::abs(alpha_dot_y) <= 1e-6);

    // non-bound support vectors sit on the margin within the training tol
    for (std::size_t i = 0; i < bin.alphas.size(); ++i) {
      if (bin.alphas[i] >= opt.c - 1e-9) continue;
      double f = svm_decision(m, bin, bin.support_vectors[i]);
      CHECK(std::abs(bin.labels[i] * f - 1.0) <= opt.tol + 1e-6);
    }
  }

  std::size_t hits = 0;
  for (std::size_t r = 0; r < b.x.rows; ++r)
    if (svm_predict(m, b.x.row(r)) == b.y[r]) ++hits;
  CHECK(hits == b.x.rows);
}

TEST_CASE("rbf kernel solves xor where the linear kernel cannot") {
  Matrix x = matrix_of({{0.0, 0.0}, {1.0, 1.0}, {0.0, 1.0}, {1.0, 0.0}});
  std::vector<int> y = {1, 1, 0, 0};

  SvmOptions opt;
  opt.c = 10.0;
  opt.sigma = 0.5;
  SvmModel rbf = svm_fit(x, y, KernelType::Rbf, opt);
  std::size_t rbf_hits = 0;
  for (std::size_t r = 0; r < 4; ++r)
    if (svm_predict(rbf, x.row(r)) == y[r]) ++rbf_hits;
  CHECK(rbf_hits == 4);

  SvmModel lin = svm_fit(x, y, KernelType::Linear, opt);
  std::size_t lin_hits = 0;
  for (std::size_t r = 0; r < 4; ++r)
    if (svm_predict(lin, x.row(r)) == y[r]) ++lin_hits;
  CHECK(lin_hits <= 3);
}

TEST_CASE("svm handles three classes one-vs-rest") {
  Blobs b = make_blobs({{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}}, 12, 0.6, 31u);
  SvmModel m = svm_fit(b.x, b.y, KernelType::Linear);
  CHECK(m.class_ids == std::vector<int>{0, 1, 2});
  REQUIRE(m.binaries.size() == 3);
  CHECK(m.converged);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < b.x.rows; ++r)
    if (svm_predict(m, b.x.row(r)) == b.y[r]) ++hits;
  CHECK(hits == b.x.rows);
}

TEST_CASE("svm decision follows the kernel expansion by hand") {
  SvmModel m;
  m.kernel = {KernelType::Linear, 1.0};
  SvmModel::Binary bin;
  bin.positive_class = 9;
  bin.bias = -0.5;
  bin.support_vectors = {{1.0, 0.0}, {0.0, 2.0}};
  bin.alphas = {2.0, 0.25};
  bin.labels = {1.0, -1.0};
  // 2*1*(x.(1,0)) - 0.25*(x.(0,2)) - 0.5 at x=(3,4): 6 - 2 - 0.5
  CHECK(svm_decision(m, bin, std::vector<double>{3.0, 4.0}) == 3.5);
}

TEST_CASE("svm prediction ties break to the first binary") {
  SvmModel m;
  m.kernel = {KernelType::Linear, 1.0};
  SvmModel::Binary first, second;
  first.positive_class = 2;
  second.positive_class = 5;
  first.bias = second.bias = 0.25;  // no support vectors: both decide 0.25
  m.class_ids = {2, 5};
  m.binaries = {first, second};
  CHECK(svm_predict(m, std::vector<double>{1.0, 1.0}) == 2);
}

TEST_CASE("sigma selection: explicit beats the median heuristic") {
  Blobs b = make_blobs({{0.0, 0.0}, {4.0, 4.0}}, 6, 0.5, 13u);
  SvmOptions opt;
  opt.sigma = 2.5;
  SvmModel m = svm_fit(b.x, b.y, KernelType::Rbf, opt);
  CHECK(m.kernel.sigma == 2.5);

  opt.sigma = 0.0;
  SvmModel h = svm_fit(b.x, b.y, KernelType::Rbf, opt);
  CHECK(h.kernel.sigma == median_pairwise_distance(b.x));
}

TEST_CASE("svm error paths") {
  Matrix x = matrix_of({{1.0, 0.0}, {2.0, 1.0}});
  CHECK(code_of([&] { svm_fit(x, {3, 3}, KernelType::Linear); }) == Errc::DegenerateClass);
  CHECK(code_of([&] {
          SvmOptions opt;
          opt.c = 0.0;
          svm_fit(x, {0, 1}, KernelType::Linear, opt);
        }) == Errc::InvalidParameter);
  CHECK(code_of([&] { svm_fit(x, {0}, KernelType::Linear); }) == Errc::ShapeMismatch);
  CHECK(code_of([] { svm_fit(Matrix(), {}, KernelType::Linear); }) == Errc::ShapeMismatch);
  CHECK(code_of([] {
          SvmModel empty;
          svm_predict(empty, std::vector<double>{1.0});
        }) == Errc::DegenerateClass);
}

TEST_CASE("scaler json round trip is lossless") {
  Matrix x = matrix_of({{0.1, 7.3}, {2.4, -1.9}, {5.5, 0.33}});
  StandardScaler s = StandardScaler::fit(x);
  StandardScaler back = scaler_from_json(to_json(s));
  CHECK(back.means == s.means);
  CHECK(back.stds == s.stds);
  CHECK(code_of([&] { scaler_from_json(to_json(lda_fit(
            matrix_of({{0.0, 1.0}, {1.0, 0.0}, {4.0, 5.0}, {5.0, 4.0}}),
            {0, 0, 1, 1}))); }) == Errc::InvalidConfig);
}

TEST_CASE("lda json round trip preserves predictions") {
  Blobs b = make_blobs({{0.0, 0.0}, {5.0, 5.0}}, 8, 0.7, 17u);
  for (LdaMode mode : {LdaMode::Pooled, LdaMode::PerClass}) {
    LdaModel m = lda_fit(b.x, b.y, mode);
    LdaModel back = lda_from_json(to_json(m));
    CHECK(back.mode == m.mode);
    CHECK(back.dim == m.dim);
    CHECK(back.class_ids == m.class_ids);
    CHECK(back.priors == m.priors);
    CHECK(back.means == m.means);
    REQUIRE(back.covariances.size() == m.covariances.size());
    for (std::size_t i = 0; i < m.covariances.size(); ++i)
      CHECK(back.covariances[i].v == m.covariances[i].v);
    // factors are recomputed on load from identical covariances
    for (std::size_t i = 0; i < m.log_dets.size(); ++i)
      CHECK(back.log_dets[i] == m.log_dets[i]);
    std::vector<double> probe = {2.5, 2.5};
    LdaPrediction p1 = lda_predict(m, probe);
    LdaPrediction p2 = lda_predict(back, probe);
    CHECK(p1.class_id == p2.class_id);
    CHECK(p1.log_scores == p2.log_scores);
  }
}

TEST_CASE("svm json round trip preserves decisions") {
  Blobs b = make_blobs({{0.0, 0.0}, {6.0, 6.0}}, 8, 0.8, 23u);
  SvmModel m = svm_fit(b.x, b.y, KernelType::Rbf);
  SvmModel back = svm_from_json(to_json(m));
  CHECK(back.kernel.type == m.kernel.type);
  CHECK(back.kernel.sigma == m.kernel.sigma);
  CHECK(back.c == m.c);
  CHECK(back.converged == m.converged);
  CHECK(back.class_ids == m.class_ids);
  REQUIRE(back.binaries.size() == m.binaries.size());
  for (std::size_t i = 0; i < m.binaries.size(); ++i) {
    CHECK(back.binaries[i].bias == m.binaries[i].bias);
    CHECK(back.binaries[i].alphas == m.binaries[i].alphas);
    CHECK(back.binaries[i].support_vectors == m.binaries[i].support_vectors);
  }
  for (std::size_t r = 0; r < b.x.rows; ++r) {
    CHECK(svm_predict(back, b.x.row(r)) == svm_predict(m, b.x.row(r)));
    for (std::size_t i = 0; i < m.binaries.size(); ++i)
      CHECK(svm_decision(back, back.binaries[i], b.x.row(r)) ==
            svm_decision(m, m.binaries[i], b.x.row(r)));
  }
  CHECK(code_of([&] { svm_from_json(to_json(StandardScaler::fit(b.x))); }) ==
        Errc::InvalidConfig);
}
