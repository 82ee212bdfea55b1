#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "psrnn/features.hpp"

using namespace psrnn;

namespace {

MatrixXd rowset(std::initializer_list<std::initializer_list<double>> rows) {
  MatrixXd m(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return m;
}

double gauss_kernel(const VectorXd& x, const VectorXd& y, double sigma) {
  return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
}

}  // namespace

TEST_CASE("fit_bandwidth closed forms") {
  CHECK(fit_bandwidth(rowset({{0.0}, {1.0}, {3.0}})) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit_bandwidth(rowset({{0.0, 0.0}, {3.0, 4.0}})) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK_THROWS_AS(fit_bandwidth(rowset({{1.0}, {1.0}, {1.0}})), DegenerateSample);
  CHECK_THROWS_AS(fit_bandwidth(rowset({{1.0}})), DegenerateSample);
}

TEST_CASE("fit_bandwidth subsample is deterministic and sane") {
  Rng rng(31);
  MatrixXd pts(5000, 3);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (int j = 0; j < 3; ++j) pts(i, j) = rnorm(rng);
  double s1 = fit_bandwidth(pts, 7);
  double s2 = fit_bandwidth(pts, 7);
  CHECK(s1 == s2);
  // Median distance of 3-d standard normal pairs is ~ sqrt(2*3) within a wide margin.
  CHECK(s1 > 1.0);
  CHECK(s1 < 4.0);
}

TEST_CASE("one_hot") {
  VectorXd e = one_hot(2, 4);
  CHECK(e.size() == 4);
  CHECK(e[2] == 1.0);
  CHECK(e.sum() == 1.0);
  CHECK_THROWS_AS(one_hot(4, 4), DimensionMismatch);
  CHECK_THROWS_AS(one_hot(-1, 4), DimensionMismatch);
}

TEST_CASE("rff map is deterministic and bounded") {
  RffMap m = sample_rff(3, 64, 1.5, 99);
  RffMap m2 = sample_rff(3, 64, 1.5, 99);
  CHECK((m.frequencies - m2.frequencies).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m.phases - m2.phases).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.scale == doctest::Approx(std::sqrt(2.0 / 64.0)).epsilon(1e-15));

  Rng rng(32);
  VectorXd x(3);
  for (int i = 0; i < 3; ++i) x[i] = rnorm(rng);
  VectorXd f = apply_rff(m, x);
  CHECK(f.size() == 64);
  CHECK(f.cwiseAbs().maxCoeff() <= m.scale + 1e-15);
  CHECK_THROWS_AS(apply_rff(m, VectorXd(VectorXd::Zero(4))), DimensionMismatch);
}

TEST_CASE("rff inner products approximate the Gaussian kernel") {
  const double sigma = 1.3;
  RffMap m = sample_rff(4, 2000, sigma, 123);
  Rng rng(33);

  VectorXd x(4);
  for (int i = 0; i < 4; ++i) x[i] = rnorm(rng);
  CHECK(std::abs(apply_rff(m, x).dot(apply_rff(m, x)) - 1.0) <= 0.1);

  VectorXd far = x;
  far[0] += 10.0 * sigma;
  CHECK(std::abs(apply_rff(m, x).dot(apply_rff(m, far))) <= 0.1);

  double mean_err = 0.0, max_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    VectorXd a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a[i] = rnorm(rng);
      b[i] = rnorm(rng);
    }
    double err = std::abs(apply_rff(m, a).dot(apply_rff(m, b)) - gauss_kernel(a, b, sigma));
    mean_err += err;
    max_err = std::max(max_err, err);
  }
  mean_err /= 100.0;
  CHECK(mean_err <= 0.05);
  CHECK(max_err <= 0.15);
}

TEST_CASE("row-wise rff application matches the vector path and the reference") {
  RffMap m = sample_rff(2, 40, 0.8, 5);
  Rng rng(34);
  MatrixXd X(9, 2);
  for (Eigen::Index i = 0; i < 9; ++i)
    for (int j = 0; j < 2; ++j) X(i, j) = rnorm(rng);
  MatrixXd F = apply_rff(m, X);
  for (Eigen::Index i = 0; i < 9; ++i)
    CHECK((F.row(i).transpose() - apply_rff(m, VectorXd(X.row(i)))).cwiseAbs().maxCoeff() <=
          1e-15);
  CHECK((F - ref::apply_rff(m, X)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("fit_projection produces an orthonormal basis and preserves spanned data") {
  Rng rng(35);
  // Data spanning exactly a 3-dim affine subspace of R^6.
  MatrixXd basis(3, 6), coef(40, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 6; ++j) basis(i, j) = rnorm(rng);
  for (int i = 0; i < 40; ++i)
    for (int j = 0; j < 3; ++j) coef(i, j) = rnorm(rng);
  MatrixXd F = coef * basis;
  F.rowwise() += VectorXd::Unit(6, 0).transpose() * 2.5;

  Projection p = fit_projection(F, 3);
  CHECK(!p.rank_deficient);
  CHECK((p.basis * p.basis.transpose() - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <=
        1e-10);

  // Projecting and lifting back reproduces the centered data exactly.
  for (Eigen::Index i = 0; i < F.rows(); ++i) {
    VectorXd x = F.row(i);
    VectorXd lifted = p.basis.transpose() * project(p, x) + p.mean;
    CHECK((lifted - x).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("fit_projection flags rank deficiency") {
  MatrixXd F = MatrixXd::Zero(10, 4);
  for (int i = 0; i < 10; ++i) F(i, 0) = i;  // rank-1 after centering
  Warnings w;
  Projection p = fit_projection(F, 3, &w);
  CHECK(p.rank_deficient);
  CHECK(!w.empty());

  Projection p1 = fit_projection(F, 1);
  CHECK(!p1.rank_deficient);
  // Rank-1 data, d_out=1: projection keeps all variance.
  double total = 0.0, kept = 0.0;
  VectorXd mean = F.colwise().mean();
  for (int i = 0; i < 10; ++i) {
    VectorXd x = F.row(i).transpose() - mean;
    total += x.squaredNorm();
    kept += project(p1, VectorXd(F.row(i))).squaredNorm();
  }
  CHECK(kept == doctest::Approx(total).epsilon(1e-9));
}

TEST_CASE("augment_constant") {
  VectorXd x(2);
  x << 1, 2;
  VectorXd a = augment_constant(x, 1.0);
  REQUIRE(a.size() == 3);
  CHECK(a[0] == 1.0);
  CHECK(a[1] == 2.0);
  CHECK(a[2] == 1.0);
  CHECK(augment_constant(x, 0.0).norm() == doctest::Approx(x.norm()).epsilon(1e-15));
}

TEST_CASE("larger constant features shrink the angle between distinct states") {
  // The shared constant coordinate pulls every feature vector toward a
  // common axis, so two-norm directions approach sum-normalized ones.
  VectorXd x(3), y(3);
  x << 0.2, 0.5, 0.3;
  y << 0.7, 0.1, 0.2;
  double prev = 1e300;
  for (double c : {1.0, 10.0, 100.0}) {
    VectorXd a = augment_constant(x, c).normalized();
    VectorXd b = augment_constant(y, c).normalized();
    double angle = std::acos(std::min(1.0, a.dot(b)));
    CHECK(angle < prev);
    prev = angle;
  }
  CHECK(prev <= 1e-2);  // nearly collinear at c=100
}

TEST_CASE("discrete triples on the smallest legal sequence") {
  // alphabet {a,b}, sequence "ab", p=1, k=1: exactly one window position.
  TripleSet ts = build_triples({{0, 1}}, 2, WindowSpec{1, 1});
  REQUIRE(ts.n == 1);
  CHECK(ts.eta.row(0).transpose() == one_hot(0, 2));
  CHECK(ts.omega.row(0).transpose() == one_hot(1, 2));
  CHECK(ts.phi.row(0).transpose() == one_hot(1, 2));
  CHECK(ts.has_next[0] == 0);  // no room for phi_{t+1}
}

TEST_CASE("discrete triple windows align exhaustively") {
  // Length-12 synthetic sequence, p=2, k=3: check every emitted row against
  // a re-slice of the raw sequence.
  std::vector<int> seq = {0, 1, 2, 0, 2, 1, 1, 0, 2, 2, 1, 0};
  const int A = 3, p = 2, k = 3;
  TripleSet ts = build_triples({seq}, A, WindowSpec{p, k});
  const long T = static_cast<long>(seq.size());
  long row = 0;
  for (long t = p; t + k <= T; ++t, ++row) {
    VectorXd eta(p * A), phi(k * A);
    eta.setZero();
    phi.setZero();
    for (int i = 0; i < p; ++i) eta[i * A + seq[static_cast<std::size_t>(t - p + i)]] = 1.0;
    for (int i = 0; i < k; ++i) phi[i * A + seq[static_cast<std::size_t>(t + i)]] = 1.0;
    CHECK((ts.eta.row(row).transpose() - eta).cwiseAbs().maxCoeff() == 0.0);
    CHECK((ts.phi.row(row).transpose() - phi).cwiseAbs().maxCoeff() == 0.0);
    CHECK(ts.omega.row(row).transpose() == one_hot(seq[static_cast<std::size_t>(t)], A));
    bool expect_next = t + 1 + k <= T;
    CHECK(static_cast<bool>(ts.has_next[static_cast<std::size_t>(row)]) == expect_next);
    if (expect_next) {
      VectorXd phi_next(k * A);
      phi_next.setZero();
      for (int i = 0; i < k; ++i)
        phi_next[i * A + seq[static_cast<std::size_t>(t + 1 + i)]] = 1.0;
      CHECK((ts.phi_next.row(row).transpose() - phi_next).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  CHECK(row == ts.n);
}

TEST_CASE("too-short sequences are rejected") {
  CHECK_THROWS_AS(build_triples({{0, 1, 0}}, 2, WindowSpec{2, 2}), SequenceTooShort);
}

TEST_CASE("continuous triples match manual encoding") {
  Rng rng(36);
  MatrixXd seq(30, 2);
  for (Eigen::Index i = 0; i < 30; ++i)
    for (int j = 0; j < 2; ++j) seq(i, j) = rnorm(rng);

  WindowSpec w{2, 3};
  StreamEncoder hist{sample_rff(4, 50, 1.0, 1), Projection{}};
  StreamEncoder obs{sample_rff(2, 50, 1.0, 2), Projection{}};
  StreamEncoder fut{sample_rff(6, 50, 1.0, 3), Projection{}};
  // Fit projections on stacked windows drawn from the sequence itself.
  {
    MatrixXd H(26, 4), O(26, 2), F(26, 6);
    for (long t = 2; t + 3 <= 28; ++t) {
      H.row(t - 2) = stack_window(seq, t - 2, 2).transpose();
      O.row(t - 2) = seq.row(t);
      F.row(t - 2) = stack_window(seq, t, 3).transpose();
    }
    hist.proj = fit_projection(apply_rff(hist.rff, MatrixXd(H.topRows(23))), 5);
    obs.proj = fit_projection(apply_rff(obs.rff, MatrixXd(O.topRows(23))), 5);
    fut.proj = fit_projection(apply_rff(fut.rff, MatrixXd(F.topRows(23))), 5);
  }

  TripleSet ts = build_triples(std::vector<MatrixXd>{seq}, w, hist, obs, fut);
  const long T = 30;
  long row = 0;
  for (long t = 2; t + 3 <= T; ++t, ++row) {
    CHECK((ts.eta.row(row).transpose() - hist.encode(stack_window(seq, t - 2, 2)))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    CHECK((ts.omega.row(row).transpose() - obs.encode(VectorXd(seq.row(t))))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    CHECK((ts.phi.row(row).transpose() - fut.encode(stack_window(seq, t, 3)))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }
  CHECK(row == ts.n);
}
