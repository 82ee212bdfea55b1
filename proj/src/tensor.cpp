#include "psrnn/tensor.hpp"

#include <cmath>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace psrnn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

// Below this element count the parallel kernels stay serial; the cells in a
// filtering loop are tiny and the fork/join overhead dominates.
constexpr std::size_t kParallelThreshold = 1u << 15;

void check_mode_vec(const Tensor3& T, int mode, const VectorXd& v) {
  if (mode < 1 || mode > 3) throw DimensionMismatch("contract_vec: mode must be 1, 2 or 3");
  if (v.size() != T.dim(mode))
    throw DimensionMismatch("contract_vec: vector length " + std::to_string(v.size()) +
                            " does not match mode-" + std::to_string(mode) + " extent " +
                            std::to_string(T.dim(mode)));
}

void check_mode_mat(const Tensor3& T, int mode, const MatrixXd& M) {
  if (mode < 1 || mode > 3) throw DimensionMismatch("mode_mat_product: mode must be 1, 2 or 3");
  if (M.cols() != T.dim(mode))
    throw DimensionMismatch("mode_mat_product: matrix has " + std::to_string(M.cols()) +
                            " columns but mode-" + std::to_string(mode) + " extent is " +
                            std::to_string(T.dim(mode)));
}

}  // namespace

MatrixXd contract_vec(const Tensor3& T, int mode, const VectorXd& v) {
  check_mode_vec(T, mode, v);
  const int d1 = T.d1, d2 = T.d2, d3 = T.d3;
  switch (mode) {
    case 1: {
      ConstRowMap X(T.v.data(), d1, static_cast<Eigen::Index>(d2) * d3);
      VectorXd flat = X.transpose() * v;
      return Eigen::Map<const RowMat>(flat.data(), d2, d3);
    }
    case 2: {
      MatrixXd out(d1, d3);
      const bool par = T.size() >= kParallelThreshold;
#ifdef _OPENMP
#pragma omp parallel for if (par) schedule(static)
#endif
      for (int i = 0; i < d1; ++i) {
        ConstRowMap slice(T.v.data() + static_cast<std::size_t>(i) * d2 * d3, d2, d3);
        out.row(i) = (slice.transpose() * v).transpose();
      }
      (void)par;
      return out;
    }
    default: {  // mode 3
      ConstRowMap X(T.v.data(), static_cast<Eigen::Index>(d1) * d2, d3);
      VectorXd flat = X * v;
      return Eigen::Map<const RowMat>(flat.data(), d1, d2);
    }
  }
}

Tensor3 mode_mat_product(const Tensor3& T, int mode, const MatrixXd& M) {
  check_mode_mat(T, mode, M);
  const int d1 = T.d1, d2 = T.d2, d3 = T.d3;
  const int m = static_cast<int>(M.rows());
  switch (mode) {
    case 1: {
      Tensor3 out(m, d2, d3);
      ConstRowMap X(T.v.data(), d1, static_cast<Eigen::Index>(d2) * d3);
      RowMap O(out.v.data(), m, static_cast<Eigen::Index>(d2) * d3);
      O.noalias() = M * X;
      return out;
    }
    case 2: {
      Tensor3 out(d1, m, d3);
      const bool par = T.size() >= kParallelThreshold;
#ifdef _OPENMP
#pragma omp parallel for if (par) schedule(static)
#endif
      for (int i = 0; i < d1; ++i) {
        ConstRowMap slice(T.v.data() + static_cast<std::size_t>(i) * d2 * d3, d2, d3);
        RowMap O(out.v.data() + static_cast<std::size_t>(i) * m * d3, m, d3);
        O.noalias() = M * slice;
      }
      (void)par;
      return out;
    }
    default: {  // mode 3
      Tensor3 out(d1, d2, m);
      ConstRowMap X(T.v.data(), static_cast<Eigen::Index>(d1) * d2, d3);
      RowMap O(out.v.data(), static_cast<Eigen::Index>(d1) * d2, m);
      O.noalias() = X * M.transpose();
      return out;
    }
  }
}

Tensor3 outer3(const VectorXd& a, const VectorXd& b, const VectorXd& c) {
  Tensor3 out(static_cast<int>(a.size()), static_cast<int>(b.size()),
              static_cast<int>(c.size()));
  std::size_t idx = 0;
  for (int i = 0; i < out.d1; ++i)
    for (int j = 0; j < out.d2; ++j) {
      const double ab = a[i] * b[j];
      for (int k = 0; k < out.d3; ++k) out.v[idx++] = ab * c[k];
    }
  return out;
}

namespace {

// Reconstruction from column-layout factors (d x rank), used inside ALS.
double recon_error(const Tensor3& T, const MatrixXd& A, const MatrixXd& B,
                   const MatrixXd& C, double nrm) {
  const int d1 = T.d1, d2 = T.d2, d3 = T.d3;
  const int r = static_cast<int>(A.cols());
  double s = 0.0;
  std::size_t idx = 0;
  for (int i = 0; i < d1; ++i)
    for (int j = 0; j < d2; ++j)
      for (int k = 0; k < d3; ++k) {
        double x = 0.0;
        for (int q = 0; q < r; ++q) x += A(i, q) * B(j, q) * C(k, q);
        const double diff = x - T.v[idx++];
        s += diff * diff;
      }
  return std::sqrt(s) / nrm;
}

MatrixXd khatri_rao(const MatrixXd& X, const MatrixXd& Y) {
  // Rows of the result are indexed (x_row * Y.rows() + y_row).
  const int nx = static_cast<int>(X.rows()), ny = static_cast<int>(Y.rows());
  const int r = static_cast<int>(X.cols());
  MatrixXd out(static_cast<Eigen::Index>(nx) * ny, r);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      out.row(static_cast<Eigen::Index>(i) * ny + j) =
          X.row(i).cwiseProduct(Y.row(j));
  return out;
}

MatrixXd als_solve(const MatrixXd& unfolding, const MatrixXd& KR,
                   const MatrixXd& G1, const MatrixXd& G2) {
  MatrixXd G = G1.cwiseProduct(G2);
  G.diagonal().array() += 1e-10;
  Eigen::LDLT<MatrixXd> ldlt(G);
  if (ldlt.info() != Eigen::Success)
    throw SingularUpdate("cp_als: normal-equation system not solvable after ridge repair");
  MatrixXd rhs = (unfolding * KR).transpose();
  MatrixXd sol = ldlt.solve(rhs);
  if (!sol.allFinite())
    throw SingularUpdate("cp_als: non-finite factor update");
  return sol.transpose();
}

}  // namespace

CpFactors cp_als(const Tensor3& T, int rank, int max_iters, double tol,
                 std::uint64_t seed, std::vector<double>* err_trace) {
  if (rank < 1) throw DimensionMismatch("cp_als: rank must be >= 1");
  if (max_iters < 1) throw DimensionMismatch("cp_als: max_iters must be >= 1");
  if (T.size() == 0) throw EmptyData("cp_als: empty tensor");
  const int d1 = T.d1, d2 = T.d2, d3 = T.d3;

  Rng rng(seed);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  MatrixXd A(d1, rank), B(d2, rank), C(d3, rank);
  for (int i = 0; i < d1; ++i)
    for (int r = 0; r < rank; ++r) A(i, r) = U(rng);
  for (int i = 0; i < d2; ++i)
    for (int r = 0; r < rank; ++r) B(i, r) = U(rng);
  for (int i = 0; i < d3; ++i)
    for (int r = 0; r < rank; ++r) C(i, r) = U(rng);

  // Mode unfoldings: X1 is the natural row-major view; X2 and X3 are built
  // once up front.
  ConstRowMap X1(T.v.data(), d1, static_cast<Eigen::Index>(d2) * d3);
  MatrixXd X2(d2, static_cast<Eigen::Index>(d1) * d3);
  MatrixXd X3(d3, static_cast<Eigen::Index>(d1) * d2);
  for (int i = 0; i < d1; ++i)
    for (int j = 0; j < d2; ++j)
      for (int k = 0; k < d3; ++k) {
        const double x = T(i, j, k);
        X2(j, static_cast<Eigen::Index>(i) * d3 + k) = x;
        X3(k, static_cast<Eigen::Index>(i) * d2 + j) = x;
      }

  const double nrm = std::max(T.frob(), 1e-300);
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < max_iters; ++it) {
    A = als_solve(X1, khatri_rao(B, C), B.transpose() * B, C.transpose() * C);
    B = als_solve(X2, khatri_rao(A, C), A.transpose() * A, C.transpose() * C);
    C = als_solve(X3, khatri_rao(A, B), A.transpose() * A, B.transpose() * B);
    const double err = recon_error(T, A, B, C, nrm);
    if (err_trace) err_trace->push_back(err);
    if (!std::isnan(prev) && std::abs(prev - err) < tol) break;
    prev = err;
  }

  CpFactors F;
  F.A = A.transpose();
  F.B = B.transpose();
  F.C = C.transpose();
  return F;
}

Tensor3 cp_reconstruct(const CpFactors& F) {
  if (F.A.rows() != F.B.rows() || F.A.rows() != F.C.rows())
    throw DimensionMismatch("cp_reconstruct: factor rank mismatch");
  const int d1 = static_cast<int>(F.A.cols());
  const int d2 = static_cast<int>(F.B.cols());
  const int d3 = static_cast<int>(F.C.cols());
  const int r = F.rank();
  Tensor3 out(d1, d2, d3);
  std::size_t idx = 0;
  for (int i = 0; i < d1; ++i)
    for (int j = 0; j < d2; ++j)
      for (int k = 0; k < d3; ++k) {
        double x = 0.0;
        for (int q = 0; q < r; ++q) x += F.A(q, i) * F.B(q, j) * F.C(q, k);
        out.v[idx++] = x;
      }
  return out;
}

void cp_balance(CpFactors& F) {
  const int r = F.rank();
  if (F.B.rows() != r || F.C.rows() != r)
    throw DimensionMismatch("cp_balance: factor rank mismatch");
  for (int q = 0; q < r; ++q) {
    const double na = F.A.row(q).norm();
    const double nb = F.B.row(q).norm();
    const double nc = F.C.row(q).norm();
    const double t = std::cbrt(na * nb * nc);
    F.A.row(q) *= t / (na + 1e-300);
    F.B.row(q) *= t / (nb + 1e-300);
    F.C.row(q) *= t / (nc + 1e-300);
  }
}

namespace ref {

MatrixXd contract_vec(const Tensor3& T, int mode, const VectorXd& v) {
  check_mode_vec(T, mode, v);
  switch (mode) {
    case 1: {
      MatrixXd out = MatrixXd::Zero(T.d2, T.d3);
      for (int i = 0; i < T.d1; ++i)
        for (int j = 0; j < T.d2; ++j)
          for (int k = 0; k < T.d3; ++k) out(j, k) += T(i, j, k) * v[i];
      return out;
    }
    case 2: {
      MatrixXd out = MatrixXd::Zero(T.d1, T.d3);
      for (int i = 0; i < T.d1; ++i)
        for (int j = 0; j < T.d2; ++j)
          for (int k = 0; k < T.d3; ++k) out(i, k) += T(i, j, k) * v[j];
      return out;
    }
    default: {
      MatrixXd out = MatrixXd::Zero(T.d1, T.d2);
      for (int i = 0; i < T.d1; ++i)
        for (int j = 0; j < T.d2; ++j)
          for (int k = 0; k < T.d3; ++k) out(i, j) += T(i, j, k) * v[k];
      return out;
    }
  }
}

Tensor3 mode_mat_product(const Tensor3& T, int mode, const MatrixXd& M) {
  check_mode_mat(T, mode, M);
  const int m = static_cast<int>(M.rows());
  switch (mode) {
    case 1: {
      Tensor3 out(m, T.d2, T.d3);
      for (int l = 0; l < m; ++l)
        for (int j = 0; j < T.d2; ++j)
          for (int k = 0; k < T.d3; ++k) {
            double s = 0.0;
            for (int i = 0; i < T.d1; ++i) s += T(i, j, k) * M(l, i);
            out(l, j, k) = s;
          }
      return out;
    }
    case 2: {
      Tensor3 out(T.d1, m, T.d3);
      for (int i = 0; i < T.d1; ++i)
        for (int l = 0; l < m; ++l)
          for (int k = 0; k < T.d3; ++k) {
            double s = 0.0;
            for (int j = 0; j < T.d2; ++j) s += T(i, j, k) * M(l, j);
            out(i, l, k) = s;
          }
      return out;
    }
    default: {
      Tensor3 out(T.d1, T.d2, m);
      for (int i = 0; i < T.d1; ++i)
        for (int j = 0; j < T.d2; ++j)
          for (int l = 0; l < m; ++l) {
            double s = 0.0;
            for (int k = 0; k < T.d3; ++k) s += T(i, j, k) * M(l, k);
            out(i, j, l) = s;
          }
      return out;
    }
  }
}

}  // namespace ref

}  // namespace psrnn
