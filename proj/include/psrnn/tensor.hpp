#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "psrnn/common.hpp"

namespace psrnn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Dense third-order tensor, row-major: element (i,j,k) lives at
// v[(i*d2 + j)*d3 + k]. Modes are numbered 1..3.
struct Tensor3 {
  int d1 = 0, d2 = 0, d3 = 0;
  std::vector<double> v;

  Tensor3() = default;
  Tensor3(int a, int b, int c)
      : d1(a), d2(b), d3(c), v(static_cast<std::size_t>(a) * b * c, 0.0) {
    if (a < 0 || b < 0 || c < 0) throw DimensionMismatch("Tensor3: negative dimension");
  }

  double& operator()(int i, int j, int k) {
    return v[(static_cast<std::size_t>(i) * d2 + j) * d3 + k];
  }
  double operator()(int i, int j, int k) const {
    return v[(static_cast<std::size_t>(i) * d2 + j) * d3 + k];
  }

  int dim(int mode) const {
    switch (mode) {
      case 1: return d1;
      case 2: return d2;
      case 3: return d3;
      default: throw DimensionMismatch("Tensor3::dim: mode must be 1, 2 or 3");
    }
  }

  std::size_t size() const { return v.size(); }

  bool same_dims(const Tensor3& o) const {
    return d1 == o.d1 && d2 == o.d2 && d3 == o.d3;
  }

  void set_zero() { std::fill(v.begin(), v.end(), 0.0); }

  double frob() const {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  }

  Tensor3& axpy(double a, const Tensor3& g) {
    if (!same_dims(g)) throw DimensionMismatch("Tensor3::axpy: shape mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += a * g.v[i];
    return *this;
  }
};

// Rank-decomposed tensor. Row r of A/B/C holds the r-th rank-1 component:
// T = sum_r outer3(A.row(r), B.row(r), C.row(r)).
struct CpFactors {
  MatrixXd A, B, C;  // rank x d1, rank x d2, rank x d3
  int rank() const { return static_cast<int>(A.rows()); }
};

// Contract one mode against a vector; the result keeps the two remaining
// modes in their original order.  mode=2 with v implements the bilinear
// convention [T x2 v]_{i,k} = sum_j T_{i,j,k} v_j.
MatrixXd contract_vec(const Tensor3& T, int mode, const VectorXd& v);

// Multiply one mode by a matrix M (rows index the new mode):
// mode=3 gives [T x3 M]_{i,j,l} = sum_k T_{i,j,k} M_{l,k}.
Tensor3 mode_mat_product(const Tensor3& T, int mode, const MatrixXd& M);

Tensor3 outer3(const VectorXd& a, const VectorXd& b, const VectorXd& c);

// T += a (x) b (x) c without a temporary.
inline void add_outer3(Tensor3& T, const VectorXd& a, const VectorXd& b,
                       const VectorXd& c) {
  if (T.d1 != a.size() || T.d2 != b.size() || T.d3 != c.size())
    throw DimensionMismatch("add_outer3: shape mismatch");
  std::size_t idx = 0;
  for (int i = 0; i < T.d1; ++i)
    for (int j = 0; j < T.d2; ++j) {
      const double ab = a[i] * b[j];
      for (int k = 0; k < T.d3; ++k) T.v[idx++] += ab * c[k];
    }
}

// Alternating least squares CP decomposition.  Factors start i.i.d.
// uniform(-1,1) from the seeded engine; each normal-equation solve is
// ridge-repaired with 1e-10*I and raised as SingularUpdate if still not
// solvable.  Sweeps stop when the relative Frobenius reconstruction error
// changes by less than tol, or after max_iters sweeps.  err_trace, when
// given, receives the error after every sweep.
CpFactors cp_als(const Tensor3& T, int rank, int max_iters = 300,
                 double tol = 1e-10, std::uint64_t seed = 0,
                 std::vector<double>* err_trace = nullptr);

Tensor3 cp_reconstruct(const CpFactors& F);

// Rebalance component norms so that ||a_r|| = ||b_r|| = ||c_r|| for every
// r, leaving the reconstruction unchanged.  Keeps refinement step sizes
// comparable across the three factor matrices.
void cp_balance(CpFactors& F);

// Naive triple-loop reference kernels.  These are the semantics contract:
// the optimized paths above must agree with them bit-for-bit modulo
// floating-point summation order (tested to 1e-12), and the benchmark
// binary compares their throughput.
namespace ref {
MatrixXd contract_vec(const Tensor3& T, int mode, const VectorXd& v);
Tensor3 mode_mat_product(const Tensor3& T, int mode, const MatrixXd& M);
}  // namespace ref

}  // namespace psrnn
