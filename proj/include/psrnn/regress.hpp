#pragma once

#include "psrnn/tensor.hpp"

namespace psrnn {

// Streaming accumulator for the moment statistics consumed by the
// two-stage initializer.  One instance accumulates a numerator tensor
// (sum3), a denominator matrix (sum2) and, optionally, a plain feature sum
// (sum1) with a shared triple count.  Accumulation is associative: merging
// two accumulators equals accumulating the concatenated stream.
struct MomentAccumulator {
  Tensor3 sum3;
  MatrixXd sum2;
  VectorXd sum1;
  long count = 0;

  // sum3 += x (x) y (x) z ; sum2 += u (x) w ; ++count
  void add(const VectorXd& x, const VectorXd& y, const VectorXd& z,
           const VectorXd& u, const VectorXd& w);
  // As above, additionally sum1 += s (running feature mean support).
  void add(const VectorXd& x, const VectorXd& y, const VectorXd& z,
           const VectorXd& u, const VectorXd& w, const VectorXd& s);
  void merge(const MomentAccumulator& o);
};

// Ridge-regularized least squares: returns W minimizing
// ||X W - Y||_F^2 + lambda ||W||_F^2 via SVD.  lambda = 0 gives exact
// (minimum-norm) least squares.  X is n x p, Y is n x q, W is p x q.
MatrixXd ridge_solve(const MatrixXd& X, const MatrixXd& Y, double lambda);

// Moore-Penrose pseudoinverse; singular values below rcond * sigma_max are
// treated as zero.
MatrixXd pinv(const MatrixXd& M, double rcond = 1e-10);

// Ridge-regularized pseudoinverse V diag(s/(s^2+lambda)) U^T; converges to
// pinv as lambda -> 0 and damps small singular directions otherwise.
MatrixXd ridge_pinv(const MatrixXd& M, double lambda);

}  // namespace psrnn
