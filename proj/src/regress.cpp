#include "psrnn/regress.hpp"

#include <Eigen/SVD>

namespace psrnn {

namespace {

void ensure_shapes(MomentAccumulator& a, const VectorXd& x, const VectorXd& y,
                   const VectorXd& z, const VectorXd& u, const VectorXd& w) {
  if (a.count == 0) {
    a.sum3 = Tensor3(static_cast<int>(x.size()), static_cast<int>(y.size()),
                     static_cast<int>(z.size()));
    a.sum2 = MatrixXd::Zero(u.size(), w.size());
  } else {
    if (a.sum3.d1 != x.size() || a.sum3.d2 != y.size() || a.sum3.d3 != z.size())
      throw DimensionMismatch("MomentAccumulator: triple dimensions changed mid-stream");
    if (a.sum2.rows() != u.size() || a.sum2.cols() != w.size())
      throw DimensionMismatch("MomentAccumulator: pair dimensions changed mid-stream");
  }
}

}  // namespace

void MomentAccumulator::add(const VectorXd& x, const VectorXd& y, const VectorXd& z,
                            const VectorXd& u, const VectorXd& w) {
  ensure_shapes(*this, x, y, z, u, w);
  add_outer3(sum3, x, y, z);
  sum2.noalias() += u * w.transpose();
  ++count;
}

void MomentAccumulator::add(const VectorXd& x, const VectorXd& y, const VectorXd& z,
                            const VectorXd& u, const VectorXd& w, const VectorXd& s) {
  if (count == 0)
    sum1 = VectorXd::Zero(s.size());
  else if (sum1.size() != s.size())
    throw DimensionMismatch("MomentAccumulator: feature dimension changed mid-stream");
  add(x, y, z, u, w);
  sum1 += s;
}

void MomentAccumulator::merge(const MomentAccumulator& o) {
  if (o.count == 0) return;
  if (count == 0) {
    *this = o;
    return;
  }
  if (!sum3.same_dims(o.sum3) || sum2.rows() != o.sum2.rows() ||
      sum2.cols() != o.sum2.cols() || sum1.size() != o.sum1.size())
    throw DimensionMismatch("MomentAccumulator::merge: shape mismatch");
  sum3.axpy(1.0, o.sum3);
  sum2 += o.sum2;
  if (sum1.size() > 0) sum1 += o.sum1;
  count += o.count;
}

MatrixXd ridge_solve(const MatrixXd& X, const MatrixXd& Y, double lambda) {
  if (X.rows() != Y.rows())
    throw DimensionMismatch("ridge_solve: X and Y row counts differ");
  if (X.rows() == 0) throw EmptyData("ridge_solve: no rows");
  if (lambda < 0) throw NumericalFailure("ridge_solve: negative ridge");
  Eigen::BDCSVD<MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double smax = s.size() ? s[0] : 0.0;
  VectorXd f(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (lambda > 0.0)
      f[i] = s[i] / (s[i] * s[i] + lambda);
    else
      f[i] = (s[i] > 1e-13 * smax && s[i] > 0.0) ? 1.0 / s[i] : 0.0;
  }
  MatrixXd W = svd.matrixV() * f.asDiagonal() * (svd.matrixU().transpose() * Y);
  if (!W.allFinite()) throw NumericalFailure("ridge_solve: non-finite solution");
  return W;
}

MatrixXd pinv(const MatrixXd& M, double rcond) {
  Eigen::BDCSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  const double cutoff = rcond * (s.size() ? s[0] : 0.0);
  VectorXd f(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i)
    f[i] = (s[i] > cutoff && s[i] > 0.0) ? 1.0 / s[i] : 0.0;
  return svd.matrixV() * f.asDiagonal() * svd.matrixU().transpose();
}

MatrixXd ridge_pinv(const MatrixXd& M, double lambda) {
  if (lambda <= 0.0) return pinv(M);
  Eigen::BDCSVD<MatrixXd> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  VectorXd f(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) f[i] = s[i] / (s[i] * s[i] + lambda);
  return svd.matrixV() * f.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace psrnn
