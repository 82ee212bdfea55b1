#include "psrnn/model.hpp"

#include <Eigen/LU>

namespace psrnn {

VectorXd Encoder::encode(int sym) const {
  if (kind != Kind::OneHot)
    throw DimensionMismatch("Encoder: discrete symbol fed to a continuous encoder");
  return one_hot(sym, alphabet);
}

VectorXd Encoder::encode(const VectorXd& raw) const {
  if (kind != Kind::RffProj)
    throw DimensionMismatch("Encoder: continuous input fed to a discrete encoder");
  return project(proj, apply_rff(rff, raw));
}

VectorXd cell_prenorm(const Layer& l, const VectorXd& q, const VectorXd& o) {
  if (l.kind == Layer::Kind::Full) {
    const PsrnnCell& c = l.full;
    if (o.size() != c.W.d2 || q.size() != c.W.d3)
      throw DimensionMismatch("cell_prenorm: input dimensions do not match W");
    return contract_vec(c.W, 2, o) * q + c.b;
  }
  const FactorizedCell& c = l.fact;
  if (o.size() != c.B.cols() || q.size() != c.C.cols())
    throw DimensionMismatch("cell_prenorm: input dimensions do not match factors");
  return c.A.transpose() * ((c.B * o).cwiseProduct(c.C * q)) + c.b;
}

VectorXd normalize_state(const VectorXd& u, NormMode mode, FilterStats* stats,
                         double* norm_out) {
  double n = u.norm();
  if (stats) stats->min_prenorm = std::min(stats->min_prenorm, n);
  if (n < kNormFloor) {
    if (mode == NormMode::Eval)
      throw NormalizationUnderflow("state norm " + std::to_string(n) +
                                   " below floor during evaluation");
    n = kNormFloor;
    if (stats) ++stats->underflows;
  }
  if (norm_out) *norm_out = n;
  VectorXd q = u / n;
  if (stats) stats->max_norm_dev = std::max(stats->max_norm_dev, std::abs(q.norm() - 1.0));
  return q;
}

VectorXd cell_update(const Layer& l, const VectorXd& q, const VectorXd& o,
                     NormMode mode, FilterStats* stats) {
  return normalize_state(cell_prenorm(l, q, o), mode, stats);
}

VectorXd cell_update_full_norm(const Tensor3& W, const Tensor3& Z, const VectorXd& q,
                               const VectorXd& o, double eps_inv) {
  if (W.d3 != q.size() || Z.d3 != q.size())
    throw DimensionMismatch("cell_update_full_norm: state dimension mismatch");
  if (W.d2 != o.size() || Z.d1 != o.size() || Z.d2 != o.size())
    throw DimensionMismatch("cell_update_full_norm: observation dimension mismatch");
  MatrixXd M = contract_vec(W, 3, q);   // d_f x d_o
  MatrixXd N = contract_vec(Z, 3, q);   // d_o x d_o
  N.diagonal().array() += eps_inv;
  Eigen::FullPivLU<MatrixXd> lu(N);
  if (!lu.isInvertible())
    throw SingularNormalizer("cell_update_full_norm: normalizer not invertible");
  VectorXd qn = M * lu.solve(o);
  const double s = qn.sum();
  if (std::abs(s) < 1e-300)
    throw SingularNormalizer("cell_update_full_norm: updated state sums to zero");
  return qn / s;
}

namespace {

template <typename GetInput>
FilterResult filter_impl(const PsrnnModel& m, long T, GetInput&& input_at,
                         NormMode mode, bool want_preds) {
  if (m.layers.empty()) throw EmptyData("filter: model has no layers");
  FilterResult r;
  const int L = m.n_layers();
  r.states.resize(L);
  for (int li = 0; li < L; ++li) r.states[li].resize(T, m.layers[li].state_dim());
  const bool decode = want_preds && m.Wd.size() > 0;
  if (decode) r.preds.resize(T, m.Wd.rows());

  std::vector<VectorXd> qs(L);
  for (int li = 0; li < L; ++li) {
    const VectorXd& q1 = m.layers[li].q1;
    if (q1.size() != m.layers[li].state_dim())
      throw DimensionMismatch("filter: q1 dimension mismatch at layer " + std::to_string(li));
    qs[li] = normalize_state(q1, mode, &r.stats);
  }

  for (long t = 0; t < T; ++t) {
    VectorXd inp = input_at(t);
    for (int li = 0; li < L; ++li) {
      qs[li] = cell_update(m.layers[li], qs[li], inp, mode, &r.stats);
      r.states[li].row(t) = qs[li];
      inp = qs[li];
    }
    if (decode) r.preds.row(t) = m.Wd * qs[L - 1] + m.bd;
  }
  return r;
}

}  // namespace

FilterResult filter(const PsrnnModel& m, const std::vector<int>& obs, NormMode mode,
                    bool want_preds) {
  return filter_impl(
      m, static_cast<long>(obs.size()),
      [&](long t) { return m.enc.encode(obs[static_cast<std::size_t>(t)]); }, mode,
      want_preds);
}

FilterResult filter(const PsrnnModel& m, const MatrixXd& obs, NormMode mode,
                    bool want_preds) {
  return filter_impl(
      m, obs.rows(), [&](long t) { return m.enc.encode(VectorXd(obs.row(t))); }, mode,
      want_preds);
}

namespace {

template <typename Seqs>
PsrnnModel factorize_impl(const PsrnnModel& m, const Seqs& train, int rank,
                          std::optional<double> eps_bias, std::uint64_t seed,
                          bool balance, int max_iters, double tol) {
  if (rank < 1) throw DimensionMismatch("factorize_model: rank must be >= 1");
  if (train.empty() && eps_bias.has_value())
    throw EmptyData("factorize_model: bias re-anchoring needs training data");

  // Mean filtered state per layer under the input model.
  std::vector<VectorXd> mean_state(m.n_layers());
  if (eps_bias.has_value()) {
    std::vector<VectorXd> sums(m.n_layers());
    long total = 0;
    for (int li = 0; li < m.n_layers(); ++li)
      sums[li] = VectorXd::Zero(m.layers[li].state_dim());
    for (const auto& seq : train) {
      FilterResult fr = filter(m, seq, NormMode::Eval, /*want_preds=*/false);
      for (int li = 0; li < m.n_layers(); ++li)
        sums[li] += fr.states[li].colwise().sum().transpose();
      total += fr.states[0].rows();
    }
    if (total == 0) throw EmptyData("factorize_model: empty training data");
    for (int li = 0; li < m.n_layers(); ++li) mean_state[li] = sums[li] / total;
  }

  PsrnnModel out = m;
  out.meta.original_bias.clear();
  for (int li = 0; li < m.n_layers(); ++li) {
    const Layer& src = m.layers[li];
    if (src.kind != Layer::Kind::Full)
      throw DimensionMismatch("factorize_model: layer " + std::to_string(li) +
                              " is already factorized");
    CpFactors F = cp_als(src.full.W, rank, max_iters, tol, seed + li);
    if (balance) cp_balance(F);
    Layer nl;
    nl.kind = Layer::Kind::Factorized;
    nl.fact.A = F.A;
    nl.fact.B = F.B;
    nl.fact.C = F.C;
    nl.fact.b = eps_bias.has_value() ? VectorXd(*eps_bias * mean_state[li]) : src.full.b;
    nl.q1 = src.q1;
    out.meta.original_bias.push_back(src.full.b);
    out.layers[li] = nl;
  }
  return out;
}

}  // namespace

PsrnnModel factorize_model(const PsrnnModel& m, const std::vector<std::vector<int>>& train,
                           int rank, std::optional<double> eps_bias, std::uint64_t seed,
                           bool balance, int max_iters, double tol) {
  return factorize_impl(m, train, rank, eps_bias, seed, balance, max_iters, tol);
}

PsrnnModel factorize_model(const PsrnnModel& m, const std::vector<MatrixXd>& train,
                           int rank, std::optional<double> eps_bias, std::uint64_t seed,
                           bool balance, int max_iters, double tol) {
  return factorize_impl(m, train, rank, eps_bias, seed, balance, max_iters, tol);
}

}  // namespace psrnn
