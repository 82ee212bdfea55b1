#include "psrnn/oracle.hpp"

#include <cmath>

namespace psrnn {

void HmmSpec::validate() const {
  if (S.rows() != S.cols()) throw DimensionMismatch("HmmSpec: S must be square");
  if (O.cols() != S.rows()) throw DimensionMismatch("HmmSpec: O column count must match state count");
  if (pi.size() != S.rows()) throw DimensionMismatch("HmmSpec: pi length must match state count");
  auto col_stochastic = [](const MatrixXd& M) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      if ((M.col(j).array() < -1e-12).any()) return false;
      if (std::abs(M.col(j).sum() - 1.0) > 1e-9) return false;
    }
    return true;
  };
  if (!col_stochastic(S) || !col_stochastic(O) ||
      (pi.array() < -1e-12).any() || std::abs(pi.sum() - 1.0) > 1e-9)
    throw NumericalFailure("HmmSpec: parameters are not stochastic");
}

HmmSpec random_hmm(int n_states, int n_symbols, Rng& rng) {
  if (n_states < 1 || n_symbols < 1)
    throw DimensionMismatch("random_hmm: sizes must be positive");
  auto dirichlet_col = [&rng](Eigen::Index n) {
    VectorXd v(n);
    std::exponential_distribution<double> E(1.0);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = E(rng);
    return VectorXd(v / v.sum());
  };
  constexpr double kMinEntry = 0.01;
  constexpr int kMaxTries = 10000;
  for (int attempt = 0; attempt < kMaxTries; ++attempt) {
    HmmSpec h;
    h.S.resize(n_states, n_states);
    h.O.resize(n_symbols, n_states);
    for (int j = 0; j < n_states; ++j) h.S.col(j) = dirichlet_col(n_states);
    for (int j = 0; j < n_states; ++j) h.O.col(j) = dirichlet_col(n_symbols);
    h.pi = dirichlet_col(n_states);
    if (h.S.minCoeff() >= kMinEntry && h.O.minCoeff() >= kMinEntry &&
        h.pi.minCoeff() >= kMinEntry)
      return h;
  }
  throw DegenerateSample("random_hmm: rejection sampling failed to find a well-conditioned model");
}

HmmSpec cycle_hmm(int n_states, int n_symbols, double mix, double emix) {
  if (n_states < 1 || n_symbols < 1)
    throw DimensionMismatch("cycle_hmm: sizes must be positive");
  if (n_symbols != n_states)
    throw DimensionMismatch("cycle_hmm: emission mixing needs n_symbols == n_states");
  HmmSpec h;
  h.S = MatrixXd::Constant(n_states, n_states, (1.0 - mix) / n_states);
  for (int j = 0; j < n_states; ++j) h.S((j + 1) % n_states, j) += mix;
  h.O = MatrixXd::Constant(n_symbols, n_states, (1.0 - emix) / n_symbols);
  h.O.diagonal().array() += emix;
  h.pi = VectorXd::Constant(n_states, 1.0 / n_states);
  return h;
}

int sample_categorical(const VectorXd& p, Rng& rng) {
  const double u = runif(rng);
  double acc = 0.0;
  const Eigen::Index n = p.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(n - 1);  // guard against accumulated rounding
}

std::vector<int> sample_hmm(const HmmSpec& h, long T, Rng& rng) {
  h.validate();
  std::vector<int> obs;
  if (T <= 0) return obs;
  obs.reserve(static_cast<std::size_t>(T));
  int st = sample_categorical(h.pi, rng);
  for (long t = 0; t < T; ++t) {
    obs.push_back(sample_categorical(h.O.col(st), rng));
    st = sample_categorical(h.S.col(st), rng);
  }
  return obs;
}

ForwardResult forward_filter(const HmmSpec& h, const std::vector<int>& obs) {
  h.validate();
  const long T = static_cast<long>(obs.size());
  const int A = h.n_symbols();
  ForwardResult r;
  r.preds.resize(T, A);
  r.beliefs.resize(T, h.n_states());
  r.logp2.resize(T);
  if (T == 0) return r;

  VectorXd belief = h.pi;  // prior over the state emitting o_t
  VectorXd prior = h.O * belief;
  for (long t = 0; t < T; ++t) {
    const int y = obs[t];
    if (y < 0 || y >= A) throw DimensionMismatch("forward_filter: symbol outside alphabet");
    const double py = prior[y];
    if (py <= 0.0)
      throw ZeroProbabilityObservation("forward_filter: observation has zero probability at t=" +
                                       std::to_string(t));
    r.logp2[t] = std::log2(py);
    VectorXd post = h.O.row(y).transpose().cwiseProduct(belief);
    post /= post.sum();
    r.beliefs.row(t) = post;
    belief = h.S * post;
    prior = h.O * belief;
    r.preds.row(t) = prior;
  }
  r.bpc = -r.logp2.mean();
  long hits = 0;
  for (long t = 0; t + 1 < T; ++t) {
    Eigen::Index arg;
    r.preds.row(t).maxCoeff(&arg);
    if (static_cast<int>(arg) == obs[t + 1]) ++hits;
  }
  r.ospa = T > 1 ? static_cast<double>(hits) / static_cast<double>(T - 1) : 0.0;
  return r;
}

VectorXd stationary(const MatrixXd& S, int iters, double tol) {
  if (S.rows() != S.cols()) throw DimensionMismatch("stationary: S must be square");
  VectorXd v = VectorXd::Constant(S.rows(), 1.0 / S.rows());
  for (int i = 0; i < iters; ++i) {
    VectorXd nv = S * v;
    nv /= nv.sum();
    if ((nv - v).lpNorm<Eigen::Infinity>() < tol) return nv;
    v = nv;
  }
  return v;
}

}  // namespace psrnn
