#include "psrnn/twostage.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace psrnn {

namespace {

// Rank check on the denominator matrix; deficiency is reported, not fatal:
// the ridge keeps the quotient well-defined.
void check_denominator(const MatrixXd& D, long count, const char* what, Warnings* warn) {
  if (!warn) return;
  if (count < D.rows())
    warn->add(std::string(what) + ": fewer samples than history dimensions (" +
              std::to_string(count) + " < " + std::to_string(D.rows()) + ")");
  Eigen::JacobiSVD<MatrixXd> svd(D);
  const VectorXd& s = svd.singularValues();
  const double cut = 1e-10 * std::max(1.0, s.size() ? s[0] : 0.0);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > cut) ++rank;
  if (rank < std::min(D.rows(), D.cols()))
    warn->add(std::string(what) + ": denominator rank " + std::to_string(rank) +
              " below full rank " + std::to_string(std::min(D.rows(), D.cols())));
}

Tensor3 quotient(const MomentAccumulator& acc, double lambda, const char* what,
                 double* residual, Warnings* warn) {
  if (acc.count == 0) throw EmptyData(std::string(what) + ": empty accumulator");
  check_denominator(acc.sum2, acc.count, what, warn);
  MatrixXd P = lambda > 0.0 ? ridge_pinv(acc.sum2, lambda) : pinv(acc.sum2);
  Tensor3 W = mode_mat_product(acc.sum3, 3, P);
  if (residual) {
    Tensor3 back = mode_mat_product(W, 3, acc.sum2);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < back.v.size(); ++i) {
      const double d = back.v[i] - acc.sum3.v[i];
      num += d * d;
      den += acc.sum3.v[i] * acc.sum3.v[i];
    }
    *residual = den > 0 ? std::sqrt(num / den) : 0.0;
  }
  return W;
}

}  // namespace

VectorXd estimate_q1(const MomentAccumulator& acc) {
  if (acc.count == 0 || acc.sum1.size() == 0)
    throw EmptyData("estimate_q1: empty accumulator");
  VectorXd mean = acc.sum1 / static_cast<double>(acc.count);
  const double n = mean.norm();
  if (n < kNormFloor)
    throw NormalizationUnderflow("estimate_q1: mean future feature has zero norm");
  return mean / n;
}

Tensor3 estimate_W(const MomentAccumulator& acc, double lambda, double* residual,
                   Warnings* warn) {
  return quotient(acc, lambda, "estimate_W", residual, warn);
}

Tensor3 estimate_Z(const MomentAccumulator& acc, double lambda, double* residual,
                   Warnings* warn) {
  return quotient(acc, lambda, "estimate_Z", residual, warn);
}

namespace {

DecoderFit fit_decoder_impl(const MatrixXd& states, const MatrixXd& Y, double ridge_scale) {
  const long n = states.rows();
  if (n == 0) throw EmptyData("fit_decoder: no state/target pairs");
  if (Y.rows() != n) throw DimensionMismatch("fit_decoder: target row count mismatch");
  MatrixXd X(n, states.cols() + 1);
  X.leftCols(states.cols()) = states;
  X.col(states.cols()).setOnes();
  const double lambda = ridge_scale * static_cast<double>(n);
  MatrixXd Wfull = ridge_solve(X, Y, lambda);  // (dq+1) x out
  DecoderFit fit;
  fit.Wd = Wfull.topRows(states.cols()).transpose();
  fit.bd = Wfull.row(states.cols()).transpose();
  const double yn = Y.norm();
  fit.residual = yn > 0 ? (X * Wfull - Y).norm() / yn : 0.0;
  return fit;
}

}  // namespace

DecoderFit fit_decoder(const MatrixXd& states, const std::vector<int>& targets,
                       int alphabet, double ridge_scale, double smoothing) {
  const long n = states.rows();
  if (static_cast<long>(targets.size()) != n)
    throw DimensionMismatch("fit_decoder: target count mismatch");
  if (alphabet < 2) throw DimensionMismatch("fit_decoder: alphabet must be >= 2");
  const double hot = std::log(1.0 - (alphabet - 1) * smoothing);
  const double cold = std::log(smoothing);
  MatrixXd Y = MatrixXd::Constant(n, alphabet, cold);
  for (long i = 0; i < n; ++i) {
    const int y = targets[static_cast<std::size_t>(i)];
    if (y < 0 || y >= alphabet)
      throw DimensionMismatch("fit_decoder: target outside alphabet");
    Y(i, y) = hot;
  }
  return fit_decoder_impl(states, Y, ridge_scale);
}

DecoderFit fit_decoder(const MatrixXd& states, const MatrixXd& targets,
                       double ridge_scale) {
  return fit_decoder_impl(states, targets, ridge_scale);
}

namespace {

void push_stage(InitReport* rep, std::string name, long count, double lambda,
                double residual) {
  if (!rep) return;
  StageReport s;
  s.name = std::move(name);
  s.count = count;
  s.lambda = lambda;
  s.residual = residual;
  rep->stages.push_back(std::move(s));
}

// Stage-one moments: the normalizer accumulator covers every triple (and
// carries the future-feature mean); the transition accumulator covers the
// triples that also have a next-step future feature.
void accumulate_triples(const TripleSet& ts, double augment_c,
                        MomentAccumulator& accW, MomentAccumulator& accZ) {
  for (long i = 0; i < ts.n; ++i) {
    VectorXd eta = ts.eta.row(i);
    VectorXd omega = ts.omega.row(i);
    VectorXd phi = augment_constant(ts.phi.row(i), augment_c);
    accZ.add(omega, omega, eta, eta, phi, phi);
    if (ts.has_next[static_cast<std::size_t>(i)]) {
      VectorXd phi_next = augment_constant(ts.phi_next.row(i), augment_c);
      accW.add(phi_next, omega, eta, eta, phi);
    }
  }
}

Layer make_full_layer(Tensor3 W, const VectorXd& q1_unit, double eps_bias) {
  Layer l;
  l.kind = Layer::Kind::Full;
  l.full.W = std::move(W);
  l.full.b = eps_bias * q1_unit;
  l.q1 = q1_unit;
  return l;
}

// Fit one stacked layer from the filtered states of the model built so
// far.  States are lifted through a fresh RFF + projection; the history
// feature is the lifted state one step back, the observation feature is
// the raw state itself (it is what the new layer will consume when
// filtering), and the future feature is the lifted state plus constant.
Layer fit_stacked_layer(const std::vector<MatrixXd>& layer_states,
                        const TwoStageOptions& opt, int layer_index,
                        InitReport* rep, Warnings* warn) {
  long total = 0;
  for (const auto& s : layer_states) total += s.rows();
  if (total == 0) throw EmptyData("init_2sr: no states to fit a stacked layer from");
  const int dq = static_cast<int>(layer_states[0].cols());
  MatrixXd all(total, dq);
  long at = 0;
  for (const auto& s : layer_states) {
    all.middleRows(at, s.rows()) = s;
    at += s.rows();
  }

  const double sigma = fit_bandwidth(all, opt.seed);
  const RffMap rmap = sample_rff(dq, opt.rff_count, sigma, opt.seed);
  const Projection proj = fit_projection(apply_rff(rmap, all), opt.proj_dim, warn);

  MomentAccumulator acc;
  for (const auto& s : layer_states) {
    const long T = s.rows();
    if (T < 3)
      throw SequenceTooShort("init_2sr: sequence too short for a stacked layer");
    MatrixXd g = project(proj, apply_rff(rmap, s));
    for (long t = 1; t + 1 < T; ++t) {
      VectorXd eta = g.row(t - 1);
      VectorXd omega = s.row(t);
      VectorXd phi = augment_constant(g.row(t), opt.augment_c);
      VectorXd phi_next = augment_constant(g.row(t + 1), opt.augment_c);
      acc.add(phi_next, omega, eta, eta, phi, phi);
    }
  }
  const double lambda = opt.ridge_scale * static_cast<double>(acc.count);
  double residual = 0.0;
  Tensor3 W = opt.pure_pinv ? estimate_W(acc, 0.0, &residual, warn)
                            : estimate_W(acc, lambda, &residual, warn);
  push_stage(rep, "layer" + std::to_string(layer_index) + ".W", acc.count,
             opt.pure_pinv ? 0.0 : lambda, residual);
  return make_full_layer(std::move(W), estimate_q1(acc), opt.eps_bias);
}

template <typename Seq>
std::vector<MatrixXd> filter_states_per_seq(const PsrnnModel& m,
                                            const std::vector<Seq>& seqs, int layer,
                                            FilterStats* stats) {
  std::vector<MatrixXd> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    FilterResult fr = filter(m, s, NormMode::Train, /*want_preds=*/false);
    if (stats) stats->absorb(fr.stats);
    out.push_back(std::move(fr.states[static_cast<std::size_t>(layer)]));
  }
  return out;
}

void warn_underflows(const FilterStats& st, InitReport* rep, const char* where) {
  if (rep && st.underflows > 0)
    rep->warnings.push_back(std::string(where) + ": " + std::to_string(st.underflows) +
                            " normalization underflow(s) during initialization filtering");
}

}  // namespace

PsrnnModel init_2sr(const std::vector<std::vector<int>>& train, int alphabet,
                    int n_layers, const TwoStageOptions& opt, InitReport* rep) {
  if (n_layers < 1) throw DimensionMismatch("init_2sr: need at least one layer");
  if (alphabet < 2) throw DimensionMismatch("init_2sr: alphabet must be >= 2");
  Warnings warn;

  TripleSet ts = build_triples(train, alphabet, opt.window);
  MomentAccumulator accW, accZ;
  accumulate_triples(ts, opt.augment_c, accW, accZ);
  if (accW.count == 0)
    throw SequenceTooShort("init_2sr: no adjacent feature pairs for stage-two regression");

  const double lambda_w = opt.ridge_scale * static_cast<double>(accW.count);
  double res_w = 0.0;
  Tensor3 W = opt.pure_pinv ? estimate_W(accW, 0.0, &res_w, &warn)
                            : estimate_W(accW, lambda_w, &res_w, &warn);
  push_stage(rep, "layer0.W", accW.count, opt.pure_pinv ? 0.0 : lambda_w, res_w);

  PsrnnModel m;
  m.enc.kind = Encoder::Kind::OneHot;
  m.enc.alphabet = alphabet;
  m.meta.kind = "discrete";
  m.meta.alphabet = alphabet;
  m.layers.push_back(make_full_layer(std::move(W), estimate_q1(accZ), opt.eps_bias));

  FilterStats fstats;
  for (int li = 1; li < n_layers; ++li) {
    std::vector<MatrixXd> states = filter_states_per_seq(m, train, li - 1, &fstats);
    m.layers.push_back(fit_stacked_layer(states, opt, li, rep, &warn));
  }

  // Decoder on the top layer's states: state after o_t predicts o_{t+1}.
  std::vector<MatrixXd> top = filter_states_per_seq(m, train, n_layers - 1, &fstats);
  long pairs = 0;
  for (const auto& s : top) pairs += std::max<long>(0, s.rows() - 1);
  if (pairs == 0) throw SequenceTooShort("init_2sr: no decoder training pairs");
  MatrixXd X(pairs, m.top_dim());
  std::vector<int> y;
  y.reserve(static_cast<std::size_t>(pairs));
  long at = 0;
  for (std::size_t si = 0; si < train.size(); ++si) {
    const long T = top[si].rows();
    for (long t = 0; t + 1 < T; ++t) {
      X.row(at++) = top[si].row(t);
      y.push_back(train[si][static_cast<std::size_t>(t + 1)]);
    }
  }
  DecoderFit fit = fit_decoder(X, y, alphabet, opt.ridge_scale, opt.decoder_smoothing);
  m.Wd = fit.Wd;
  m.bd = fit.bd;
  push_stage(rep, "decoder", pairs, opt.ridge_scale * pairs, fit.residual);
  warn_underflows(fstats, rep, "init_2sr");
  if (rep)
    for (auto& w : warn.items) rep->warnings.push_back(w);
  return m;
}

PsrnnModel init_2sr(const std::vector<MatrixXd>& train, int n_layers,
                    const TwoStageOptions& opt, InitReport* rep) {
  if (n_layers < 1) throw DimensionMismatch("init_2sr: need at least one layer");
  if (train.empty()) throw EmptyData("init_2sr: no trajectories");
  Warnings warn;
  const int d = static_cast<int>(train[0].cols());
  const WindowSpec& w = opt.window;

  // Fit one encoder per stream on its stacked windows.
  auto collect = [&](int offset, int len) {
    long total = 0;
    for (const auto& s : train) total += std::max<long>(0, s.rows() - w.past_len - w.future_len + 1);
    MatrixXd out(total, static_cast<Eigen::Index>(len) * d);
    long at = 0;
    for (const auto& s : train) {
      const long T = s.rows();
      for (long t = w.past_len; t + w.future_len <= T; ++t)
        out.row(at++) = stack_window(s, t + offset, len);
    }
    return out;
  };

  auto make_encoder = [&](const MatrixXd& windows, std::uint64_t seed) {
    StreamEncoder e;
    const double sigma = fit_bandwidth(windows, seed);
    e.rff = sample_rff(static_cast<int>(windows.cols()), opt.rff_count, sigma, seed);
    e.proj = fit_projection(apply_rff(e.rff, windows),
                            std::min(opt.proj_dim, opt.rff_count), &warn);
    return e;
  };

  StreamEncoder hist = make_encoder(collect(-w.past_len, w.past_len), opt.seed);
  StreamEncoder obs = make_encoder(collect(0, 1), opt.seed + 1);
  StreamEncoder fut = make_encoder(collect(0, w.future_len), opt.seed + 2);

  TripleSet ts = build_triples(train, w, hist, obs, fut);
  MomentAccumulator accW, accZ;
  accumulate_triples(ts, opt.augment_c, accW, accZ);
  if (accW.count == 0)
    throw SequenceTooShort("init_2sr: no adjacent feature pairs for stage-two regression");

  const double lambda_w = opt.ridge_scale * static_cast<double>(accW.count);
  double res_w = 0.0;
  Tensor3 W = opt.pure_pinv ? estimate_W(accW, 0.0, &res_w, &warn)
                            : estimate_W(accW, lambda_w, &res_w, &warn);
  push_stage(rep, "layer0.W", accW.count, opt.pure_pinv ? 0.0 : lambda_w, res_w);

  PsrnnModel m;
  m.enc.kind = Encoder::Kind::RffProj;
  m.enc.rff = obs.rff;
  m.enc.proj = obs.proj;
  m.meta.kind = "continuous";
  m.meta.obs_dim = d;
  m.layers.push_back(make_full_layer(std::move(W), estimate_q1(accZ), opt.eps_bias));

  FilterStats fstats;
  for (int li = 1; li < n_layers; ++li) {
    std::vector<MatrixXd> states = filter_states_per_seq(m, train, li - 1, &fstats);
    m.layers.push_back(fit_stacked_layer(states, opt, li, rep, &warn));
  }

  std::vector<MatrixXd> top = filter_states_per_seq(m, train, n_layers - 1, &fstats);
  long pairs = 0;
  for (const auto& s : top) pairs += std::max<long>(0, s.rows() - 1);
  if (pairs == 0) throw SequenceTooShort("init_2sr: no decoder training pairs");
  MatrixXd X(pairs, m.top_dim());
  MatrixXd Y(pairs, d);
  long at = 0;
  for (std::size_t si = 0; si < train.size(); ++si) {
    const long T = top[si].rows();
    for (long t = 0; t + 1 < T; ++t) {
      X.row(at) = top[si].row(t);
      Y.row(at) = train[si].row(t + 1);
      ++at;
    }
  }
  DecoderFit fit = fit_decoder(X, Y, opt.ridge_scale);
  m.Wd = fit.Wd;
  m.bd = fit.bd;
  push_stage(rep, "decoder", pairs, opt.ridge_scale * pairs, fit.residual);
  warn_underflows(fstats, rep, "init_2sr");
  if (rep)
    for (auto& wmsg : warn.items) rep->warnings.push_back(wmsg);
  return m;
}

PsrnnModel init_random(int alphabet, int n_layers, int state_dim, std::uint64_t seed) {
  if (alphabet < 2) throw DimensionMismatch("init_random: alphabet must be >= 2");
  if (n_layers < 1 || state_dim < 1)
    throw DimensionMismatch("init_random: bad architecture");
  Rng rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);

  PsrnnModel m;
  m.enc.kind = Encoder::Kind::OneHot;
  m.enc.alphabet = alphabet;
  m.meta.kind = "discrete";
  m.meta.alphabet = alphabet;

  for (int li = 0; li < n_layers; ++li) {
    const int d_in = li == 0 ? alphabet : state_dim;
    Layer l;
    l.kind = Layer::Kind::Full;
    l.full.W = Tensor3(state_dim, d_in, state_dim);
    const double sw = std::sqrt(2.0 / (static_cast<double>(d_in) * state_dim + state_dim));
    for (double& x : l.full.W.v) x = sw * N(rng);
    l.full.b = VectorXd::Zero(state_dim);
    l.q1.resize(state_dim);
    for (int i = 0; i < state_dim; ++i) l.q1[i] = N(rng);
    const double qn = l.q1.norm();
    if (qn < kNormFloor) throw NormalizationUnderflow("init_random: zero initial state draw");
    l.q1 /= qn;
    m.layers.push_back(std::move(l));
  }

  const double sd = std::sqrt(2.0 / (alphabet + state_dim));
  m.Wd.resize(alphabet, state_dim);
  for (int i = 0; i < alphabet; ++i)
    for (int j = 0; j < state_dim; ++j) m.Wd(i, j) = sd * N(rng);
  m.bd = VectorXd::Zero(alphabet);
  return m;
}

FullNormModel init_full_norm(const std::vector<std::vector<int>>& train, int alphabet,
                             double ridge_scale, bool pure_pinv, InitReport* rep) {
  Warnings warn;
  TripleSet ts = build_triples(train, alphabet, WindowSpec{1, 1});
  MomentAccumulator accW, accZ;
  for (long i = 0; i < ts.n; ++i) {
    VectorXd eta = ts.eta.row(i);
    VectorXd omega = ts.omega.row(i);
    VectorXd phi = ts.phi.row(i);
    accZ.add(omega, omega, eta, eta, phi, phi);
    if (ts.has_next[static_cast<std::size_t>(i)]) {
      VectorXd phi_next = ts.phi_next.row(i);
      accW.add(phi_next, omega, eta, eta, phi);
    }
  }
  if (accW.count == 0)
    throw SequenceTooShort("init_full_norm: no adjacent feature pairs");

  FullNormModel m;
  double res_w = 0.0, res_z = 0.0;
  const double lw = pure_pinv ? 0.0 : ridge_scale * static_cast<double>(accW.count);
  const double lz = pure_pinv ? 0.0 : ridge_scale * static_cast<double>(accZ.count);
  m.W = estimate_W(accW, lw, &res_w, &warn);
  m.Z = estimate_Z(accZ, lz, &res_z, &warn);
  m.q1 = accZ.sum1 / static_cast<double>(accZ.count);
  push_stage(rep, "W", accW.count, lw, res_w);
  push_stage(rep, "Z", accZ.count, lz, res_z);
  if (rep)
    for (auto& wmsg : warn.items) rep->warnings.push_back(wmsg);
  return m;
}

MatrixXd full_norm_predictions(const FullNormModel& m, const std::vector<int>& obs,
                               double eps_inv) {
  const long T = static_cast<long>(obs.size());
  const int A = m.W.d2;
  if (m.W.d1 != A)
    throw DimensionMismatch(
        "full_norm_predictions: defined for one-step unaugmented future features");
  MatrixXd preds(T, A);
  const double qs = m.q1.sum();
  if (std::abs(qs) < 1e-300)
    throw SingularNormalizer("full_norm_predictions: initial state sums to zero");
  VectorXd q = m.q1 / qs;
  for (long t = 0; t < T; ++t) {
    VectorXd p = q.cwiseMax(0.0);
    const double ps = p.sum();
    if (ps < 1e-300)
      throw SingularNormalizer("full_norm_predictions: clipped state sums to zero");
    preds.row(t) = (p / ps).head(A);
    q = cell_update_full_norm(m.W, m.Z, q, one_hot(obs[static_cast<std::size_t>(t)], A),
                              eps_inv);
  }
  return preds;
}

double mean_tv(const MatrixXd& model_preds, const MatrixXd& exact_preds) {
  const long n = std::min(model_preds.rows() - 1, exact_preds.rows() - 1);
  if (n <= 0) throw EmptyData("mean_tv: not enough rows");
  double s = 0.0;
  for (long t = 0; t < n; ++t)
    s += 0.5 * (model_preds.row(t + 1) - exact_preds.row(t)).cwiseAbs().sum();
  return s / static_cast<double>(n);
}

}  // namespace psrnn
