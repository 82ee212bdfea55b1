#include "psrnn/train.hpp"

#include <cmath>
#include <type_traits>

namespace psrnn {

GradientSet GradientSet::zeros_like(const PsrnnModel& m) {
  GradientSet g;
  g.layers.resize(m.layers.size());
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    const Layer& l = m.layers[li];
    LayerGrads& lg = g.layers[li];
    if (l.kind == Layer::Kind::Full) {
      lg.W = Tensor3(l.full.W.d1, l.full.W.d2, l.full.W.d3);
    } else {
      lg.A = MatrixXd::Zero(l.fact.A.rows(), l.fact.A.cols());
      lg.B = MatrixXd::Zero(l.fact.B.rows(), l.fact.B.cols());
      lg.C = MatrixXd::Zero(l.fact.C.rows(), l.fact.C.cols());
    }
    lg.b = VectorXd::Zero(l.bias().size());
    lg.q1 = VectorXd::Zero(l.q1.size());
  }
  g.Wd = MatrixXd::Zero(m.Wd.rows(), m.Wd.cols());
  g.bd = VectorXd::Zero(m.bd.size());
  if (m.enc.kind == Encoder::Kind::RffProj)
    g.enc_basis = MatrixXd::Zero(m.enc.proj.basis.rows(), m.enc.proj.basis.cols());
  return g;
}

void GradientSet::add(const GradientSet& o) {
  if (layers.size() != o.layers.size())
    throw DimensionMismatch("GradientSet::add: layer count mismatch");
  for (std::size_t li = 0; li < layers.size(); ++li) {
    LayerGrads& a = layers[li];
    const LayerGrads& b2 = o.layers[li];
    if (a.W.size()) a.W.axpy(1.0, b2.W);
    if (a.A.size()) {
      a.A += b2.A;
      a.B += b2.B;
      a.C += b2.C;
    }
    a.b += b2.b;
    a.q1 += b2.q1;
  }
  Wd += o.Wd;
  bd += o.bd;
  if (enc_basis.size()) enc_basis += o.enc_basis;
}

void GradientSet::scale(double a) {
  for (LayerGrads& lg : layers) {
    for (double& x : lg.W.v) x *= a;
    lg.A *= a;
    lg.B *= a;
    lg.C *= a;
    lg.b *= a;
    lg.q1 *= a;
  }
  Wd *= a;
  bd *= a;
  enc_basis *= a;
}

double GradientSet::squared_norm() const {
  double s = 0.0;
  auto acc_t = [&s](const Tensor3& t) {
    for (double x : t.v) s += x * x;
  };
  auto acc_m = [&s](const MatrixXd& m) { s += m.squaredNorm(); };
  for (const LayerGrads& lg : layers) {
    acc_t(lg.W);
    acc_m(lg.A);
    acc_m(lg.B);
    acc_m(lg.C);
    s += lg.b.squaredNorm() + lg.q1.squaredNorm();
  }
  s += Wd.squaredNorm() + bd.squaredNorm() + enc_basis.squaredNorm();
  return s;
}

bool GradientSet::all_finite() const {
  auto fin_t = [](const Tensor3& t) {
    for (double x : t.v)
      if (!std::isfinite(x)) return false;
    return true;
  };
  for (const LayerGrads& lg : layers) {
    if (!fin_t(lg.W)) return false;
    if (lg.A.size() && !(lg.A.allFinite() && lg.B.allFinite() && lg.C.allFinite()))
      return false;
    if (!lg.b.allFinite() || !lg.q1.allFinite()) return false;
  }
  if (!Wd.allFinite() || !bd.allFinite()) return false;
  if (enc_basis.size() && !enc_basis.allFinite()) return false;
  return true;
}

namespace {

VectorXd softmax(const VectorXd& z) {
  Eigen::ArrayXd e = (z.array() - z.maxCoeff()).exp();
  return (e / e.sum()).matrix();
}

double log_sum_exp(const VectorXd& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

}  // namespace

double loss_bpc(const MatrixXd& logits, const std::vector<int>& targets) {
  const long n = static_cast<long>(targets.size());
  if (n == 0) throw EmptyData("loss_bpc: no targets");
  if (logits.rows() != n) throw DimensionMismatch("loss_bpc: row count mismatch");
  double s = 0.0;
  for (long t = 0; t < n; ++t) {
    const int y = targets[static_cast<std::size_t>(t)];
    if (y < 0 || y >= logits.cols()) throw DimensionMismatch("loss_bpc: target out of range");
    VectorXd z = logits.row(t);
    s += z[y] - log_sum_exp(z);
  }
  return -s / (static_cast<double>(n) * kLn2);
}

double metric_ospa(const MatrixXd& logits, const std::vector<int>& targets) {
  const long n = static_cast<long>(targets.size());
  if (n == 0) throw EmptyData("metric_ospa: no targets");
  if (logits.rows() != n) throw DimensionMismatch("metric_ospa: row count mismatch");
  long hits = 0;
  for (long t = 0; t < n; ++t) {
    Eigen::Index arg;
    logits.row(t).maxCoeff(&arg);
    if (static_cast<int>(arg) == targets[static_cast<std::size_t>(t)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

double loss_mse(const MatrixXd& preds, const MatrixXd& targets) {
  if (preds.rows() != targets.rows() || preds.cols() != targets.cols())
    throw DimensionMismatch("loss_mse: shape mismatch");
  if (preds.rows() == 0) throw EmptyData("loss_mse: no rows");
  return (preds - targets).rowwise().squaredNorm().mean();
}

namespace {

// Adapters giving bptt_window one code path over both data kinds.
struct DiscreteIo {
  const PsrnnModel& m;
  const std::vector<int>& seq;
  long length() const { return static_cast<long>(seq.size()); }
  VectorXd encode(long t, VectorXd* /*rff_centered*/) const {
    return m.enc.encode(seq[static_cast<std::size_t>(t)]);
  }
  // Returns the step loss in bits and the unscaled logit gradient
  // (softmax - onehot); the caller applies 1/(ln2 * nsteps).
  double step_loss(const VectorXd& logits, long t, VectorXd* dlogits) const {
    const int y = seq[static_cast<std::size_t>(t + 1)];
    const double lse = log_sum_exp(logits);
    if (dlogits) {
      *dlogits = softmax(logits);
      (*dlogits)[y] -= 1.0;
    }
    return (lse - logits[y]) / kLn2;
  }
  double grad_scale(long nsteps) const { return 1.0 / (kLn2 * static_cast<double>(nsteps)); }
  bool wants_enc_grads() const { return false; }
};

struct ContinuousIo {
  const PsrnnModel& m;
  const MatrixXd& seq;
  long length() const { return seq.rows(); }
  VectorXd encode(long t, VectorXd* rff_centered) const {
    VectorXd r = apply_rff(m.enc.rff, VectorXd(seq.row(t))) - m.enc.proj.mean;
    VectorXd out = m.enc.proj.basis * r;
    if (rff_centered) *rff_centered = std::move(r);
    return out;
  }
  double step_loss(const VectorXd& pred, long t, VectorXd* dpred) const {
    VectorXd diff = pred - seq.row(t + 1).transpose();
    if (dpred) *dpred = 2.0 * diff;
    return diff.squaredNorm();
  }
  double grad_scale(long nsteps) const { return 1.0 / static_cast<double>(nsteps); }
  bool wants_enc_grads() const { return true; }
};

template <typename Io>
WindowGrad bptt_window_impl(const PsrnnModel& m, const Io& io, long t0, long t1,
                            const std::vector<VectorXd>& q_in, bool first_window,
                            const TrainConfig& cfg) {
  const long T = io.length();
  if (t0 < 0 || t1 <= t0 || t1 > T - 1)
    throw DimensionMismatch("bptt_window: window [" + std::to_string(t0) + "," +
                            std::to_string(t1) + ") out of range for length " +
                            std::to_string(T));
  const int L = m.n_layers();
  if (static_cast<int>(q_in.size()) != L)
    throw DimensionMismatch("bptt_window: q_in layer count mismatch");
  if (m.Wd.size() == 0) throw EmptyData("bptt_window: model has no decoder");
  const long n = t1 - t0;
  const bool enc_grads = io.wants_enc_grads() && cfg.train_encoder;

  WindowGrad out;
  out.g = GradientSet::zeros_like(m);

  // Forward, caching per step and layer: entering state, exiting state and
  // the pre-normalization norm.
  std::vector<VectorXd> inp0(static_cast<std::size_t>(n));
  std::vector<VectorXd> rffc(enc_grads ? static_cast<std::size_t>(n) : 0);
  std::vector<std::vector<VectorXd>> qins(static_cast<std::size_t>(n)),
      qns(static_cast<std::size_t>(n));
  std::vector<std::vector<double>> norms(static_cast<std::size_t>(n));
  std::vector<VectorXd> dlogits(static_cast<std::size_t>(n));

  std::vector<VectorXd> qs = q_in;
  double loss = 0.0;
  for (long s = 0; s < n; ++s) {
    const long t = t0 + s;
    const std::size_t si = static_cast<std::size_t>(s);
    inp0[si] = io.encode(t, enc_grads ? &rffc[si] : nullptr);
    qins[si].resize(L);
    qns[si].resize(L);
    norms[si].resize(L);
    VectorXd inp = inp0[si];
    for (int li = 0; li < L; ++li) {
      qins[si][li] = qs[li];
      VectorXd u = cell_prenorm(m.layers[li], qs[li], inp);
      double nn = 0.0;
      qns[si][li] = normalize_state(u, NormMode::Train, &out.stats, &nn);
      norms[si][li] = nn;
      qs[li] = qns[si][li];
      inp = qs[li];
    }
    VectorXd pred = m.Wd * qs[L - 1] + m.bd;
    loss += io.step_loss(pred, t, &dlogits[si]);
  }
  out.loss = loss / static_cast<double>(n);
  out.q_out = qs;

  // Backward through the window.
  std::vector<VectorXd> dq_carry(static_cast<std::size_t>(L));
  for (int li = 0; li < L; ++li)
    dq_carry[li] = VectorXd::Zero(m.layers[li].state_dim());
  const double scale = io.grad_scale(n);

  for (long s = n - 1; s >= 0; --s) {
    const long t = t0 + s;
    const std::size_t si = static_cast<std::size_t>(s);
    VectorXd dlog = dlogits[si] * scale;
    out.g.Wd.noalias() += dlog * qns[si][L - 1].transpose();
    out.g.bd += dlog;
    VectorXd dfrom_above = m.Wd.transpose() * dlog;

    for (int li = L - 1; li >= 0; --li) {
      const Layer& l = m.layers[li];
      const VectorXd& qn = qns[si][li];
      const VectorXd& qin = qins[si][li];
      const VectorXd& inp = li == 0 ? inp0[si] : qns[si][li - 1];
      VectorXd dqn = dq_carry[li] + dfrom_above;
      VectorXd du = (dqn - qn * qn.dot(dqn)) / norms[si][li];
      if (!du.allFinite())
        throw NonFiniteGradient("bptt_window: non-finite gradient at layer " +
                                std::to_string(li) + ", step " + std::to_string(t));
      LayerGrads& lg = out.g.layers[li];
      if (l.kind == Layer::Kind::Full) {
        add_outer3(lg.W, du, inp, qin);
        MatrixXd M1 = contract_vec(l.full.W, 1, du);  // d_obs x d_state
        dfrom_above = M1 * qin;
        dq_carry[li] = M1.transpose() * inp;
      } else {
        VectorXd Bo = l.fact.B * inp;
        VectorXd Cq = l.fact.C * qin;
        VectorXd dh = l.fact.A * du;
        lg.A.noalias() += Bo.cwiseProduct(Cq) * du.transpose();
        lg.B.noalias() += dh.cwiseProduct(Cq) * inp.transpose();
        lg.C.noalias() += dh.cwiseProduct(Bo) * qin.transpose();
        dfrom_above = l.fact.B.transpose() * dh.cwiseProduct(Cq);
        dq_carry[li] = l.fact.C.transpose() * dh.cwiseProduct(Bo);
      }
      lg.b += du;
    }
    if (enc_grads) out.g.enc_basis.noalias() += dfrom_above * rffc[si].transpose();
  }

  // The initial state is learned through its normalization, and only via
  // the first window: later windows treat their entry state as a constant.
  if (first_window && cfg.train_q1) {
    for (int li = 0; li < L; ++li) {
      const VectorXd& q1 = m.layers[li].q1;
      const double nq = std::max(q1.norm(), kNormFloor);
      VectorXd qh = q1 / nq;
      out.g.layers[li].q1 = (dq_carry[li] - qh * qh.dot(dq_carry[li])) / nq;
    }
  }
  return out;
}

template <typename Io>
double window_loss_impl(const PsrnnModel& m, const Io& io, long t0, long t1) {
  const long T = io.length();
  if (t0 < 0 || t1 <= t0 || t1 > T - 1)
    throw DimensionMismatch("window_loss: window out of range");
  const int L = m.n_layers();
  FilterStats st;
  std::vector<VectorXd> qs(static_cast<std::size_t>(L));
  for (int li = 0; li < L; ++li) qs[li] = normalize_state(m.layers[li].q1, NormMode::Train, &st);
  double loss = 0.0;
  for (long t = t0; t < t1; ++t) {
    VectorXd inp = io.encode(t, nullptr);
    for (int li = 0; li < L; ++li) {
      qs[li] = cell_update(m.layers[li], qs[li], inp, NormMode::Train, &st);
      inp = qs[li];
    }
    VectorXd pred = m.Wd * qs[L - 1] + m.bd;
    loss += io.step_loss(pred, t, nullptr);
  }
  return loss / static_cast<double>(t1 - t0);
}

}  // namespace

WindowGrad bptt_window(const PsrnnModel& m, const std::vector<int>& seq, long t0,
                       long t1, const std::vector<VectorXd>& q_in, bool first_window,
                       const TrainConfig& cfg) {
  return bptt_window_impl(m, DiscreteIo{m, seq}, t0, t1, q_in, first_window, cfg);
}

WindowGrad bptt_window(const PsrnnModel& m, const MatrixXd& seq, long t0, long t1,
                       const std::vector<VectorXd>& q_in, bool first_window,
                       const TrainConfig& cfg) {
  return bptt_window_impl(m, ContinuousIo{m, seq}, t0, t1, q_in, first_window, cfg);
}

double window_loss(const PsrnnModel& m, const std::vector<int>& seq, long t0, long t1) {
  return window_loss_impl(m, DiscreteIo{m, seq}, t0, t1);
}

double window_loss(const PsrnnModel& m, const MatrixXd& seq, long t0, long t1) {
  return window_loss_impl(m, ContinuousIo{m, seq}, t0, t1);
}

namespace {

EvalResult eval_discrete(const PsrnnModel& m, const std::vector<std::vector<int>>& data,
                         NormMode mode, FilterStats* fs) {
  if (m.Wd.size() == 0) throw EmptyData("evaluate: model has no decoder");
  double nll = 0.0;
  long hits = 0, pairs = 0;
  for (const auto& seq : data) {
    const long T = static_cast<long>(seq.size());
    if (T < 2) continue;
    FilterResult fr = filter(m, seq, mode);
    if (fs) fs->absorb(fr.stats);
    for (long t = 0; t + 1 < T; ++t) {
      VectorXd z = fr.preds.row(t);
      const int y = seq[static_cast<std::size_t>(t + 1)];
      nll += log_sum_exp(z) - z[y];
      Eigen::Index arg;
      z.maxCoeff(&arg);
      if (static_cast<int>(arg) == y) ++hits;
      ++pairs;
    }
  }
  if (pairs == 0) throw EmptyData("evaluate: no prediction pairs");
  EvalResult r;
  r.steps = pairs;
  r.bpc = nll / (static_cast<double>(pairs) * kLn2);
  r.ospa = static_cast<double>(hits) / static_cast<double>(pairs);
  return r;
}

EvalResult eval_continuous(const PsrnnModel& m, const std::vector<MatrixXd>& data,
                           NormMode mode, FilterStats* fs) {
  if (m.Wd.size() == 0) throw EmptyData("evaluate: model has no decoder");
  double se = 0.0;
  long pairs = 0;
  for (const auto& seq : data) {
    const long T = seq.rows();
    if (T < 2) continue;
    FilterResult fr = filter(m, seq, mode);
    if (fs) fs->absorb(fr.stats);
    se += (fr.preds.topRows(T - 1) - seq.bottomRows(T - 1)).rowwise().squaredNorm().sum();
    pairs += T - 1;
  }
  if (pairs == 0) throw EmptyData("evaluate: no prediction pairs");
  EvalResult r;
  r.steps = pairs;
  r.mse = se / static_cast<double>(pairs);
  return r;
}

void apply_update(PsrnnModel& m, GradientSet g, const TrainConfig& cfg, TrainStats* st) {
  if (!g.all_finite()) throw NonFiniteGradient("sgd_refine: non-finite update");
  if (cfg.grad_clip > 0.0) {
    const double nn = std::sqrt(g.squared_norm());
    if (nn > cfg.grad_clip) {
      g.scale(cfg.grad_clip / nn);
      if (st) ++st->clip_events;
    }
  }
  const double lr = cfg.learning_rate;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    Layer& l = m.layers[li];
    LayerGrads& lg = g.layers[li];
    if (l.kind == Layer::Kind::Full) {
      l.full.W.axpy(-lr, lg.W);
    } else {
      l.fact.A -= lr * lg.A;
      l.fact.B -= lr * lg.B;
      l.fact.C -= lr * lg.C;
    }
    l.bias() -= lr * lg.b;
    if (cfg.train_q1) {
      l.q1 -= lr * lg.q1;
      const double nq = l.q1.norm();
      if (nq < kNormFloor)
        throw NormalizationUnderflow("sgd_refine: initial state collapsed to zero");
      l.q1 /= nq;
    }
  }
  m.Wd -= lr * g.Wd;
  m.bd -= lr * g.bd;
  if (g.enc_basis.size() && cfg.train_encoder) m.enc.proj.basis -= lr * g.enc_basis;
}

template <typename SeqT, typename EvalFn>
std::vector<CurveRow> sgd_impl(PsrnnModel& m, const std::vector<SeqT>& train,
                               const TrainConfig& cfg, TrainStats* stats,
                               const EvalFn& emit_rows) {
  if (cfg.epochs < 0) throw ConfigError("sgd_refine: negative epoch count");
  if (cfg.learning_rate < 0) throw ConfigError("sgd_refine: negative learning rate");
  if (train.empty()) throw EmptyData("sgd_refine: no training sequences");

  auto seq_len = [](const SeqT& s) {
    if constexpr (std::is_same_v<SeqT, std::vector<int>>)
      return static_cast<long>(s.size());
    else
      return static_cast<long>(s.rows());
  };

  std::vector<CurveRow> curves;
  emit_rows(curves, 0);

  for (int ep = 1; ep <= cfg.epochs; ++ep) {
    GradientSet pending = GradientSet::zeros_like(m);
    long nb = 0;
    auto flush = [&]() {
      if (nb == 0) return;
      pending.scale(1.0 / static_cast<double>(nb));
      apply_update(m, std::move(pending), cfg, stats);
      pending = GradientSet::zeros_like(m);
      nb = 0;
    };

    for (const SeqT& seq : train) {
      const long T = seq_len(seq);
      if (T < 2)
        throw SequenceTooShort("sgd_refine: sequence shorter than two steps");
      const long H = cfg.bptt_horizon > 0 ? cfg.bptt_horizon : T - 1;

      std::vector<VectorXd> qs(m.layers.size());
      FilterStats st0;
      for (std::size_t li = 0; li < m.layers.size(); ++li)
        qs[li] = normalize_state(m.layers[li].q1, NormMode::Train, &st0);

      for (long w0 = 0; w0 < T - 1; w0 += H) {
        const long w1 = std::min(w0 + H, T - 1);
        WindowGrad wg = bptt_window(m, seq, w0, w1, qs, /*first_window=*/w0 == 0, cfg);
        if (stats) stats->underflows += wg.stats.underflows;
        qs = std::move(wg.q_out);
        pending.add(wg.g);
        ++nb;
        if (cfg.batch_windows > 0 && nb == cfg.batch_windows) flush();
      }
    }
    flush();
    emit_rows(curves, ep);
  }
  return curves;
}

}  // namespace

EvalResult evaluate(const PsrnnModel& m, const std::vector<std::vector<int>>& data) {
  return eval_discrete(m, data, NormMode::Eval, nullptr);
}

EvalResult evaluate(const PsrnnModel& m, const std::vector<MatrixXd>& data) {
  return eval_continuous(m, data, NormMode::Eval, nullptr);
}

std::vector<CurveRow> sgd_refine(PsrnnModel& m, const std::vector<std::vector<int>>& train,
                                 const std::vector<std::vector<int>>& test,
                                 const TrainConfig& cfg, TrainStats* stats) {
  auto emit = [&](std::vector<CurveRow>& rows, int epoch) {
    FilterStats fs;
    EvalResult tr = eval_discrete(m, train, NormMode::Train, &fs);
    rows.push_back({epoch, "train", "bpc", tr.bpc});
    rows.push_back({epoch, "train", "ospa", tr.ospa});
    if (!test.empty()) {
      EvalResult te = eval_discrete(m, test, NormMode::Train, &fs);
      rows.push_back({epoch, "test", "bpc", te.bpc});
      rows.push_back({epoch, "test", "ospa", te.ospa});
    }
    if (stats) stats->underflows += fs.underflows;
  };
  return sgd_impl(m, train, cfg, stats, emit);
}

std::vector<CurveRow> sgd_refine(PsrnnModel& m, const std::vector<MatrixXd>& train,
                                 const std::vector<MatrixXd>& test, const TrainConfig& cfg,
                                 TrainStats* stats) {
  auto emit = [&](std::vector<CurveRow>& rows, int epoch) {
    FilterStats fs;
    EvalResult tr = eval_continuous(m, train, NormMode::Train, &fs);
    rows.push_back({epoch, "train", "mse", tr.mse});
    if (!test.empty()) {
      EvalResult te = eval_continuous(m, test, NormMode::Train, &fs);
      rows.push_back({epoch, "test", "mse", te.mse});
    }
    if (stats) stats->underflows += fs.underflows;
  };
  return sgd_impl(m, train, cfg, stats, emit);
}

namespace {

struct ParamView {
  std::string name;
  double* p = nullptr;
  const double* g = nullptr;
  std::size_t count = 0;
};

std::vector<ParamView> param_views(PsrnnModel& m, const GradientSet& g) {
  std::vector<ParamView> views;
  for (std::size_t li = 0; li < m.layers.size(); ++li) {
    Layer& l = m.layers[li];
    const LayerGrads& lg = g.layers[li];
    const std::string p = "layer" + std::to_string(li) + ".";
    if (l.kind == Layer::Kind::Full) {
      views.push_back({p + "W", l.full.W.v.data(), lg.W.v.data(), l.full.W.size()});
    } else {
      views.push_back({p + "A", l.fact.A.data(), lg.A.data(),
                       static_cast<std::size_t>(l.fact.A.size())});
      views.push_back({p + "B", l.fact.B.data(), lg.B.data(),
                       static_cast<std::size_t>(l.fact.B.size())});
      views.push_back({p + "C", l.fact.C.data(), lg.C.data(),
                       static_cast<std::size_t>(l.fact.C.size())});
    }
    views.push_back({p + "b", l.bias().data(), lg.b.data(),
                     static_cast<std::size_t>(l.bias().size())});
    views.push_back({p + "q1", l.q1.data(), lg.q1.data(),
                     static_cast<std::size_t>(l.q1.size())});
  }
  views.push_back({"decoder.W", m.Wd.data(), g.Wd.data(),
                   static_cast<std::size_t>(m.Wd.size())});
  views.push_back({"decoder.b", m.bd.data(), g.bd.data(),
                   static_cast<std::size_t>(m.bd.size())});
  if (g.enc_basis.size())
    views.push_back({"encoder.basis", m.enc.proj.basis.data(), g.enc_basis.data(),
                     static_cast<std::size_t>(m.enc.proj.basis.size())});
  return views;
}

template <typename SeqT>
GradCheckReport grad_check_impl(const PsrnnModel& m0, const SeqT& seq, long t0, long t1,
                                double h, const std::function<void(GradientSet&)>& hook) {
  TrainConfig cfg;
  cfg.train_q1 = true;
  cfg.train_encoder = true;

  FilterStats st;
  std::vector<VectorXd> q_in(m0.layers.size());
  for (std::size_t li = 0; li < m0.layers.size(); ++li)
    q_in[li] = normalize_state(m0.layers[li].q1, NormMode::Train, &st);

  WindowGrad wg = bptt_window(m0, seq, t0, t1, q_in, /*first_window=*/true, cfg);
  if (hook) hook(wg.g);

  PsrnnModel m = m0;
  std::vector<ParamView> views = param_views(m, wg.g);

  GradCheckReport rep;
  for (const ParamView& view : views) {
    double worst = 0.0;
    for (std::size_t i = 0; i < view.count; ++i) {
      const double orig = view.p[i];
      view.p[i] = orig + h;
      const double lp = window_loss(m, seq, t0, t1);
      view.p[i] = orig - h;
      const double lm = window_loss(m, seq, t0, t1);
      view.p[i] = orig;
      const double gn = (lp - lm) / (2.0 * h);
      const double ga = view.g[i];
      const double rel = std::abs(ga - gn) / std::max({1.0, std::abs(ga), std::abs(gn)});
      worst = std::max(worst, rel);
    }
    rep.entries.push_back({view.name, worst});
    rep.max_rel_err = std::max(rep.max_rel_err, worst);
  }
  return rep;
}

}  // namespace

GradCheckReport grad_check(const PsrnnModel& m, const std::vector<int>& seq, long t0,
                           long t1, double h, const std::function<void(GradientSet&)>& hook) {
  return grad_check_impl(m, seq, t0, t1, h, hook);
}

GradCheckReport grad_check(const PsrnnModel& m, const MatrixXd& seq, long t0, long t1,
                           double h, const std::function<void(GradientSet&)>& hook) {
  return grad_check_impl(m, seq, t0, t1, h, hook);
}

}  // namespace psrnn
