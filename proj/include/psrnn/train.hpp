#pragma once

#include <functional>
#include <string>
#include <vector>

#include "psrnn/model.hpp"

namespace psrnn {

struct TrainConfig {
  double learning_rate = 1.0;
  long bptt_horizon = 35;    // window length in steps; 0 = whole sequence
  int epochs = 5;
  int batch_windows = 1;     // windows averaged per update; 0 = one update per epoch
  double grad_clip = 5.0;    // global-norm threshold; 0 disables clipping
  bool train_q1 = true;      // learn the initial state (through its normalization)
  bool train_encoder = true; // continuous models: learn the projection basis
};

struct LayerGrads {
  Tensor3 W;
  MatrixXd A, B, C;
  VectorXd b, q1;
};

struct GradientSet {
  std::vector<LayerGrads> layers;
  MatrixXd Wd;
  VectorXd bd;
  MatrixXd enc_basis;

  static GradientSet zeros_like(const PsrnnModel& m);
  void add(const GradientSet& o);
  void scale(double a);
  double squared_norm() const;
  bool all_finite() const;
};

// Mean bits per step of the true next symbols under softmax(logits).
double loss_bpc(const MatrixXd& logits, const std::vector<int>& targets);
// Fraction of steps whose argmax prediction matches the target.
double metric_ospa(const MatrixXd& logits, const std::vector<int>& targets);
// Mean squared prediction error per step (two-norm squared, averaged over rows).
double loss_mse(const MatrixXd& preds, const MatrixXd& targets);

struct EvalResult {
  double bpc = 0.0, ospa = 0.0, mse = 0.0;
  long steps = 0;
};

// One-step-ahead evaluation; hard-fails on normalization underflow.
EvalResult evaluate(const PsrnnModel& m, const std::vector<std::vector<int>>& data);
EvalResult evaluate(const PsrnnModel& m, const std::vector<MatrixXd>& data);

struct WindowGrad {
  GradientSet g;
  double loss = 0.0;
  std::vector<VectorXd> q_out;  // per-layer states leaving the window
  FilterStats stats;
};

// Gradients of the mean window loss over steps t0..t1-1 (each predicting
// t+1), entered with per-layer states q_in.  When first_window is set, the
// gradient of the initial state flows to q1 through its normalization;
// otherwise the incoming state is treated as a constant (truncation).
WindowGrad bptt_window(const PsrnnModel& m, const std::vector<int>& seq, long t0,
                       long t1, const std::vector<VectorXd>& q_in, bool first_window,
                       const TrainConfig& cfg);
WindowGrad bptt_window(const PsrnnModel& m, const MatrixXd& seq, long t0, long t1,
                       const std::vector<VectorXd>& q_in, bool first_window,
                       const TrainConfig& cfg);

// Forward-only mean window loss under the same conventions.
double window_loss(const PsrnnModel& m, const std::vector<int>& seq, long t0, long t1);
double window_loss(const PsrnnModel& m, const MatrixXd& seq, long t0, long t1);

struct CurveRow {
  int epoch;
  std::string split;   // "train" | "test"
  std::string metric;  // "bpc" | "ospa" | "mse"
  double value;
};

struct TrainStats {
  long underflows = 0;
  long clip_events = 0;
};

// Truncated-BPTT SGD refinement.  Epoch 0 rows in the returned curves hold
// the pre-training metrics; one set of rows follows per epoch.  Windows
// tile each sequence; the state is carried across window boundaries as a
// constant, and parameters update every batch_windows windows with the
// batch-averaged gradient.  Curve evaluations during training use the
// guarded normalization path so refinement can continue through transient
// underflows (counted in stats).
std::vector<CurveRow> sgd_refine(PsrnnModel& m, const std::vector<std::vector<int>>& train,
                                 const std::vector<std::vector<int>>& test,
                                 const TrainConfig& cfg, TrainStats* stats = nullptr);
std::vector<CurveRow> sgd_refine(PsrnnModel& m, const std::vector<MatrixXd>& train,
                                 const std::vector<MatrixXd>& test, const TrainConfig& cfg,
                                 TrainStats* stats = nullptr);

struct GradCheckEntry {
  std::string param;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;  // one per parameter tensor
  double max_rel_err = 0.0;
  bool ok(double thr = 1e-5) const { return max_rel_err <= thr; }
};

// Central-difference verification of every parameter gradient on one
// window.  Relative error uses max(1, |analytic|, |numeric|) as the scale.
// The hook, when given, mutates the analytic gradients before comparison
// (harness self-test support).
GradCheckReport grad_check(const PsrnnModel& m, const std::vector<int>& seq, long t0,
                           long t1, double h = 1e-5,
                           const std::function<void(GradientSet&)>& hook = {});
GradCheckReport grad_check(const PsrnnModel& m, const MatrixXd& seq, long t0, long t1,
                           double h = 1e-5,
                           const std::function<void(GradientSet&)>& hook = {});

}  // namespace psrnn
