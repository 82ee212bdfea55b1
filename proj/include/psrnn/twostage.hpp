#pragma once

#include <string>
#include <vector>

#include "psrnn/model.hpp"
#include "psrnn/regress.hpp"

namespace psrnn {

struct TwoStageOptions {
  WindowSpec window{1, 1};
  double augment_c = 1.0;        // constant coordinate appended to future features
  double eps_bias = 0.1;         // bias anchor: b = eps_bias * q1
  double ridge_scale = 1e-2;     // lambda = ridge_scale * sample count
  bool pure_pinv = false;        // bare pseudoinverse instead of the ridge quotient
  double decoder_smoothing = 0.02;  // label smoothing for the log-indicator decoder
  int rff_count = 2000;          // RFF dimension for continuous / stacked-layer encoders
  int proj_dim = 20;             // projection dimension for those encoders
  std::uint64_t seed = 0;        // encoder sampling seed
};

struct StageReport {
  std::string name;
  long count = 0;
  double lambda = 0.0;
  double residual = 0.0;
};

struct InitReport {
  std::vector<StageReport> stages;
  std::vector<std::string> warnings;
};

// Unit-norm mean of the accumulated future features.
VectorXd estimate_q1(const MomentAccumulator& acc);

// Quotient estimators: numerator tensor times the (ridge-)pseudoinverted
// denominator on the history mode.  `residual` receives the relative
// Frobenius error of reproducing the numerator from the estimate.
Tensor3 estimate_W(const MomentAccumulator& acc, double lambda,
                   double* residual = nullptr, Warnings* warn = nullptr);
Tensor3 estimate_Z(const MomentAccumulator& acc, double lambda,
                   double* residual = nullptr, Warnings* warn = nullptr);

struct DecoderFit {
  MatrixXd Wd;
  VectorXd bd;
  double residual = 0.0;
};

// Ridge decoder from states to log-smoothed next-symbol indicators
// (discrete) or to the next raw observation (continuous).  Row i of
// `states` must align with target i; lambda = ridge_scale * rows.
DecoderFit fit_decoder(const MatrixXd& states, const std::vector<int>& targets,
                       int alphabet, double ridge_scale, double smoothing);
DecoderFit fit_decoder(const MatrixXd& states, const MatrixXd& targets,
                       double ridge_scale);

// Two-stage-regression initialization of an n_layers model.  Layer 1 is
// fitted from observation feature triples; each further layer is fitted
// from RFF-projected features of the layer below's filtered states.  The
// decoder is fitted on the top layer's states.
PsrnnModel init_2sr(const std::vector<std::vector<int>>& train, int alphabet,
                    int n_layers, const TwoStageOptions& opt,
                    InitReport* rep = nullptr);
PsrnnModel init_2sr(const std::vector<MatrixXd>& train, int n_layers,
                    const TwoStageOptions& opt, InitReport* rep = nullptr);

// Scale-matched random baseline with the same architecture as the discrete
// two-stage model: Xavier cell tensors and decoder, zero biases, random
// unit initial state, no decoder fit.
PsrnnModel init_random(int alphabet, int n_layers, int state_dim, std::uint64_t seed);

// Consistency-path model: unaugmented W and Z with the explicit learned
// normalizer, filtered by cell_update_full_norm.  Its one-step predictions
// converge to the exact filter as the sample grows.
struct FullNormModel {
  Tensor3 W;    // d_f x d_o x d_h
  Tensor3 Z;    // d_o x d_o x d_h
  VectorXd q1;  // raw mean future feature (sum-normalized at filter start)
};

FullNormModel init_full_norm(const std::vector<std::vector<int>>& train, int alphabet,
                             double ridge_scale, bool pure_pinv = false,
                             InitReport* rep = nullptr);

// Row t is the model's prediction of o_t given o_{0..t-1} (clipped to the
// simplex); compare rows 1.. against exact forward-filter rows 0.. .
MatrixXd full_norm_predictions(const FullNormModel& m, const std::vector<int>& obs,
                               double eps_inv = 1e-8);

// Mean total-variation distance between aligned prediction rows.
double mean_tv(const MatrixXd& model_preds, const MatrixXd& exact_preds);

}  // namespace psrnn
