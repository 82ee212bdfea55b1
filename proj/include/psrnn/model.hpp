#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <vector>

#include "psrnn/features.hpp"
#include "psrnn/tensor.hpp"

namespace psrnn {

// Bilinear recurrent cell: q' = normalize(W x2 o x3 q + b).
struct PsrnnCell {
  Tensor3 W;   // d_out x d_obs x d_state (d_out == d_state in a model)
  VectorXd b;  // d_out
};

// Rank-factorized cell: q' = normalize(A^T ((B o) .* (C q)) + b).
// Factor matrices follow the CpFactors layout (component per row).
struct FactorizedCell {
  MatrixXd A;  // rank x d_out
  MatrixXd B;  // rank x d_obs
  MatrixXd C;  // rank x d_state
  VectorXd b;  // d_out
};

struct Layer {
  enum class Kind { Full, Factorized };
  Kind kind = Kind::Full;
  PsrnnCell full;
  FactorizedCell fact;
  VectorXd q1;  // initial state, unit two-norm

  int state_dim() const {
    return kind == Kind::Full ? full.W.d1 : static_cast<int>(fact.A.cols());
  }
  int obs_dim() const {
    return kind == Kind::Full ? full.W.d2 : static_cast<int>(fact.B.cols());
  }
  const VectorXd& bias() const { return kind == Kind::Full ? full.b : fact.b; }
  VectorXd& bias() { return kind == Kind::Full ? full.b : fact.b; }
};

// Maps raw observations into the filtering space: identity one-hots for
// discrete alphabets, RFF + projection for continuous trajectories.
struct Encoder {
  enum class Kind { OneHot, RffProj };
  Kind kind = Kind::OneHot;
  int alphabet = 0;  // OneHot only
  RffMap rff;        // RffProj only
  Projection proj;   // RffProj only

  int out_dim() const {
    return kind == Kind::OneHot ? alphabet : proj.out_dim();
  }
  VectorXd encode(int sym) const;
  VectorXd encode(const VectorXd& raw) const;
};

struct ModelMeta {
  std::string kind = "discrete";  // "discrete" | "continuous"
  int alphabet = 0;               // discrete symbol count
  int obs_dim = 0;                // continuous feature count
  std::uint64_t config_hash = 0;
  std::vector<VectorXd> original_bias;  // full-cell biases kept across factorization
};

struct PsrnnModel {
  Encoder enc;
  std::vector<Layer> layers;
  MatrixXd Wd;  // decoder: outputs x top state dim
  VectorXd bd;
  ModelMeta meta;

  int n_layers() const { return static_cast<int>(layers.size()); }
  int top_dim() const { return layers.back().state_dim(); }
};

struct FilterStats {
  long underflows = 0;
  double min_prenorm = std::numeric_limits<double>::infinity();
  double max_norm_dev = 0.0;  // max |  ||q|| - 1  | over emitted states
  void absorb(const FilterStats& o) {
    underflows += o.underflows;
    min_prenorm = std::min(min_prenorm, o.min_prenorm);
    max_norm_dev = std::max(max_norm_dev, o.max_norm_dev);
  }
};

// Train mode substitutes the 1e-12 norm floor and counts the event;
// Eval mode raises NormalizationUnderflow instead.
enum class NormMode { Train, Eval };

// Pre-normalization cell output u; the multiplicative-interaction identity
// (full vs factorized) is stated on this quantity.
VectorXd cell_prenorm(const Layer& l, const VectorXd& q, const VectorXd& o);

VectorXd cell_update(const Layer& l, const VectorXd& q, const VectorXd& o,
                     NormMode mode, FilterStats* stats = nullptr);

// Two-norm normalization with explicit floor handling; shared by the cell
// update and the backward pass.
VectorXd normalize_state(const VectorXd& u, NormMode mode, FilterStats* stats,
                         double* norm_out = nullptr);

// Sum-normalized update with an explicit learned normalizer Z:
// q' = (W x3 q) (Z x3 q + eps I)^{-1} o, renormalized to sum 1.  This is the
// consistency-path update whose predictions converge to the true filter.
VectorXd cell_update_full_norm(const Tensor3& W, const Tensor3& Z, const VectorXd& q,
                               const VectorXd& o, double eps_inv = 1e-8);

struct FilterResult {
  std::vector<MatrixXd> states;  // per layer: T x state_dim, post-update
  MatrixXd preds;                // T x out, decoder output per step (logits when discrete)
  FilterStats stats;
};

FilterResult filter(const PsrnnModel& m, const std::vector<int>& obs,
                    NormMode mode = NormMode::Eval, bool want_preds = true);
FilterResult filter(const PsrnnModel& m, const MatrixXd& obs,
                    NormMode mode = NormMode::Eval, bool want_preds = true);

// Replace every full cell with a rank-`rank` factorized cell fitted by
// cp_als (balanced by default).  When eps_bias is set, each layer's bias is
// re-anchored to eps_bias times its mean filtered state over `train`
// (original biases are preserved in meta.original_bias); when unset the
// original biases are kept.  The decoder is untouched.
PsrnnModel factorize_model(const PsrnnModel& m, const std::vector<std::vector<int>>& train,
                           int rank, std::optional<double> eps_bias, std::uint64_t seed,
                           bool balance = true, int max_iters = 300, double tol = 1e-10);
PsrnnModel factorize_model(const PsrnnModel& m, const std::vector<MatrixXd>& train,
                           int rank, std::optional<double> eps_bias, std::uint64_t seed,
                           bool balance = true, int max_iters = 300, double tol = 1e-10);

}  // namespace psrnn
