#pragma once

#include <string>

#include "psrnn/common.hpp"
#include "psrnn/train.hpp"
#include "psrnn/twostage.hpp"

namespace psrnn {

// Run configuration with the documented defaults.  Fields set to their
// sentinel "auto" value (-1 where noted) resolve from the data kind.
struct RunConfig {
  int rff_count = 2000;        // RFF dimension for continuous / stacked encoders
  int states = 20;             // projection dimension for those encoders
  double ridge_scale = 1e-2;   // lambda = ridge_scale * sample count
  int horizon_future = -1;     // future window k; auto: 1 discrete, 10 continuous
  int past_window = -1;        // history window p; auto: equal to k
  int layers = 1;
  int rank = 0;                // factorization rank (0 = keep full cells)
  double learning_rate = 1.0;
  long bptt_horizon = -1;      // auto: 35 discrete, 0 (= full sequence) continuous
  int epochs = 5;
  int batch_windows = 1;
  double grad_clip = 5.0;      // 0 disables clipping
  std::uint64_t seed = 0;
  double augment_c = 1.0;
  double eps_bias = 0.1;
  double decoder_smoothing = 0.02;
  bool train_q1 = true;
  bool train_encoder = true;
  bool pure_pinv = false;
  double split_fraction = 0.75;

  // Resolve the auto fields for a data kind ("discrete"/"continuous").
  void resolve(const std::string& kind);
};

// Parse a JSON object; unknown keys are rejected with ConfigError.
RunConfig config_from_json(const std::string& text);
RunConfig config_from_file(const std::string& path);

// Canonical (sorted-key) JSON dump; hashing this fingerprints the run.
std::string config_to_json(const RunConfig& c);
std::uint64_t config_hash(const RunConfig& c);

TwoStageOptions two_stage_options(const RunConfig& c);
TrainConfig train_config(const RunConfig& c);

}  // namespace psrnn
