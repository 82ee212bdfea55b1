#include "psrnn/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace psrnn {

using nlohmann::json;

void RunConfig::resolve(const std::string& kind) {
  const bool discrete = kind == "discrete";
  if (!discrete && kind != "continuous")
    throw ConfigError("RunConfig::resolve: unknown data kind '" + kind + "'");
  if (horizon_future < 0) horizon_future = discrete ? 1 : 10;
  if (past_window < 0) past_window = horizon_future;
  if (bptt_horizon < 0) bptt_horizon = discrete ? 35 : 0;
}

namespace {

void validate(const RunConfig& c) {
  if (c.rff_count < 1) throw ConfigError("config: rff_count must be >= 1");
  if (c.states < 1) throw ConfigError("config: states must be >= 1");
  if (c.ridge_scale < 0) throw ConfigError("config: ridge_scale must be >= 0");
  if (c.layers < 1) throw ConfigError("config: layers must be >= 1");
  if (c.rank < 0) throw ConfigError("config: rank must be >= 0");
  if (c.learning_rate < 0) throw ConfigError("config: learning_rate must be >= 0");
  if (c.epochs < 0) throw ConfigError("config: epochs must be >= 0");
  if (c.batch_windows < 0) throw ConfigError("config: batch_windows must be >= 0");
  if (c.grad_clip < 0) throw ConfigError("config: grad_clip must be >= 0");
  if (c.augment_c < 0) throw ConfigError("config: augment_c must be >= 0");
  if (c.decoder_smoothing <= 0 || c.decoder_smoothing >= 0.5)
    throw ConfigError("config: decoder_smoothing must be in (0, 0.5)");
  if (c.split_fraction <= 0 || c.split_fraction >= 1)
    throw ConfigError("config: split_fraction must be in (0, 1)");
  if (c.horizon_future == 0 || c.past_window == 0)
    throw ConfigError("config: window lengths must be >= 1 (or -1 for auto)");
}

}  // namespace

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("config: parse error: " + std::string(e.what()));
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  RunConfig c;
  auto take = [&j](const char* key, auto& field) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
      field = it->get<std::decay_t<decltype(field)>>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config: bad value for '") + key + "'");
    }
    j.erase(it);
  };

  take("rff_count", c.rff_count);
  take("states", c.states);
  take("ridge_scale", c.ridge_scale);
  take("horizon_future", c.horizon_future);
  take("past_window", c.past_window);
  take("layers", c.layers);
  take("rank", c.rank);
  take("learning_rate", c.learning_rate);
  take("bptt_horizon", c.bptt_horizon);
  take("epochs", c.epochs);
  take("batch_windows", c.batch_windows);
  take("grad_clip", c.grad_clip);
  take("seed", c.seed);
  take("augment_c", c.augment_c);
  take("eps_bias", c.eps_bias);
  take("decoder_smoothing", c.decoder_smoothing);
  take("train_q1", c.train_q1);
  take("train_encoder", c.train_encoder);
  take("pure_pinv", c.pure_pinv);
  take("split_fraction", c.split_fraction);

  if (!j.empty()) {
    std::string keys;
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!keys.empty()) keys += ", ";
      keys += it.key();
    }
    throw ConfigError("config: unknown key(s): " + keys);
  }
  validate(c);
  return c;
}

RunConfig config_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json(text);
}

std::string config_to_json(const RunConfig& c) {
  json j;  // nlohmann objects keep keys sorted, giving a canonical dump
  j["augment_c"] = c.augment_c;
  j["batch_windows"] = c.batch_windows;
  j["bptt_horizon"] = c.bptt_horizon;
  j["decoder_smoothing"] = c.decoder_smoothing;
  j["epochs"] = c.epochs;
  j["eps_bias"] = c.eps_bias;
  j["grad_clip"] = c.grad_clip;
  j["horizon_future"] = c.horizon_future;
  j["layers"] = c.layers;
  j["learning_rate"] = c.learning_rate;
  j["past_window"] = c.past_window;
  j["pure_pinv"] = c.pure_pinv;
  j["rank"] = c.rank;
  j["rff_count"] = c.rff_count;
  j["ridge_scale"] = c.ridge_scale;
  j["seed"] = c.seed;
  j["split_fraction"] = c.split_fraction;
  j["states"] = c.states;
  j["train_encoder"] = c.train_encoder;
  j["train_q1"] = c.train_q1;
  return j.dump(2);
}

std::uint64_t config_hash(const RunConfig& c) { return fnv1a64(config_to_json(c)); }

TwoStageOptions two_stage_options(const RunConfig& c) {
  TwoStageOptions o;
  o.window.past_len = c.past_window > 0 ? c.past_window : 1;
  o.window.future_len = c.horizon_future > 0 ? c.horizon_future : 1;
  o.augment_c = c.augment_c;
  o.eps_bias = c.eps_bias;
  o.ridge_scale = c.ridge_scale;
  o.pure_pinv = c.pure_pinv;
  o.decoder_smoothing = c.decoder_smoothing;
  o.rff_count = c.rff_count;
  o.proj_dim = c.states;
  o.seed = c.seed;
  return o;
}

TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.learning_rate = c.learning_rate;
  t.bptt_horizon = c.bptt_horizon > 0 ? c.bptt_horizon : 0;
  t.epochs = c.epochs;
  t.batch_windows = c.batch_windows;
  t.grad_clip = c.grad_clip;
  t.train_q1 = c.train_q1;
  t.train_encoder = c.train_encoder;
  return t;
}

}  // namespace psrnn
