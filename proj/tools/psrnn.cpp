#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "psrnn/config.hpp"
#include "psrnn/data.hpp"
#include "psrnn/model_io.hpp"
#include "psrnn/oracle.hpp"
#include "psrnn/train.hpp"
#include "psrnn/twostage.hpp"

using namespace psrnn;
using nlohmann::json;

namespace {

// One exit code per failure class so scripts can react without parsing text.
int exit_code_for(const Error& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const IoError*>(&e)) return 3;
  if (dynamic_cast<const DimensionMismatch*>(&e)) return 4;
  if (dynamic_cast<const EmptyData*>(&e)) return 5;
  if (dynamic_cast<const EmptyCorpus*>(&e)) return 5;
  if (dynamic_cast<const NumericalFailure*>(&e)) return 6;
  if (dynamic_cast<const SingularUpdate*>(&e)) return 6;
  if (dynamic_cast<const SingularNormalizer*>(&e)) return 6;
  if (dynamic_cast<const NormalizationUnderflow*>(&e)) return 7;
  if (dynamic_cast<const DegenerateSample*>(&e)) return 8;
  if (dynamic_cast<const SequenceTooShort*>(&e)) return 9;
  if (dynamic_cast<const ZeroProbabilityObservation*>(&e)) return 10;
  if (dynamic_cast<const RaggedRows*>(&e)) return 11;
  if (dynamic_cast<const NonNumeric*>(&e)) return 11;
  if (dynamic_cast<const NonFiniteGradient*>(&e)) return 12;
  return 13;
}

Dataset load_data(const std::vector<std::string>& paths, const std::string& kind,
                  double split_fraction) {
  if (paths.empty()) throw ConfigError("no --data given");
  auto is_csv = [](const std::string& p) {
    return p.size() >= 4 && p.compare(p.size() - 4, 4, ".csv") == 0;
  };
  bool csv;
  if (kind == "auto") {
    csv = is_csv(paths.front());
    for (const auto& p : paths)
      if (is_csv(p) != csv)
        throw ConfigError("--data mixes .csv and non-.csv paths; pass --data-kind");
  } else if (kind == "chars") {
    csv = false;
  } else {
    csv = true;
  }
  if (csv) return load_trajectories(paths, split_fraction);
  if (paths.size() != 1) throw ConfigError("byte corpora take exactly one --data path");
  return load_chars(paths.front(), split_fraction);
}

std::string data_kind(const Dataset& d) {
  return d.kind == Dataset::Kind::Discrete ? "discrete" : "continuous";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path);
}

void write_config_sidecar(const std::string& model_path, const RunConfig& c) {
  write_text(model_path + ".config.json", config_to_json(c) + "\n");
}

json eval_json(const EvalResult& r, const std::string& kind, const std::string& split) {
  json j;
  j["kind"] = kind;
  j["split"] = split;
  j["steps"] = r.steps;
  if (kind == "discrete") {
    j["bpc"] = r.bpc;
    j["ospa"] = r.ospa;
  } else {
    j["mse"] = r.mse;
  }
  return j;
}

void print_metrics(const EvalResult& r, const std::string& kind, const std::string& label) {
  if (kind == "discrete")
    std::printf("%-12s bpc %.6f  ospa %.6f  (%ld steps)\n", label.c_str(), r.bpc, r.ospa,
                r.steps);
  else
    std::printf("%-12s mse %.6f  (%ld steps)\n", label.c_str(), r.mse, r.steps);
}

json matrix_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw IoError("hmm spec: matrix must be a non-empty array");
  auto rows = static_cast<Eigen::Index>(j.size());
  auto cols = static_cast<Eigen::Index>(j.at(0).size());
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw IoError("hmm spec: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c)
      m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

HmmSpec hmm_from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    j = json::parse(in);
    HmmSpec h;
    h.S = matrix_from_json(j.at("S"));
    h.O = matrix_from_json(j.at("O"));
    auto pi = j.at("pi");
    h.pi = VectorXd(static_cast<Eigen::Index>(pi.size()));
    for (Eigen::Index i = 0; i < h.pi.size(); ++i)
      h.pi[i] = pi.at(static_cast<std::size_t>(i)).get<double>();
    h.validate();
    return h;
  } catch (const json::exception& e) {
    throw IoError("hmm spec " + path + ": " + e.what());
  }
}

// Spec-based evaluation assumes corpus bytes are the symbol ids themselves,
// which holds for synth-hmm output as long as every symbol occurs in the
// training split.
void check_id_alignment(const Dataset& d, const HmmSpec& h) {
  if (d.alphabet - 1 != h.n_symbols())
    throw ConfigError("corpus alphabet does not match the hmm spec symbol count");
  for (int i = 0; i + 1 < d.alphabet; ++i)
    if (d.id_to_byte[static_cast<std::size_t>(i)] != static_cast<unsigned char>(i))
      throw ConfigError("corpus bytes are not raw symbol ids; spec-based scoring is undefined");
}

struct CommonOpts {
  std::vector<std::string> data;
  std::string data_kind = "auto";
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int layers = 0;
  bool layers_set = false;
  bool dump_config = false;
};

void add_common(CLI::App* sub, CommonOpts& o, bool with_data = true) {
  if (with_data)
    sub->add_option("--data", o.data, "input corpus (byte file) or trajectory .csv files");
  sub->add_option("--data-kind", o.data_kind, "force input interpretation")
      ->check(CLI::IsMember({"auto", "chars", "csv"}));
  sub->add_option("--config", o.config_path, "JSON run configuration");
  sub->add_flag("--dump-config", o.dump_config,
                "print the resolved effective configuration and exit");
  auto* s = sub->add_option("--seed", o.seed, "override the configured seed");
  s->each([&o](const std::string&) { o.seed_set = true; });
  auto* l = sub->add_option("--layers", o.layers, "override the configured layer count");
  l->each([&o](const std::string&) { o.layers_set = true; });
}

RunConfig make_config(const CommonOpts& o, const std::string& kind) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : config_from_file(o.config_path);
  if (o.seed_set) c.seed = o.seed;
  if (o.layers_set) c.layers = o.layers;
  c.resolve(kind);
  return c;
}

// Returns true when --dump-config consumed the invocation.
bool maybe_dump(const CommonOpts& o, const RunConfig& c) {
  if (!o.dump_config) return false;
  std::cout << config_to_json(c) << "\n";
  return true;
}

int cmd_init(const CommonOpts& o, const std::string& out, bool random_init,
             const std::string& report_path) {
  Dataset d = load_data(o.data, o.data_kind, o.config_path.empty()
                                                 ? RunConfig{}.split_fraction
                                                 : config_from_file(o.config_path).split_fraction);
  RunConfig c = make_config(o, data_kind(d));
  if (maybe_dump(o, c)) return 0;

  PsrnnModel m;
  InitReport rep;
  if (random_init) {
    if (d.kind != Dataset::Kind::Discrete)
      throw ConfigError("--random-init is only defined for discrete corpora");
    m = init_random(d.alphabet, c.layers, c.states, c.seed);
  } else if (d.kind == Dataset::Kind::Discrete) {
    m = init_2sr(d.train_d, d.alphabet, c.layers, two_stage_options(c), &rep);
  } else {
    m = init_2sr(d.train_c, c.layers, two_stage_options(c), &rep);
  }
  m.meta.config_hash = config_hash(c);

  save_model(m, out);
  write_config_sidecar(out, c);

  std::printf("initialized %d-layer model: obs dim %d, state dim %d, decoder %ldx%ld\n",
              m.n_layers(), m.layers.front().obs_dim(), m.top_dim(),
              static_cast<long>(m.Wd.rows()), static_cast<long>(m.Wd.cols()));
  for (const auto& s : rep.stages)
    std::printf("  stage %-10s n=%-8ld lambda=%-12.6g residual=%.6f\n", s.name.c_str(),
                s.count, s.lambda, s.residual);
  for (const auto& w : rep.warnings) std::printf("  warning: %s\n", w.c_str());

  std::string kind = data_kind(d);
  if (d.kind == Dataset::Kind::Discrete) {
    print_metrics(evaluate(m, d.train_d), kind, "train");
    print_metrics(evaluate(m, d.test_d), kind, "test");
  } else {
    print_metrics(evaluate(m, d.train_c), kind, "train");
    print_metrics(evaluate(m, d.test_c), kind, "test");
  }

  if (!report_path.empty()) {
    json j;
    j["stages"] = json::array();
    for (const auto& s : rep.stages)
      j["stages"].push_back(
          {{"name", s.name}, {"count", s.count}, {"lambda", s.lambda}, {"residual", s.residual}});
    j["warnings"] = rep.warnings;
    write_text(report_path, j.dump(2) + "\n");
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_train(const CommonOpts& o, const std::string& model_path, const std::string& out,
              const std::string& curves_path) {
  PsrnnModel m = load_model(model_path);
  Dataset d = load_data(o.data, o.data_kind, o.config_path.empty()
                                                 ? RunConfig{}.split_fraction
                                                 : config_from_file(o.config_path).split_fraction);
  RunConfig c = make_config(o, data_kind(d));
  if (maybe_dump(o, c)) return 0;
  if (data_kind(d) != m.meta.kind)
    throw ConfigError("model kind '" + m.meta.kind + "' does not match the data");

  TrainStats stats;
  std::vector<CurveRow> curves;
  if (d.kind == Dataset::Kind::Discrete)
    curves = sgd_refine(m, d.train_d, d.test_d, train_config(c), &stats);
  else
    curves = sgd_refine(m, d.train_c, d.test_c, train_config(c), &stats);
  m.meta.config_hash = config_hash(c);

  save_model(m, out);
  write_config_sidecar(out, c);

  if (!curves_path.empty()) {
    std::string csv = "epoch,split,metric,value\n";
    char buf[128];
    for (const auto& r : curves) {
      std::snprintf(buf, sizeof(buf), "%d,%s,%s,%.12g\n", r.epoch, r.split.c_str(),
                    r.metric.c_str(), r.value);
      csv += buf;
    }
    write_text(curves_path, csv);
  }

  std::string kind = data_kind(d);
  for (const auto& r : curves)
    if (r.epoch == 0 && (r.metric == (kind == "discrete" ? "bpc" : "mse")))
      std::printf("epoch 0      %s %s %.6f\n", r.split.c_str(), r.metric.c_str(), r.value);
  if (d.kind == Dataset::Kind::Discrete) {
    print_metrics(evaluate(m, d.train_d), kind, "final train");
    print_metrics(evaluate(m, d.test_d), kind, "final test");
  } else {
    print_metrics(evaluate(m, d.train_c), kind, "final train");
    print_metrics(evaluate(m, d.test_c), kind, "final test");
  }
  if (stats.underflows > 0)
    std::printf("note: %ld normalization underflow(s) during refinement\n", stats.underflows);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_factorize(const CommonOpts& o, const std::string& model_path, const std::string& out,
                  int rank, bool keep_bias, bool refit_decoder) {
  PsrnnModel m = load_model(model_path);
  std::string kind = m.meta.kind;
  RunConfig c = make_config(o, kind);
  if (maybe_dump(o, c)) return 0;
  if (rank < 1) throw ConfigError("--rank must be >= 1");
  if ((!keep_bias || refit_decoder) && o.data.empty())
    throw ConfigError("factorize needs --data unless --keep-bias is set without --refit-decoder");

  Dataset d;
  if (!o.data.empty()) {
    d = load_data(o.data, o.data_kind, c.split_fraction);
    if (data_kind(d) != kind)
      throw ConfigError("model kind '" + kind + "' does not match the data");
  }
  std::optional<double> eps_bias;
  if (!keep_bias) eps_bias = c.eps_bias;

  PsrnnModel f;
  if (kind == "discrete")
    f = factorize_model(m, d.train_d, rank, eps_bias, c.seed);
  else
    f = factorize_model(m, d.train_c, rank, eps_bias, c.seed);

  if (refit_decoder) {
    if (kind == "discrete") {
      long rows = 0;
      for (const auto& s : d.train_d) rows += std::max<long>(0, (long)s.size() - 1);
      if (rows == 0) throw EmptyData("factorize: no decoder targets in the training split");
      MatrixXd X(rows, f.top_dim());
      std::vector<int> y;
      y.reserve(static_cast<std::size_t>(rows));
      long at = 0;
      for (const auto& s : d.train_d) {
        if (s.size() < 2) continue;
        FilterResult fr = filter(f, s, NormMode::Train, false);
        long T = static_cast<long>(s.size());
        X.middleRows(at, T - 1) = fr.states.back().topRows(T - 1);
        for (long t = 1; t < T; ++t) y.push_back(s[static_cast<std::size_t>(t)]);
        at += T - 1;
      }
      DecoderFit fit = fit_decoder(X, y, d.alphabet, c.ridge_scale, c.decoder_smoothing);
      f.Wd = fit.Wd;
      f.bd = fit.bd;
    } else {
      long rows = 0;
      for (const auto& s : d.train_c) rows += std::max<long>(0, (long)s.rows() - 1);
      if (rows == 0) throw EmptyData("factorize: no decoder targets in the training split");
      MatrixXd X(rows, f.top_dim()), Y(rows, d.feat_dim);
      long at = 0;
      for (const auto& s : d.train_c) {
        if (s.rows() < 2) continue;
        FilterResult fr = filter(f, s, NormMode::Train, false);
        long T = s.rows();
        X.middleRows(at, T - 1) = fr.states.back().topRows(T - 1);
        Y.middleRows(at, T - 1) = s.bottomRows(T - 1);
        at += T - 1;
      }
      DecoderFit fit = fit_decoder(X, Y, c.ridge_scale);
      f.Wd = fit.Wd;
      f.bd = fit.bd;
    }
  }

  f.meta.config_hash = config_hash(c);
  save_model(f, out);
  write_config_sidecar(out, c);

  std::printf("factorized %d layer(s) at rank %d%s%s\n", f.n_layers(), rank,
              keep_bias ? ", biases kept" : ", biases re-anchored",
              refit_decoder ? ", decoder refitted" : "");
  if (!o.data.empty()) {
    if (kind == "discrete") {
      print_metrics(evaluate(f, d.train_d), kind, "train");
      print_metrics(evaluate(f, d.test_d), kind, "test");
    } else {
      print_metrics(evaluate(f, d.train_c), kind, "train");
      print_metrics(evaluate(f, d.test_c), kind, "test");
    }
  }
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& model_path, const std::string& out,
             const std::string& split, const std::string& hmm_path) {
  PsrnnModel m = load_model(model_path);
  Dataset d = load_data(o.data, o.data_kind, o.config_path.empty()
                                                 ? RunConfig{}.split_fraction
                                                 : config_from_file(o.config_path).split_fraction);
  RunConfig c = make_config(o, data_kind(d));
  if (maybe_dump(o, c)) return 0;
  std::string kind = data_kind(d);
  if (kind != m.meta.kind)
    throw ConfigError("model kind '" + m.meta.kind + "' does not match the data");

  EvalResult r;
  if (d.kind == Dataset::Kind::Discrete)
    r = evaluate(m, split == "train" ? d.train_d : d.test_d);
  else
    r = evaluate(m, split == "train" ? d.train_c : d.test_c);
  print_metrics(r, kind, split);

  json j = eval_json(r, kind, split);
  if (!hmm_path.empty()) {
    if (d.kind != Dataset::Kind::Discrete)
      throw ConfigError("--hmm-spec applies to discrete corpora only");
    HmmSpec h = hmm_from_file(hmm_path);
    check_id_alignment(d, h);
    const auto& seqs = split == "train" ? d.train_d : d.test_d;
    double nll = 0.0, hits = 0.0;
    long steps = 0, trans = 0;
    for (const auto& s : seqs) {
      ForwardResult fr = forward_filter(h, s);
      long T = static_cast<long>(s.size());
      nll -= fr.logp2.sum();
      hits += fr.ospa * static_cast<double>(T - 1);
      steps += T;
      trans += T - 1;
    }
    double exact_bpc = steps > 0 ? nll / static_cast<double>(steps) : 0.0;
    double exact_ospa = trans > 0 ? hits / static_cast<double>(trans) : 0.0;
    j["exact_bpc"] = exact_bpc;
    j["exact_ospa"] = exact_ospa;
    j["bpc_gap"] = r.bpc - exact_bpc;
    j["ospa_gap_points"] = (exact_ospa - r.ospa) * 100.0;
    std::printf("%-12s bpc %.6f  ospa %.6f  (exact filter)\n", split.c_str(), exact_bpc,
                exact_ospa);
    std::printf("gap          bpc %+.6f  ospa %+.3f points\n", j["bpc_gap"].get<double>(),
                j["ospa_gap_points"].get<double>());
  }
  if (!out.empty()) write_text(out, j.dump(2) + "\n");
  return 0;
}

int cmd_synth(const std::string& out_prefix, const std::string& kind, int n_states,
              int n_symbols, long n_train, long n_test, double mix, double emix,
              std::uint64_t seed) {
  HmmSpec h;
  Rng rng(seed);
  if (kind == "cycle")
    h = cycle_hmm(n_states, n_symbols, mix, emix);
  else
    h = random_hmm(n_states, n_symbols, rng);
  std::vector<int> obs = sample_hmm(h, n_train + n_test, rng);

  std::string corpus(obs.size(), '\0');
  for (std::size_t i = 0; i < obs.size(); ++i)
    corpus[i] = static_cast<char>(static_cast<unsigned char>(obs[i]));
  write_text(out_prefix + ".corpus", corpus);

  json j;
  j["kind"] = kind;
  j["n_states"] = n_states;
  j["n_symbols"] = n_symbols;
  j["seed"] = seed;
  j["train"] = n_train;
  j["test"] = n_test;
  j["S"] = matrix_json(h.S);
  j["O"] = matrix_json(h.O);
  json pi = json::array();
  for (Eigen::Index i = 0; i < h.pi.size(); ++i) pi.push_back(h.pi[i]);
  j["pi"] = pi;
  write_text(out_prefix + ".hmm.json", j.dump(2) + "\n");

  double frac = static_cast<double>(n_train) / static_cast<double>(n_train + n_test);
  std::printf("wrote %s.corpus (%ld symbols) and %s.hmm.json\n", out_prefix.c_str(),
              n_train + n_test, out_prefix.c_str());
  std::printf("load with split_fraction %.6f to recover the train/test cut\n", frac);
  return 0;
}

int cmd_gradcheck(const CommonOpts& o, const std::string& model_path, long t0, long t1,
                  double h) {
  Dataset d = load_data(o.data, o.data_kind, o.config_path.empty()
                                                 ? RunConfig{}.split_fraction
                                                 : config_from_file(o.config_path).split_fraction);
  RunConfig c = make_config(o, data_kind(d));
  if (maybe_dump(o, c)) return 0;

  PsrnnModel m;
  if (!model_path.empty()) {
    m = load_model(model_path);
    if (m.meta.kind != data_kind(d))
      throw ConfigError("model kind '" + m.meta.kind + "' does not match the data");
  } else if (d.kind == Dataset::Kind::Discrete) {
    m = init_2sr(d.train_d, d.alphabet, c.layers, two_stage_options(c));
  } else {
    m = init_2sr(d.train_c, c.layers, two_stage_options(c));
  }

  GradCheckReport rep;
  if (d.kind == Dataset::Kind::Discrete) {
    const auto& s = d.train_d.front();
    long T = static_cast<long>(s.size());
    if (t1 <= 0) t1 = std::min<long>(20, T - 1);
    rep = grad_check(m, s, t0, t1, h);
  } else {
    const auto& s = d.train_c.front();
    long T = s.rows();
    if (t1 <= 0) t1 = std::min<long>(20, T - 1);
    rep = grad_check(m, s, t0, t1, h);
  }
  for (const auto& e : rep.entries)
    std::printf("  %-16s rel err %.3e\n", e.param.c_str(), e.rel_err);
  std::printf("worst relative error %.3e (%s)\n", rep.max_rel_err,
              rep.ok() ? "PASS" : "FAIL");
  return rep.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"predictive-state recurrent network toolkit"};
  app.require_subcommand(1);

  CommonOpts oinit, otrain, ofact, oeval, ograd;
  std::string init_out, train_model, train_out, train_curves, fact_model, fact_out;
  std::string eval_model, eval_out, eval_split = "test", eval_hmm, grad_model;
  std::string init_report;
  bool random_init = false, keep_bias = false, refit_decoder = false;
  int fact_rank = 0;
  long grad_t0 = 0, grad_t1 = 0;
  double grad_h = 1e-5;

  std::string synth_prefix, synth_kind = "random";
  int synth_states = 3, synth_symbols = 4;
  long synth_train = 100000, synth_test = 10000;
  double synth_mix = 0.85, synth_emix = 0.8;
  std::uint64_t synth_seed = 0;

  auto* init = app.add_subcommand("init", "fit a model by two-stage regression");
  add_common(init, oinit);
  init->add_option("--out", init_out, "output model path")->required();
  init->add_flag("--random-init", random_init, "scale-matched random baseline instead");
  init->add_option("--report", init_report, "write the stage report JSON here");

  auto* train = app.add_subcommand("train", "refine a model by truncated BPTT");
  add_common(train, otrain);
  train->add_option("--model", train_model, "input model path")->required();
  train->add_option("--out", train_out, "output model path")->required();
  train->add_option("--curves", train_curves, "write per-epoch metric rows as CSV");

  auto* fact = app.add_subcommand("factorize", "replace full cells with rank factors");
  add_common(fact, ofact);
  fact->add_option("--model", fact_model, "input model path")->required();
  fact->add_option("--out", fact_out, "output model path")->required();
  fact->add_option("--rank", fact_rank, "factorization rank")->required();
  fact->add_flag("--keep-bias", keep_bias, "keep original biases instead of re-anchoring");
  fact->add_flag("--refit-decoder", refit_decoder,
                 "refit the decoder on the factorized model's states");

  auto* ev = app.add_subcommand("eval", "score a model on a corpus split");
  add_common(ev, oeval);
  ev->add_option("--model", eval_model, "model path")->required();
  ev->add_option("--out", eval_out, "write metrics JSON here");
  ev->add_option("--split", eval_split, "which split to score")
      ->check(CLI::IsMember({"train", "test"}));
  ev->add_option("--hmm-spec", eval_hmm, "also score the exact filter from this spec");

  auto* synth = app.add_subcommand("synth-hmm", "sample a synthetic hmm corpus");
  synth->add_option("--out", synth_prefix, "output prefix")->required();
  synth->add_option("--kind", synth_kind, "generator family")
      ->check(CLI::IsMember({"random", "cycle"}));
  synth->add_option("--states", synth_states, "hidden state count");
  synth->add_option("--symbols", synth_symbols, "symbol count");
  synth->add_option("--train", synth_train, "training symbols");
  synth->add_option("--test", synth_test, "test symbols");
  synth->add_option("--mix", synth_mix, "cycle: shift mixing weight");
  synth->add_option("--emix", synth_emix, "cycle: identity emission weight");
  synth->add_option("--seed", synth_seed, "sampling seed");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  add_common(grad, ograd);
  grad->add_option("--model", grad_model, "model to check (default: fresh two-stage fit)");
  grad->add_option("--t0", grad_t0, "window start");
  grad->add_option("--t1", grad_t1, "window end (default min(20, T-1))");
  grad->add_option("--step", grad_h, "central-difference step size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*init) return cmd_init(oinit, init_out, random_init, init_report);
    if (*train) return cmd_train(otrain, train_model, train_out, train_curves);
    if (*fact) return cmd_factorize(ofact, fact_model, fact_out, fact_rank, keep_bias,
                                    refit_decoder);
    if (*ev) return cmd_eval(oeval, eval_model, eval_out, eval_split, eval_hmm);
    if (*synth)
      return cmd_synth(synth_prefix, synth_kind, synth_states, synth_symbols, synth_train,
                       synth_test, synth_mix, synth_emix, synth_seed);
    if (*grad) return cmd_gradcheck(ograd, grad_model, grad_t0, grad_t1, grad_h);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
