#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "psrnn/model_io.hpp"
#include "psrnn/oracle.hpp"
#include "psrnn/twostage.hpp"

using namespace psrnn;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
  fs::path p = fs::temp_directory_path() / "psrnn_cli_tests";
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  const char* bin = std::getenv("PSRNN_BIN");
  REQUIRE(bin != nullptr);
  std::string cmd = std::string(bin) + " " + args + " >/dev/null 2>&1";
  int st = std::system(cmd.c_str());
  REQUIRE(st != -1);
  return WIFEXITED(st) ? WEXITSTATUS(st) : -2;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string write_text(const std::string& name, const std::string& content) {
  fs::path p = scratch() / name;
  std::ofstream out(p, std::ios::binary);
  out << content;
  return p.string();
}

// Shared synthetic corpus: generated once through the binary itself.
const std::string& corpus_prefix() {
  static std::string prefix = [] {
    std::string p = (scratch() / "base").string();
    REQUIRE(run("synth-hmm --out " + p + " --train 3000 --test 800 --seed 5") == 0);
    return p;
  }();
  return prefix;
}

std::string corpus() { return corpus_prefix() + ".corpus"; }

}  // namespace

TEST_CASE("synth-hmm is seed-deterministic and writes a readable spec") {
  std::string a = (scratch() / "synth_a").string();
  std::string b = (scratch() / "synth_b").string();
  std::string c = (scratch() / "synth_c").string();
  CHECK(run("synth-hmm --out " + a + " --train 2000 --test 500 --seed 9") == 0);
  CHECK(run("synth-hmm --out " + b + " --train 2000 --test 500 --seed 9") == 0);
  CHECK(run("synth-hmm --out " + c + " --train 2000 --test 500 --seed 10") == 0);
  CHECK(read_bytes(a + ".corpus") == read_bytes(b + ".corpus"));
  CHECK(read_bytes(a + ".corpus") != read_bytes(c + ".corpus"));
  CHECK(read_bytes(a + ".corpus").size() == 2500);

  auto j = nlohmann::json::parse(read_bytes(a + ".hmm.json"));
  CHECK(j["n_states"].get<int>() == 3);
  CHECK(j["n_symbols"].get<int>() == 4);
  CHECK(j["S"].size() == 3);
  CHECK(j["pi"].size() == 3);
}

TEST_CASE("init fits, reports, and is byte-deterministic") {
  std::string m1 = (scratch() / "init1.model").string();
  std::string m2 = (scratch() / "init2.model").string();
  std::string rep = (scratch() / "init.report.json").string();
  CHECK(run("init --data " + corpus() + " --out " + m1 + " --report " + rep) == 0);
  CHECK(run("init --data " + corpus() + " --out " + m2) == 0);
  CHECK(read_bytes(m1) == read_bytes(m2));

  auto j = nlohmann::json::parse(read_bytes(rep));
  CHECK(!j["stages"].empty());

  // Config sidecar rides along with the model.
  auto side = nlohmann::json::parse(read_bytes(m1 + ".config.json"));
  CHECK(side.contains("epochs"));

  PsrnnModel m = load_model(m1);
  CHECK(m.meta.kind == "discrete");
  CHECK(m.meta.alphabet == 5);  // four symbols plus the reserved unknown
}

TEST_CASE("failures map to stable exit codes") {
  std::string missing = (scratch() / "missing.bin").string();
  CHECK(run("init --data " + missing + " --out " + (scratch() / "x.model").string()) == 3);
  CHECK(run("init --definitely-not-a-flag") == 2);

  std::string bad_cfg = write_text("bad.config.json", "{\"bogus_key\": 1}");
  CHECK(run("init --data " + corpus() + " --config " + bad_cfg + " --out " +
            (scratch() / "y.model").string()) == 2);

  std::string junk = write_text("junk.model", "this is not a model file");
  CHECK(run("eval --model " + junk + " --data " + corpus()) == 3);
}

TEST_CASE("training zero epochs rewrites the model byte-identically") {
  std::string cfg = write_text("zero.config.json", "{\"epochs\": 0}");
  std::string base = (scratch() / "zero.model").string();
  std::string out = (scratch() / "zero.trained.model").string();
  CHECK(run("init --data " + corpus() + " --config " + cfg + " --out " + base) == 0);
  CHECK(run("train --data " + corpus() + " --config " + cfg + " --model " + base +
            " --out " + out) == 0);
  CHECK(read_bytes(base) == read_bytes(out));
}

TEST_CASE("seeded training is reproducible down to the curves") {
  std::string cfg = write_text("train.config.json",
                               "{\"epochs\": 2, \"learning_rate\": 0.25}");
  std::string base = (scratch() / "train.model").string();
  CHECK(run("init --data " + corpus() + " --config " + cfg + " --out " + base) == 0);

  std::string o1 = (scratch() / "train1.model").string();
  std::string o2 = (scratch() / "train2.model").string();
  std::string c1 = (scratch() / "curves1.csv").string();
  std::string c2 = (scratch() / "curves2.csv").string();
  CHECK(run("train --data " + corpus() + " --config " + cfg + " --model " + base +
            " --out " + o1 + " --curves " + c1) == 0);
  CHECK(run("train --data " + corpus() + " --config " + cfg + " --model " + base +
            " --out " + o2 + " --curves " + c2) == 0);
  CHECK(read_bytes(o1) == read_bytes(o2));
  CHECK(read_bytes(c1) == read_bytes(c2));
  CHECK(read_bytes(c1).rfind("epoch,split,metric,value\n", 0) == 0);
}

TEST_CASE("eval writes metrics json, optionally scored against the exact filter") {
  std::string base = (scratch() / "evalbase.model").string();
  CHECK(run("init --data " + corpus() + " --out " + base) == 0);

  std::string mpath = (scratch() / "metrics.json").string();
  CHECK(run("eval --model " + base + " --data " + corpus() + " --split test --out " +
            mpath) == 0);
  auto j = nlohmann::json::parse(read_bytes(mpath));
  CHECK(j["bpc"].get<double>() > 0.0);
  CHECK(j["split"] == "test");

  std::string gpath = (scratch() / "metrics_gap.json").string();
  CHECK(run("eval --model " + base + " --data " + corpus() + " --hmm-spec " +
            corpus_prefix() + ".hmm.json --out " + gpath) == 0);
  auto g = nlohmann::json::parse(read_bytes(gpath));
  CHECK(g.contains("exact_bpc"));
  CHECK(g.contains("bpc_gap"));
  CHECK(g["bpc_gap"].get<double>() > -1e-6);  // the exact filter is optimal on average
}

TEST_CASE("factorize produces loadable low-rank models") {
  std::string base = (scratch() / "factbase.model").string();
  CHECK(run("init --data " + corpus() + " --out " + base) == 0);

  std::string f3 = (scratch() / "fact3.model").string();
  std::string f5 = (scratch() / "fact5.model").string();
  CHECK(run("factorize --model " + base + " --rank 3 --keep-bias --out " + f3) == 0);
  CHECK(run("factorize --model " + base + " --rank 5 --data " + corpus() + " --out " +
            f5) == 0);
  CHECK(read_bytes(f3) != read_bytes(f5));

  PsrnnModel m3 = load_model(f3);
  REQUIRE(m3.n_layers() == 1);
  CHECK(m3.layers[0].kind == Layer::Kind::Factorized);
  CHECK(m3.layers[0].fact.A.rows() == 3);
  REQUIRE(m3.meta.original_bias.size() == 1);

  // Bias re-anchoring needs data to filter.
  CHECK(run("factorize --model " + base + " --rank 3 --out " +
            (scratch() / "fact_nodata.model").string()) == 2);

  CHECK(run("eval --model " + f5 + " --data " + corpus()) == 0);
}

TEST_CASE("gradcheck passes on a fresh fit") {
  CHECK(run("gradcheck --data " + corpus()) == 0);
  CHECK(run("gradcheck --data " + corpus() + " --t0 3 --t1 9 --step 1e-5") == 0);
}

TEST_CASE("dump-config prints the resolved configuration without side effects") {
  std::string target = (scratch() / "never_written.model").string();
  fs::remove(target);
  CHECK(run("init --data " + corpus() + " --dump-config --out " + target) == 0);
  CHECK(!fs::exists(target));
}

TEST_CASE("model files round-trip byte-identically") {
  HmmSpec h = cycle_hmm(3, 3, 0.85, 0.8);
  Rng rng(81);
  std::vector<std::vector<int>> train = {sample_hmm(h, 2500, rng)};
  TwoStageOptions opt;
  opt.rff_count = 64;
  opt.proj_dim = 5;
  PsrnnModel m = init_2sr(train, 3, 2, opt);
  m.meta.config_hash = 0x1234abcd5678ef90ULL;

  std::string bytes = serialize_model(m);
  PsrnnModel r = deserialize_model(bytes);
  CHECK(serialize_model(r) == bytes);
  CHECK(r.meta.config_hash == m.meta.config_hash);
  CHECK(r.n_layers() == 2);
  CHECK((r.Wd - m.Wd).cwiseAbs().maxCoeff() == 0.0);
  CHECK((r.layers[0].q1 - m.layers[0].q1).cwiseAbs().maxCoeff() == 0.0);

  // Factorized models carry their original biases through the file.
  PsrnnModel f = factorize_model(m, train, 4, 0.1, 2);
  std::string fb = serialize_model(f);
  PsrnnModel fr = deserialize_model(fb);
  CHECK(serialize_model(fr) == fb);
  REQUIRE(fr.meta.original_bias.size() == 2);
  CHECK((fr.meta.original_bias[0] - f.meta.original_bias[0]).cwiseAbs().maxCoeff() == 0.0);
  CHECK(fr.layers[1].kind == Layer::Kind::Factorized);

  // File-level save/load matches the in-memory serialization.
  std::string path = (scratch() / "roundtrip.model").string();
  save_model(m, path);
  CHECK(read_bytes(path) == bytes);
  PsrnnModel lm = load_model(path);
  CHECK(serialize_model(lm) == bytes);
}

TEST_CASE("continuous models serialize their encoder") {
  Rng rng(82);
  std::vector<MatrixXd> waves;
  MatrixXd w(80, 2);
  for (int t = 0; t < 80; ++t) {
    w(t, 0) = std::sin(0.2 * t) + 0.05 * rnorm(rng);
    w(t, 1) = std::cos(0.13 * t) + 0.05 * rnorm(rng);
  }
  waves.push_back(w);
  TwoStageOptions opt;
  opt.rff_count = 32;
  opt.proj_dim = 4;
  PsrnnModel m = init_2sr(waves, 1, opt);
  REQUIRE(m.enc.kind == Encoder::Kind::RffProj);

  std::string bytes = serialize_model(m);
  PsrnnModel r = deserialize_model(bytes);
  CHECK(serialize_model(r) == bytes);
  CHECK(r.enc.kind == Encoder::Kind::RffProj);
  CHECK(r.enc.rff.sigma == m.enc.rff.sigma);
  CHECK((r.enc.proj.basis - m.enc.proj.basis).cwiseAbs().maxCoeff() == 0.0);
  // The filtered trajectory survives the round trip exactly.
  FilterResult a = filter(m, waves[0]), b = filter(r, waves[0]);
  CHECK((a.preds - b.preds).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("corrupted model files are rejected") {
  HmmSpec h = cycle_hmm(3, 3, 0.85, 0.8);
  Rng rng(83);
  std::vector<std::vector<int>> train = {sample_hmm(h, 1500, rng)};
  PsrnnModel m = init_2sr(train, 3, 1, TwoStageOptions{});
  std::string bytes = serialize_model(m);

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize_model(bad_magic), IoError);

  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() - 10)), IoError);
  CHECK_THROWS_AS(deserialize_model(bytes + "trailing"), IoError);
  CHECK_THROWS_AS(deserialize_model(std::string()), IoError);
  CHECK_THROWS_AS(load_model((scratch() / "no_such.model").string()), IoError);
}
