// End-to-end acceptance harness.  Each criterion prints one PASS/FAIL line
// with the measured quantities; the exit status is the number of failures.
// Every fixture is seeded, so the expected outcome is bit-stable across runs.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "psrnn/model_io.hpp"
#include "psrnn/oracle.hpp"
#include "psrnn/train.hpp"
#include "psrnn/twostage.hpp"

using namespace psrnn;

namespace {

// Tolerances and budgets, one place.
constexpr double kTensorTol = 1e-12;        // 1: optimized vs reference kernels
constexpr double kCpTol = 1e-6;             // 2: CP reconstruction, relative Frobenius
constexpr double kMiTol = 1e-10;            // 3: factorized == reconstructed-full prenorm
constexpr double kGradTol = 1e-5;           // 4: BPTT vs central differences
constexpr double kTvMax = 0.05;             // 5: mean TV at the largest sample
constexpr double kOspaPts = 2.0;            // 5: OSPA gap to the exact filter, percentage points
constexpr double kLayerTol = 0.05;          // 7: 2-layer vs 1-layer test BPC
constexpr double kRankStepTol = 0.05;       // 8: per-step and full-vs-factorized slack
constexpr double kNormTol = 1e-12;          // 9: | ||q|| - 1 | on every emitted state
constexpr double kTensorBudget = 5.0;       // seconds
constexpr double kCpBudget = 30.0;
constexpr double kGradBudget = 60.0;
constexpr double kConsistencyBudget = 600.0;

// Fixture seeds.  The protocols (corpus sizes, learning rates, horizons)
// were fixed first; the seeds were then chosen once and frozen.
constexpr std::uint64_t kConsistencySeed = 11;        // 3-state/4-symbol HMM and its sample
constexpr std::uint64_t kCorpusSeed = 3;              // 6-state cycle HMM sample
constexpr std::uint64_t kRandomInitSeeds[3] = {1, 2, 3};
constexpr std::uint64_t kStackSeed = 1;               // layer-2 feature encoder
constexpr std::uint64_t kCpSeed = 0;                  // ALS factor initialization

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// Two-norm models built along the way, re-filtered for the normalization
// audit (criterion 9), plus the underflow counts of every training run.
struct Registry {
  std::vector<std::pair<PsrnnModel, std::vector<int>>> models;
  long train_underflows = 0;

  void keep(const PsrnnModel& m, const std::vector<int>& seq) { models.emplace_back(m, seq); }
} g_reg;

struct Corpus {
  std::vector<std::vector<int>> train, test;
  HmmSpec h;
};

// Shared refinement corpus: 6-state cyclic HMM, 24k train / 8k test steps.
const Corpus& cycle_corpus() {
  static const Corpus c = [] {
    Corpus out;
    out.h = cycle_hmm(6, 6, 0.85, 0.8);
    Rng rng(kCorpusSeed);
    out.train.push_back(sample_hmm(out.h, 24000, rng));
    out.test.push_back(sample_hmm(out.h, 8000, rng));
    return out;
  }();
  return c;
}

// Decoder refit after factorization: ridge from the factorized model's
// filtered train states to the next symbols (same recipe as the CLI).
PsrnnModel refit_decoder(PsrnnModel f, const std::vector<std::vector<int>>& train) {
  long rows = 0;
  for (const auto& s : train) rows += std::max<long>(0, static_cast<long>(s.size()) - 1);
  MatrixXd X(rows, f.top_dim());
  std::vector<int> y;
  y.reserve(static_cast<std::size_t>(rows));
  long at = 0;
  for (const auto& s : train) {
    if (s.size() < 2) continue;
    FilterResult fr = filter(f, s, NormMode::Train, false);
    long T = static_cast<long>(s.size());
    X.middleRows(at, T - 1) = fr.states.back().topRows(T - 1);
    for (long t = 1; t < T; ++t) y.push_back(s[static_cast<std::size_t>(t)]);
    at += T - 1;
  }
  DecoderFit fit = fit_decoder(X, y, f.meta.alphabet, 1e-2, 0.02);
  f.Wd = fit.Wd;
  f.bd = fit.bd;
  return f;
}

Tensor3 random_tensor(int a, int b, int c, Rng& rng) {
  Tensor3 T(a, b, c);
  for (double& x : T.v) x = rnorm(rng);
  return T;
}

MatrixXd random_matrix(long r, long c, Rng& rng) {
  MatrixXd M(r, c);
  for (long i = 0; i < r; ++i)
    for (long j = 0; j < c; ++j) M(i, j) = rnorm(rng);
  return M;
}

VectorXd random_vector(long n, Rng& rng) {
  VectorXd v(n);
  for (long i = 0; i < n; ++i) v[i] = rnorm(rng);
  return v;
}

// ---- criterion 1: optimized tensor kernels match the triple-loop reference

bool criterion_tensor(std::string& detail) {
  Timer timer;
  Rng rng(7);
  double worst = 0.0;
  for (int it = 0; it < 200; ++it) {
    int a = 1 + static_cast<int>(rng() % 5);
    int b = 1 + static_cast<int>(rng() % 5);
    int c = 1 + static_cast<int>(rng() % 5);
    Tensor3 T = random_tensor(a, b, c, rng);
    for (int mode = 1; mode <= 3; ++mode) {
      VectorXd v = random_vector(T.dim(mode), rng);
      MatrixXd got = contract_vec(T, mode, v);
      MatrixXd want = ref::contract_vec(T, mode, v);
      worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());

      int rows = 1 + static_cast<int>(rng() % 5);
      MatrixXd M = random_matrix(rows, T.dim(mode), rng);
      Tensor3 gt = mode_mat_product(T, mode, M);
      Tensor3 wt = ref::mode_mat_product(T, mode, M);
      for (std::size_t i = 0; i < gt.v.size(); ++i)
        worst = std::max(worst, std::abs(gt.v[i] - wt.v[i]));
    }
  }
  double secs = timer.seconds();
  char buf[160];
  std::snprintf(buf, sizeof buf, "max |opt - ref| = %.3g over 200 instances (tol %.0e), %.2fs",
                worst, kTensorTol, secs);
  detail = buf;
  return worst <= kTensorTol && secs < kTensorBudget;
}

// ---- criterion 2: ALS recovers planted low-rank tensors

bool criterion_cp(std::string& detail) {
  Timer timer;
  Rng rng(13);
  double worst = 0.0;
  int cases = 0;
  for (int rank : {1, 2, 3, 4, 5}) {
    for (int rep = 0; rep < 2; ++rep) {
      int a = rank + static_cast<int>(rng() % (11 - rank));
      int b = rank + static_cast<int>(rng() % (11 - rank));
      int c = rank + static_cast<int>(rng() % (11 - rank));
      CpFactors planted{random_matrix(rank, a, rng), random_matrix(rank, b, rng),
                        random_matrix(rank, c, rng)};
      Tensor3 T = cp_reconstruct(planted);
      // ALS is seeded but can stall in a local minimum; a handful of
      // restarts from fresh factor draws is the standard remedy.
      double rel = std::numeric_limits<double>::infinity();
      for (std::uint64_t restart = 0; restart < 6 && rel > kCpTol; ++restart) {
        CpFactors F = cp_als(T, rank, 500, 1e-14, 1 + 10 * rank + rep + 1000 * restart);
        Tensor3 R = cp_reconstruct(F);
        R.axpy(-1.0, T);
        rel = std::min(rel, R.frob() / T.frob());
      }
      worst = std::max(worst, rel);
      ++cases;
    }
  }
  double secs = timer.seconds();
  char buf[160];
  std::snprintf(buf, sizeof buf, "max rel Frobenius error %.3g over %d planted tensors (tol %.0e), %.2fs",
                worst, cases, kCpTol, secs);
  detail = buf;
  return worst <= kCpTol && secs < kCpBudget;
}

// ---- criterion 3: multiplicative-interaction identity, pre-normalization

bool criterion_mi(std::string& detail) {
  Rng rng(29);
  double worst = 0.0;
  for (int it = 0; it < 100; ++it) {
    int d_s = 2 + static_cast<int>(rng() % 6);
    int d_o = 2 + static_cast<int>(rng() % 6);
    int rank = 4;
    Layer fact;
    fact.kind = Layer::Kind::Factorized;
    fact.fact.A = random_matrix(rank, d_s, rng);
    fact.fact.B = random_matrix(rank, d_o, rng);
    fact.fact.C = random_matrix(rank, d_s, rng);
    fact.fact.b = random_vector(d_s, rng);
    fact.q1 = random_vector(d_s, rng).normalized();

    Layer full;
    full.kind = Layer::Kind::Full;
    full.full.W = cp_reconstruct(CpFactors{fact.fact.A, fact.fact.B, fact.fact.C});
    full.full.b = fact.fact.b;
    full.q1 = fact.q1;

    VectorXd q = random_vector(d_s, rng).normalized();
    VectorXd o = random_vector(d_o, rng);
    worst = std::max(worst,
                     (cell_prenorm(fact, q, o) - cell_prenorm(full, q, o)).cwiseAbs().maxCoeff());
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "max |factorized - reconstructed full| = %.3g on 100 draws (tol %.0e)",
                worst, kMiTol);
  detail = buf;
  return worst <= kMiTol;
}

// ---- criterion 4: analytic BPTT gradients vs central differences

bool criterion_grad(std::string& detail) {
  Timer timer;
  const Corpus& c = cycle_corpus();
  std::vector<int> seq(c.train[0].begin(), c.train[0].begin() + 64);

  TwoStageOptions opt;
  double worst = 0.0;
  for (int layers : {1, 2}) {
    TwoStageOptions o = opt;
    if (layers == 2) {
      o.proj_dim = 5;
      o.rff_count = 64;
      o.seed = 21;
    }
    PsrnnModel full = init_2sr({seq}, 6, layers, o);
    PsrnnModel fact =
        refit_decoder(factorize_model(full, {seq}, 4, std::nullopt, kCpSeed), {seq});
    for (const PsrnnModel* m : {&full, &fact}) {
      GradCheckReport rep = grad_check(*m, seq, 5, 8, 1e-5);
      worst = std::max(worst, rep.max_rel_err);
      g_reg.keep(*m, seq);
    }
  }
  double secs = timer.seconds();
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "max rel err %.3g over {full,factorized} x {1,2} layers, 3-step windows (tol %.0e), %.2fs",
                worst, kGradTol, secs);
  detail = buf;
  return worst <= kGradTol && secs < kGradBudget;
}

// ---- criterion 5: consistency against the exact filter

bool criterion_consistency(std::string& detail) {
  Timer timer;
  Rng rng(kConsistencySeed);
  HmmSpec h = random_hmm(3, 4, rng);
  std::vector<int> train = sample_hmm(h, 100000, rng);
  std::vector<int> test = sample_hmm(h, 10000, rng);
  ForwardResult exact = forward_filter(h, test);

  double tvs[3];
  int i = 0;
  for (long T : {1000L, 10000L, 100000L}) {
    std::vector<std::vector<int>> prefix{std::vector<int>(train.begin(), train.begin() + T)};
    FullNormModel fm = init_full_norm(prefix, 4, 1e-2);
    tvs[i++] = mean_tv(full_norm_predictions(fm, test), exact.preds);
  }
  bool tv_ok = tvs[0] > tvs[1] && tvs[1] > tvs[2] && tvs[2] <= kTvMax;

  TwoStageOptions opt;
  PsrnnModel two_norm = init_2sr({train}, 4, 1, opt);
  EvalResult ev = evaluate(two_norm, {test});
  double gap_pts = std::abs(ev.ospa - exact.ospa) * 100.0;
  g_reg.keep(two_norm, test);

  double secs = timer.seconds();
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "mean TV %.4f / %.4f / %.4f at T=1e3/1e4/1e5 (last <= %.2f), "
                "OSPA %.4f vs exact %.4f (gap %.2f <= %.1f pts), %.1fs",
                tvs[0], tvs[1], tvs[2], kTvMax, ev.ospa, exact.ospa, gap_pts, kOspaPts, secs);
  detail = buf;
  return tv_ok && gap_pts <= kOspaPts && secs < kConsistencyBudget;
}

// ---- criteria 6-8 share the cycle corpus and SGD refinement

TrainConfig warm_start_config() {
  TrainConfig cfg;
  cfg.learning_rate = 0.5;
  cfg.bptt_horizon = 2000;
  cfg.epochs = 5;
  cfg.batch_windows = 1;
  cfg.grad_clip = 0.0;
  return cfg;
}

TrainConfig short_window_config(int epochs) {
  TrainConfig cfg;
  cfg.learning_rate = 0.25;
  cfg.bptt_horizon = 35;
  cfg.epochs = epochs;
  return cfg;
}

bool criterion_init_value(std::string& detail) {
  const Corpus& c = cycle_corpus();
  TrainConfig cfg = warm_start_config();
  TwoStageOptions opt;

  PsrnnModel warm = init_2sr(c.train, 6, 1, opt);
  EvalResult train_before = evaluate(warm, c.train);
  TrainStats st;
  sgd_refine(warm, c.train, c.test, cfg, &st);
  g_reg.train_underflows += st.underflows;
  EvalResult warm_test = evaluate(warm, c.test);
  EvalResult train_after = evaluate(warm, c.train);
  g_reg.keep(warm, c.test[0]);

  int wins = 0;
  double margins[3];
  for (int s = 0; s < 3; ++s) {
    PsrnnModel cold = init_random(6, 1, 7, kRandomInitSeeds[s]);
    TrainStats cst;
    sgd_refine(cold, c.train, c.test, cfg, &cst);
    g_reg.train_underflows += cst.underflows;
    double bpc = evaluate(cold, c.test).bpc;
    margins[s] = bpc - warm_test.bpc;
    if (warm_test.bpc < bpc) ++wins;
    g_reg.keep(cold, c.test[0]);
  }
  bool no_degrade = train_after.bpc <= train_before.bpc;

  char buf[240];
  std::snprintf(buf, sizeof buf,
                "warm test BPC %.4f, random margins %+.4f/%+.4f/%+.4f (wins %d/3), "
                "train %.4f -> %.4f (%s)",
                warm_test.bpc, margins[0], margins[1], margins[2], wins, train_before.bpc,
                train_after.bpc, no_degrade ? "non-degrading" : "DEGRADED");
  detail = buf;
  return wins >= 2 && no_degrade;
}

bool criterion_multilayer(std::string& detail) {
  const Corpus& c = cycle_corpus();
  TrainConfig cfg = short_window_config(20);
  TwoStageOptions opt;

  PsrnnModel one = init_2sr(c.train, 6, 1, opt);
  TrainStats s1;
  sgd_refine(one, c.train, c.test, cfg, &s1);
  double bpc1 = evaluate(one, c.test).bpc;
  g_reg.train_underflows += s1.underflows;
  g_reg.keep(one, c.test[0]);

  TwoStageOptions o2 = opt;
  o2.proj_dim = 8;
  o2.rff_count = 200;
  o2.seed = kStackSeed;
  PsrnnModel two = init_2sr(c.train, 6, 2, o2);
  TrainStats s2;
  sgd_refine(two, c.train, c.test, cfg, &s2);
  double bpc2 = evaluate(two, c.test).bpc;
  g_reg.train_underflows += s2.underflows;
  g_reg.keep(two, c.test[0]);

  char buf[160];
  std::snprintf(buf, sizeof buf, "1-layer %.4f, 2-layer %.4f, diff %+.4f (tol %.2f)", bpc1,
                bpc2, bpc2 - bpc1, kLayerTol);
  detail = buf;
  return bpc2 <= bpc1 + kLayerTol;
}

bool criterion_rank_sweep(std::string& detail) {
  const Corpus& c = cycle_corpus();
  TrainConfig cfg = short_window_config(5);
  TwoStageOptions opt;

  PsrnnModel base = init_2sr(c.train, 6, 1, opt);
  PsrnnModel full = base;
  TrainStats sf;
  sgd_refine(full, c.train, c.test, cfg, &sf);
  double full_bpc = evaluate(full, c.test).bpc;
  g_reg.train_underflows += sf.underflows;
  g_reg.keep(full, c.test[0]);

  const int ranks[4] = {2, 5, 10, 20};
  double bpcs[4];
  for (int i = 0; i < 4; ++i) {
    PsrnnModel f = factorize_model(base, c.train, ranks[i], std::optional<double>(0.1), kCpSeed);
    f = refit_decoder(std::move(f), c.train);
    TrainStats st;
    sgd_refine(f, c.train, c.test, cfg, &st);
    bpcs[i] = evaluate(f, c.test).bpc;
    g_reg.train_underflows += st.underflows;
    g_reg.keep(f, c.test[0]);
  }
  bool mono = true;
  for (int i = 1; i < 4; ++i)
    if (bpcs[i] > bpcs[i - 1] + kRankStepTol) mono = false;
  bool full_ok = true;
  for (double b : bpcs)
    if (full_bpc > b + kRankStepTol) full_ok = false;

  char buf[240];
  std::snprintf(buf, sizeof buf,
                "rank {2,5,10,20} test BPC %.4f/%.4f/%.4f/%.4f, full %.4f "
                "(monotone within %.2f: %s; full within %.2f of all: %s)",
                bpcs[0], bpcs[1], bpcs[2], bpcs[3], full_bpc, kRankStepTol,
                mono ? "yes" : "NO", kRankStepTol, full_ok ? "yes" : "NO");
  detail = buf;
  return mono && full_ok;
}

// ---- criterion 9: normalization audit over everything built above

bool criterion_norm_audit(std::string& detail) {
  double worst_dev = 0.0;
  long underflows = g_reg.train_underflows;
  long states = 0;
  for (const auto& [m, seq] : g_reg.models) {
    FilterResult fr = filter(m, seq, NormMode::Eval, false);
    worst_dev = std::max(worst_dev, fr.stats.max_norm_dev);
    underflows += fr.stats.underflows;
    states += fr.states[0].rows() * m.n_layers();
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "max | ||q|| - 1 | = %.3g over %ld states from %zu models (tol %.0e); "
                "underflow count %ld",
                worst_dev, states, g_reg.models.size(), kNormTol, underflows);
  detail = buf;
  return worst_dev <= kNormTol && underflows == 0;
}

// ---- criterion 10: determinism and byte-exact serialization

bool criterion_determinism(std::string& detail) {
  namespace fs = std::filesystem;
  const Corpus& c = cycle_corpus();
  TrainConfig cfg = short_window_config(2);
  TwoStageOptions opt;

  auto pipeline = [&] {
    PsrnnModel m = init_2sr(c.train, 6, 1, opt);
    TrainStats st;
    sgd_refine(m, c.train, c.test, cfg, &st);
    g_reg.train_underflows += st.underflows;
    return m;
  };
  fs::path dir = fs::temp_directory_path() / "psrnn_acceptance";
  fs::create_directories(dir);
  auto bytes_of = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  PsrnnModel first = pipeline();
  save_model(first, (dir / "a.model").string());
  save_model(pipeline(), (dir / "b.model").string());
  std::string a = bytes_of(dir / "a.model");
  std::string b = bytes_of(dir / "b.model");
  bool repeat_ok = !a.empty() && a == b;

  PsrnnModel loaded = load_model((dir / "a.model").string());
  std::string again = serialize_model(loaded);
  bool roundtrip_ok = again == a;
  g_reg.keep(loaded, c.test[0]);
  g_reg.keep(first, c.test[0]);

  char buf[160];
  std::snprintf(buf, sizeof buf,
                "repeated seeded runs: %s (%zu bytes); save/load round-trip: %s",
                repeat_ok ? "identical" : "DIFFER", a.size(),
                roundtrip_ok ? "identical" : "DIFFER");
  detail = buf;
  return repeat_ok && roundtrip_ok;
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    std::function<bool(std::string&)> fn;
  };
  const Entry entries[] = {
      {"tensor kernels match reference", criterion_tensor},
      {"CP decomposition recovery", criterion_cp},
      {"multiplicative-interaction identity", criterion_mi},
      {"BPTT gradients vs finite differences", criterion_grad},
      {"consistency with the exact filter", criterion_consistency},
      {"initialization beats random start", criterion_init_value},
      {"two layers do not hurt", criterion_multilayer},
      {"factorized rank sweep", criterion_rank_sweep},
      {"normalization invariant", criterion_norm_audit},
      {"determinism and serialization", criterion_determinism},
  };

  // The normalization audit (criterion 9) inspects every model the other
  // criteria construct, so it executes last; lines still print in order.
  const int order[] = {0, 1, 2, 3, 4, 5, 6, 7, 9, 8};
  bool pass[10] = {};
  std::string detail[10];
  for (int idx : order) {
    try {
      pass[idx] = entries[idx].fn(detail[idx]);
    } catch (const std::exception& ex) {
      detail[idx] = std::string("exception: ") + ex.what();
    }
  }

  int failures = 0;
  for (int i = 0; i < 10; ++i) {
    if (!pass[i]) ++failures;
    std::printf("criterion %2d: %s — %s — %s\n", i + 1, pass[i] ? "PASS" : "FAIL",
                entries[i].name, detail[i].c_str());
  }
  int id = 10;
  if (failures == 0)
    std::printf("all %d acceptance criteria passed\n", id);
  else
    std::printf("%d of %d acceptance criteria FAILED\n", failures, id);
  return failures;
}
