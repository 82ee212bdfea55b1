#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "psrnn/features.hpp"
#include "psrnn/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace psrnn;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_per_call(const std::function<void()>& f, int reps) {
  f();  // warm up
  auto t0 = Clock::now();
  for (int i = 0; i < reps; ++i) f();
  auto t1 = Clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

double max_abs_diff(const Tensor3& a, const Tensor3& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i)
    m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

double max_abs_diff(const MatrixXd& a, const MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

int fails = 0;

void report(const char* name, double t_ref, double t_opt, double diff) {
  bool ok = diff <= 1e-12;
  if (!ok) ++fails;
  std::printf("%-28s ref %10.3f ms   opt %10.3f ms   speedup %5.2fx   max|diff| %.2e %s\n",
              name, t_ref * 1e3, t_opt * 1e3, t_ref / t_opt, diff, ok ? "" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("openmp enabled, %d thread(s)\n", omp_get_max_threads());
#else
  std::printf("openmp disabled (serial build)\n");
#endif

  Rng rng(12345);
  const int n = 80;
  Tensor3 T(n, n, n);
  for (auto& x : T.v) x = rnorm(rng);
  MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = rnorm(rng);

  for (int mode : {1, 2, 3}) {
    Tensor3 a = ref::mode_mat_product(T, mode, M);
    Tensor3 b = mode_mat_product(T, mode, M);
    char name[64];
    std::snprintf(name, sizeof(name), "mode_mat_product mode %d", mode);
    double tr = seconds_per_call([&] { ref::mode_mat_product(T, mode, M); }, 3);
    double to = seconds_per_call([&] { mode_mat_product(T, mode, M); }, 3);
    report(name, tr, to, max_abs_diff(a, b));
  }

  {
    std::vector<VectorXd> vs(200, VectorXd(n));
    for (auto& v : vs)
      for (int i = 0; i < n; ++i) v[i] = rnorm(rng);
    for (int mode : {1, 2, 3}) {
      MatrixXd a = ref::contract_vec(T, mode, vs[0]);
      MatrixXd b = contract_vec(T, mode, vs[0]);
      char name[64];
      std::snprintf(name, sizeof(name), "contract_vec mode %d x200", mode);
      double tr = seconds_per_call(
          [&] {
            for (const auto& v : vs) ref::contract_vec(T, mode, v);
          },
          3);
      double to = seconds_per_call(
          [&] {
            for (const auto& v : vs) contract_vec(T, mode, v);
          },
          3);
      report(name, tr, to, max_abs_diff(a, b));
    }
  }

  {
    RffMap rff = sample_rff(10, 1000, 1.5, 7);
    MatrixXd X(20000, 10);
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      for (int j = 0; j < 10; ++j) X(i, j) = rnorm(rng);
    MatrixXd a = ref::apply_rff(rff, X);
    MatrixXd b = apply_rff(rff, X);
    double tr = seconds_per_call([&] { ref::apply_rff(rff, X); }, 3);
    double to = seconds_per_call([&] { apply_rff(rff, X); }, 3);
    report("apply_rff 20000x1000", tr, to, max_abs_diff(a, b));
  }

  if (fails) {
    std::printf("%d kernel(s) disagree with the reference\n", fails);
    return 1;
  }
  std::printf("all kernels agree with the reference within 1e-12\n");
  return 0;
}
