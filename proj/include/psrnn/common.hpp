#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace psrnn {

// Error taxonomy. Every failure mode raised by the library derives from
// Error; the CLI maps each concrete class to a distinct exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define PSRNN_DEFINE_ERROR(NAME) \
  struct NAME : Error {          \
    using Error::Error;          \
  }

PSRNN_DEFINE_ERROR(DimensionMismatch);
PSRNN_DEFINE_ERROR(EmptyData);
PSRNN_DEFINE_ERROR(NormalizationUnderflow);
PSRNN_DEFINE_ERROR(DegenerateSample);
PSRNN_DEFINE_ERROR(SingularUpdate);
PSRNN_DEFINE_ERROR(SingularNormalizer);
PSRNN_DEFINE_ERROR(NumericalFailure);
PSRNN_DEFINE_ERROR(NonFiniteGradient);
PSRNN_DEFINE_ERROR(SequenceTooShort);
PSRNN_DEFINE_ERROR(ZeroProbabilityObservation);
PSRNN_DEFINE_ERROR(IoError);
PSRNN_DEFINE_ERROR(EmptyCorpus);
PSRNN_DEFINE_ERROR(RaggedRows);
PSRNN_DEFINE_ERROR(NonNumeric);
PSRNN_DEFINE_ERROR(ConfigError);

#undef PSRNN_DEFINE_ERROR

// Non-fatal diagnostics (rank deficiency and the like) are collected here
// instead of being thrown; callers that do not care pass nullptr.
struct Warnings {
  std::vector<std::string> items;
  void add(std::string m) { items.push_back(std::move(m)); }
  bool empty() const { return items.empty(); }
};

// All randomness in the library flows through one engine type seeded
// explicitly by the caller; nothing ever touches std::random_device.
using Rng = std::mt19937_64;

inline double runif(Rng& g, double a = 0.0, double b = 1.0) {
  std::uniform_real_distribution<double> d(a, b);
  return d(g);
}

inline double rnorm(Rng& g, double mu = 0.0, double sd = 1.0) {
  std::normal_distribution<double> d(mu, sd);
  return d(g);
}

inline double rexp(Rng& g, double rate = 1.0) {
  std::exponential_distribution<double> d(rate);
  return d(g);
}

// FNV-1a 64-bit hash, used to fingerprint canonical configuration dumps.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline constexpr double kLn2 = 0.69314718055994530942;
// States whose pre-normalization two-norm falls below this are degenerate:
// evaluation refuses to continue, training substitutes the floor and counts.
inline constexpr double kNormFloor = 1e-12;

}  // namespace psrnn
