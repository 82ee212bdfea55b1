#pragma once

#include <vector>

#include "psrnn/common.hpp"
#include "psrnn/tensor.hpp"

namespace psrnn {

// Hidden Markov model with column-stochastic transition S (S(i,j) =
// P(next=i | cur=j)) and emission O (O(y,s) = P(obs=y | state=s)).
struct HmmSpec {
  MatrixXd S;   // n_states x n_states
  MatrixXd O;   // n_symbols x n_states
  VectorXd pi;  // n_states
  int n_states() const { return static_cast<int>(S.rows()); }
  int n_symbols() const { return static_cast<int>(O.rows()); }
  void validate() const;
};

// Columns drawn i.i.d. Exp(1) and normalized (equivalently Dirichlet(1)),
// rejection-resampled until every entry of S, O and pi is at least 0.01.
HmmSpec random_hmm(int n_states, int n_symbols, Rng& rng);

// Cyclic chain: S = mix * shift + (1-mix)/n * ones, where shift moves state
// j to (j+1) mod n; O = emix * I + (1-emix)/n * ones (square); pi uniform.
HmmSpec cycle_hmm(int n_states, int n_symbols, double mix, double emix);

// Inverse-CDF categorical draw; the tie-breaking and rounding behavior is
// part of the determinism contract.
int sample_categorical(const VectorXd& p, Rng& rng);

std::vector<int> sample_hmm(const HmmSpec& h, long T, Rng& rng);

struct ForwardResult {
  MatrixXd preds;    // T x n_symbols, row t = P(o_{t+1} = . | o_{1..t})
  MatrixXd beliefs;  // T x n_states, posterior after observing o_t
  VectorXd logp2;    // T, log2 P(o_t | o_{1..t-1})
  double bpc = 0.0;  // -mean(logp2)
  double ospa = 0.0; // one-step-ahead accuracy of argmax preds
};

// Exact Bayes filter; the reference every approximate filter is scored
// against.  Raises ZeroProbabilityObservation if a symbol has zero
// predicted probability.
ForwardResult forward_filter(const HmmSpec& h, const std::vector<int>& obs);

// Stationary distribution of S by power iteration.
VectorXd stationary(const MatrixXd& S, int iters = 10000, double tol = 1e-14);

}  // namespace psrnn
