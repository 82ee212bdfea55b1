#pragma once

#include <vector>

#include "psrnn/common.hpp"
#include "psrnn/tensor.hpp"

namespace psrnn {

// Random Fourier feature map approximating the Gaussian kernel
// K(x,y) = exp(-||x-y||^2 / (2 sigma^2)).
struct RffMap {
  MatrixXd frequencies;  // D x d_in, rows ~ N(0, sigma^-2 I)
  VectorXd phases;       // D, uniform [0, 2*pi)
  double sigma = 0.0;
  double scale = 0.0;  // sqrt(2/D)
  int in_dim() const { return static_cast<int>(frequencies.cols()); }
  int out_dim() const { return static_cast<int>(frequencies.rows()); }
};

// Linear dimensionality reduction fitted by SVD of the centered feature
// matrix; rows of `basis` are orthonormal.
struct Projection {
  MatrixXd basis;  // d_out x D
  VectorXd mean;   // D
  bool rank_deficient = false;
  int in_dim() const { return static_cast<int>(basis.cols()); }
  int out_dim() const { return static_cast<int>(basis.rows()); }
};

VectorXd one_hot(int sym, int alphabet);

// Median pairwise distance over at most 2000 points, subsampled without
// replacement from the seeded engine when more are given.  Computed as the
// square root of the median squared distance (identical for odd pair
// counts, and the convention used throughout for even ones).
double fit_bandwidth(const MatrixXd& points, std::uint64_t seed = 0);

RffMap sample_rff(int d_in, int D, double sigma, std::uint64_t seed);
VectorXd apply_rff(const RffMap& m, const VectorXd& x);
MatrixXd apply_rff(const RffMap& m, const MatrixXd& X);  // row-wise

Projection fit_projection(const MatrixXd& F, int d_out, Warnings* warn = nullptr);
VectorXd project(const Projection& p, const VectorXd& x);
MatrixXd project(const Projection& p, const MatrixXd& X);  // row-wise

// Append a constant coordinate: [x; c].
VectorXd augment_constant(const VectorXd& x, double c);

// One (history, observation, future) feature triple per valid window
// position.  phi_next holds the future features one step ahead; rows where
// has_next is 0 are only valid for the normalizer/anchor statistics.
struct TripleSet {
  MatrixXd eta;       // n x d_h   history features
  MatrixXd omega;     // n x d_o   observation features
  MatrixXd phi;       // n x d_f   future features
  MatrixXd phi_next;  // n x d_f   future features at t+1 (rows with has_next)
  std::vector<char> has_next;
  long n = 0;
};

struct WindowSpec {
  int past_len = 1;    // p: history window o_{t-p} .. o_{t-1}
  int future_len = 1;  // k: future window o_t .. o_{t+k-1}
};

// Discrete triples: every stream is a stacked one-hot encoding.  Valid
// window positions t (0-based) satisfy p <= t <= T-k; windows never cross
// sequence boundaries; the phi/phi_next pair exists when t+1 is also valid.
TripleSet build_triples(const std::vector<std::vector<int>>& seqs, int alphabet,
                        const WindowSpec& w);

// Continuous triples: each stream is mapped through its own fitted RFF +
// projection encoder applied to the stacked window.
struct StreamEncoder {
  RffMap rff;
  Projection proj;
  VectorXd encode(const VectorXd& window) const;
  int out_dim() const { return proj.out_dim(); }
};

TripleSet build_triples(const std::vector<MatrixXd>& seqs, const WindowSpec& w,
                        const StreamEncoder& hist, const StreamEncoder& obs,
                        const StreamEncoder& fut);

// Stack rows first..first+len-1 of a trajectory into one vector.
VectorXd stack_window(const MatrixXd& seq, long first, int len);

namespace ref {
MatrixXd apply_rff(const RffMap& m, const MatrixXd& X);
}

}  // namespace psrnn
