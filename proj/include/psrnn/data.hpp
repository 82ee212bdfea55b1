#pragma once

#include <string>
#include <vector>

#include "psrnn/common.hpp"
#include "psrnn/tensor.hpp"

namespace psrnn {

// In-memory dataset: one discrete symbol stream or a set of continuous
// trajectories, split train/test, with the vocabulary or standardization
// fitted on the training split only.
struct Dataset {
  enum class Kind { Discrete, Continuous };
  Kind kind = Kind::Discrete;

  // Discrete: symbol ids in [0, alphabet).  The alphabet covers the
  // training bytes plus one reserved unknown id (alphabet - 1) that absorbs
  // bytes first seen in the test split.
  int alphabet = 0;
  std::vector<unsigned char> id_to_byte;  // training byte per id (unknown id excluded)
  std::vector<std::vector<int>> train_d, test_d;

  // Continuous: trajectories standardized per feature with train statistics.
  int feat_dim = 0;
  VectorXd mean, stdev;
  std::vector<MatrixXd> train_c, test_c;

  std::vector<std::string> sources;  // file names, for the manifest
  double split_fraction = 0.0;

  long train_steps() const;
  long test_steps() const;
};

// Byte corpus -> one discrete sequence split at floor(fraction * length).
// The alphabet is the sorted set of distinct training bytes plus the
// reserved unknown id.
Dataset load_chars(const std::string& path, double split_fraction = 0.75);

// CSV trajectories, one sequence per file (rows = time steps, columns =
// features, no header).  The split is over files: the first
// ceil(fraction * n) files train, the rest test.  Standardization uses
// training rows only.
Dataset load_trajectories(const std::vector<std::string>& paths,
                          double split_fraction = 0.75);

// JSON round-trip of the full dataset (manifest + payload).
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

// Manifest summary as a JSON string (counts, alphabet/features, sources).
std::string dataset_manifest(const Dataset& d);

}  // namespace psrnn
