#include "psrnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace psrnn {

using nlohmann::json;

long Dataset::train_steps() const {
  long n = 0;
  if (kind == Kind::Discrete)
    for (const auto& s : train_d) n += static_cast<long>(s.size());
  else
    for (const auto& s : train_c) n += s.rows();
  return n;
}

long Dataset::test_steps() const {
  long n = 0;
  if (kind == Kind::Discrete)
    for (const auto& s : test_d) n += static_cast<long>(s.size());
  else
    for (const auto& s : test_c) n += s.rows();
  return n;
}

Dataset load_chars(const std::string& path, double split_fraction) {
  if (split_fraction <= 0.0 || split_fraction >= 1.0)
    throw ConfigError("load_chars: split fraction must be in (0,1)");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_chars: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.empty()) throw EmptyCorpus("load_chars: " + path + " is empty");

  const long T = static_cast<long>(bytes.size());
  const long cut = static_cast<long>(split_fraction * static_cast<double>(T));
  if (cut < 1 || cut >= T)
    throw EmptyCorpus("load_chars: split leaves an empty side for length " +
                      std::to_string(T));

  // Vocabulary from the training prefix only; everything unseen maps to the
  // reserved unknown id.
  std::map<unsigned char, int> vocab;
  for (long i = 0; i < cut; ++i) vocab.emplace(static_cast<unsigned char>(bytes[i]), 0);
  int next = 0;
  for (auto& kv : vocab) kv.second = next++;

  Dataset d;
  d.kind = Dataset::Kind::Discrete;
  d.alphabet = next + 1;  // + reserved unknown id
  d.id_to_byte.reserve(vocab.size());
  for (const auto& kv : vocab) d.id_to_byte.push_back(kv.first);
  const int unk = next;
  auto encode = [&](long from, long to) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(to - from));
    for (long i = from; i < to; ++i) {
      auto it = vocab.find(static_cast<unsigned char>(bytes[i]));
      out.push_back(it == vocab.end() ? unk : it->second);
    }
    return out;
  };
  d.train_d.push_back(encode(0, cut));
  d.test_d.push_back(encode(cut, T));
  d.sources.push_back(path);
  d.split_fraction = split_fraction;
  return d;
}

namespace {

MatrixXd read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_trajectories: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long width = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double x = std::stod(cell, &used);
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
          ++used;
        if (used != cell.size())
          throw NonNumeric("load_trajectories: non-numeric cell '" + cell + "' in " + path);
        row.push_back(x);
      } catch (const std::invalid_argument&) {
        throw NonNumeric("load_trajectories: non-numeric cell '" + cell + "' in " + path);
      } catch (const std::out_of_range&) {
        throw NonNumeric("load_trajectories: out-of-range cell '" + cell + "' in " + path);
      }
    }
    if (row.empty()) continue;
    if (width < 0) width = static_cast<long>(row.size());
    if (static_cast<long>(row.size()) != width)
      throw RaggedRows("load_trajectories: row width changes in " + path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EmptyCorpus("load_trajectories: " + path + " has no rows");
  MatrixXd M(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (long j = 0; j < width; ++j) M(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  return M;
}

}  // namespace

Dataset load_trajectories(const std::vector<std::string>& paths, double split_fraction) {
  if (paths.empty()) throw EmptyCorpus("load_trajectories: no files");
  if (split_fraction <= 0.0 || split_fraction >= 1.0)
    throw ConfigError("load_trajectories: split fraction must be in (0,1)");

  std::vector<MatrixXd> seqs;
  seqs.reserve(paths.size());
  long width = -1;
  for (const auto& p : paths) {
    MatrixXd M = read_csv(p);
    if (width < 0) width = M.cols();
    if (M.cols() != width)
      throw RaggedRows("load_trajectories: feature count differs between files");
    seqs.push_back(std::move(M));
  }

  // A single file loads train-only (no test split); otherwise the first
  // ceil(fraction * n) files train and at least one file is held out.
  const long n = static_cast<long>(seqs.size());
  long ntrain = static_cast<long>(std::ceil(split_fraction * static_cast<double>(n)));
  ntrain = std::min(std::max<long>(ntrain, 1), std::max<long>(n - 1, 1));

  Dataset d;
  d.kind = Dataset::Kind::Continuous;
  d.feat_dim = static_cast<int>(width);
  d.split_fraction = split_fraction;
  d.sources = paths;

  // Standardization from training rows only.
  long rows = 0;
  VectorXd sum = VectorXd::Zero(width), sq = VectorXd::Zero(width);
  for (long i = 0; i < ntrain; ++i) {
    sum += seqs[static_cast<std::size_t>(i)].colwise().sum().transpose();
    sq += seqs[static_cast<std::size_t>(i)].array().square().colwise().sum().matrix().transpose();
    rows += seqs[static_cast<std::size_t>(i)].rows();
  }
  d.mean = sum / static_cast<double>(rows);
  VectorXd var = sq / static_cast<double>(rows) - d.mean.cwiseProduct(d.mean);
  d.stdev = var.cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index j = 0; j < d.stdev.size(); ++j)
    if (d.stdev[j] < 1e-12) d.stdev[j] = 1.0;  // constant features pass through centered

  auto standardize = [&](const MatrixXd& M) {
    return MatrixXd(((M.rowwise() - d.mean.transpose()).array().rowwise() /
                     d.stdev.transpose().array())
                        .matrix());
  };
  for (long i = 0; i < n; ++i) {
    if (i < ntrain)
      d.train_c.push_back(standardize(seqs[static_cast<std::size_t>(i)]));
    else
      d.test_c.push_back(standardize(seqs[static_cast<std::size_t>(i)]));
  }
  return d;
}

namespace {

json seq_to_json(const std::vector<int>& s) { return json(s); }

json mat_to_json(const MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd mat_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw IoError("dataset: bad matrix payload");
  const Eigen::Index r = static_cast<Eigen::Index>(j.size());
  const Eigen::Index c = static_cast<Eigen::Index>(j[0].size());
  MatrixXd M(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(i)].size()) != c)
      throw RaggedRows("dataset: ragged matrix payload");
    for (Eigen::Index k = 0; k < c; ++k)
      M(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
  }
  return M;
}

}  // namespace

std::string dataset_manifest(const Dataset& d) {
  json j;
  j["kind"] = d.kind == Dataset::Kind::Discrete ? "discrete" : "continuous";
  j["split_fraction"] = d.split_fraction;
  j["sources"] = d.sources;
  if (d.kind == Dataset::Kind::Discrete) {
    j["alphabet"] = d.alphabet;
    j["train_sequences"] = d.train_d.size();
    j["test_sequences"] = d.test_d.size();
  } else {
    j["features"] = d.feat_dim;
    j["train_sequences"] = d.train_c.size();
    j["test_sequences"] = d.test_c.size();
  }
  j["train_steps"] = d.train_steps();
  j["test_steps"] = d.test_steps();
  return j.dump(2);
}

void save_dataset(const Dataset& d, const std::string& path) {
  json j;
  j["kind"] = d.kind == Dataset::Kind::Discrete ? "discrete" : "continuous";
  j["split_fraction"] = d.split_fraction;
  j["sources"] = d.sources;
  if (d.kind == Dataset::Kind::Discrete) {
    j["alphabet"] = d.alphabet;
    j["id_to_byte"] = d.id_to_byte;
    json tr = json::array(), te = json::array();
    for (const auto& s : d.train_d) tr.push_back(seq_to_json(s));
    for (const auto& s : d.test_d) te.push_back(seq_to_json(s));
    j["train"] = std::move(tr);
    j["test"] = std::move(te);
  } else {
    j["features"] = d.feat_dim;
    json mean = json::array(), stdev = json::array();
    for (Eigen::Index i = 0; i < d.mean.size(); ++i) mean.push_back(d.mean[i]);
    for (Eigen::Index i = 0; i < d.stdev.size(); ++i) stdev.push_back(d.stdev[i]);
    j["mean"] = std::move(mean);
    j["stdev"] = std::move(stdev);
    json tr = json::array(), te = json::array();
    for (const auto& s : d.train_c) tr.push_back(mat_to_json(s));
    for (const auto& s : d.test_c) te.push_back(mat_to_json(s));
    j["train"] = std::move(tr);
    j["test"] = std::move(te);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_dataset: cannot write " + path);
  out << j.dump();
  if (!out) throw IoError("save_dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_dataset: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("load_dataset: " + std::string(e.what()));
  }
  Dataset d;
  try {
    const std::string kind = j.at("kind").get<std::string>();
    d.split_fraction = j.at("split_fraction").get<double>();
    d.sources = j.at("sources").get<std::vector<std::string>>();
    if (kind == "discrete") {
      d.kind = Dataset::Kind::Discrete;
      d.alphabet = j.at("alphabet").get<int>();
      d.id_to_byte = j.at("id_to_byte").get<std::vector<unsigned char>>();
      for (const auto& s : j.at("train")) d.train_d.push_back(s.get<std::vector<int>>());
      for (const auto& s : j.at("test")) d.test_d.push_back(s.get<std::vector<int>>());
    } else if (kind == "continuous") {
      d.kind = Dataset::Kind::Continuous;
      d.feat_dim = j.at("features").get<int>();
      auto mean = j.at("mean").get<std::vector<double>>();
      auto stdev = j.at("stdev").get<std::vector<double>>();
      d.mean = Eigen::Map<const VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
      d.stdev = Eigen::Map<const VectorXd>(stdev.data(), static_cast<Eigen::Index>(stdev.size()));
      for (const auto& s : j.at("train")) d.train_c.push_back(mat_from_json(s));
      for (const auto& s : j.at("test")) d.test_c.push_back(mat_from_json(s));
    } else {
      throw IoError("load_dataset: unknown kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw IoError("load_dataset: " + std::string(e.what()));
  }
  return d;
}

}  // namespace psrnn
