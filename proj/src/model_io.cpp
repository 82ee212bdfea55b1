#include "psrnn/model_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

namespace psrnn {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'P', 'S', 'R', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& s, double v) { put_u64(s, std::bit_cast<std::uint64_t>(v)); }

struct Cursor {
  const std::string& s;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    if (pos + n > s.size()) throw IoError("model file truncated");
  }
  std::uint16_t u16() {
    need(2);
    auto b = reinterpret_cast<const unsigned char*>(s.data() + pos);
    pos += 2;
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    auto b = reinterpret_cast<const unsigned char*>(s.data() + pos);
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    auto b = reinterpret_cast<const unsigned char*>(s.data() + pos);
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string out = s.substr(pos, n);
    pos += n;
    return out;
  }
};

struct NamedArray {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;
};

void write_header(std::string& out, const std::string& name,
                  std::initializer_list<std::uint64_t> dims) {
  if (name.size() > 0xffff) throw IoError("model array name too long");
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out += name;
  out.push_back(static_cast<char>(dims.size()));
  for (auto d : dims) put_u64(out, d);
}

void write_vec(std::string& out, const std::string& name, const VectorXd& v) {
  write_header(out, name, {static_cast<std::uint64_t>(v.size())});
  for (Eigen::Index i = 0; i < v.size(); ++i) put_f64(out, v[i]);
}

void write_mat(std::string& out, const std::string& name, const MatrixXd& m) {
  write_header(out, name,
               {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())});
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
}

void write_ten(std::string& out, const std::string& name, const Tensor3& t) {
  write_header(out, name,
               {static_cast<std::uint64_t>(t.d1), static_cast<std::uint64_t>(t.d2),
                static_cast<std::uint64_t>(t.d3)});
  for (double x : t.v) put_f64(out, x);  // already row-major
}

std::map<std::string, NamedArray> read_arrays(Cursor& c) {
  std::map<std::string, NamedArray> arrays;
  for (;;) {
    std::uint16_t name_len = c.u16();
    if (name_len == 0) break;
    std::string name = c.bytes(name_len);
    c.need(1);
    int rank = static_cast<unsigned char>(c.s[c.pos++]);
    if (rank < 1 || rank > 3) throw IoError("model array '" + name + "' has bad rank");
    NamedArray a;
    std::uint64_t n = 1;
    for (int i = 0; i < rank; ++i) {
      std::uint64_t d = c.u64();
      if (d == 0 || d > (1ull << 32)) throw IoError("model array '" + name + "' has bad dims");
      a.dims.push_back(d);
      n *= d;
    }
    if (n > (1ull << 32)) throw IoError("model array '" + name + "' is too large");
    a.data.resize(static_cast<std::size_t>(n));
    for (auto& x : a.data) x = c.f64();
    if (!arrays.emplace(std::move(name), std::move(a)).second)
      throw IoError("model file has a duplicate array");
  }
  return arrays;
}

const NamedArray& want(const std::map<std::string, NamedArray>& arrays, const std::string& name,
                       std::size_t rank) {
  auto it = arrays.find(name);
  if (it == arrays.end()) throw IoError("model file is missing array '" + name + "'");
  if (it->second.dims.size() != rank)
    throw IoError("model array '" + name + "' has the wrong rank");
  return it->second;
}

VectorXd as_vec(const NamedArray& a) {
  return Eigen::Map<const VectorXd>(a.data.data(), static_cast<Eigen::Index>(a.dims[0]));
}

MatrixXd as_mat(const NamedArray& a) {
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  return Eigen::Map<const RowMat>(a.data.data(), static_cast<Eigen::Index>(a.dims[0]),
                                  static_cast<Eigen::Index>(a.dims[1]));
}

Tensor3 as_ten(const NamedArray& a) {
  Tensor3 t(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]),
            static_cast<int>(a.dims[2]));
  t.v = a.data;
  return t;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t hash_from_hex(const std::string& s) {
  if (s.size() != 16) throw IoError("model metadata has a bad config_hash");
  std::uint64_t v = 0;
  for (char ch : s) {
    int d;
    if (ch >= '0' && ch <= '9') d = ch - '0';
    else if (ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
    else throw IoError("model metadata has a bad config_hash");
    v = (v << 4) | static_cast<std::uint64_t>(d);
  }
  return v;
}

}  // namespace

std::string serialize_model(const PsrnnModel& m) {
  if (m.layers.empty()) throw IoError("cannot serialize a model with no layers");
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);

  if (m.enc.kind == Encoder::Kind::RffProj) {
    write_mat(out, "encoder.frequencies", m.enc.rff.frequencies);
    write_vec(out, "encoder.phases", m.enc.rff.phases);
    write_mat(out, "encoder.basis", m.enc.proj.basis);
    write_vec(out, "encoder.mean", m.enc.proj.mean);
  }
  for (int i = 0; i < m.n_layers(); ++i) {
    const Layer& l = m.layers[static_cast<std::size_t>(i)];
    const std::string p = "layer" + std::to_string(i) + ".";
    if (l.kind == Layer::Kind::Full) {
      write_ten(out, p + "W", l.full.W);
    } else {
      write_mat(out, p + "A", l.fact.A);
      write_mat(out, p + "B", l.fact.B);
      write_mat(out, p + "C", l.fact.C);
    }
    write_vec(out, p + "b", l.bias());
    write_vec(out, p + "q1", l.q1);
    if (i < static_cast<int>(m.meta.original_bias.size()) &&
        m.meta.original_bias[static_cast<std::size_t>(i)].size() > 0)
      write_vec(out, p + "b_original", m.meta.original_bias[static_cast<std::size_t>(i)]);
  }
  write_mat(out, "decoder.W", m.Wd);
  write_vec(out, "decoder.b", m.bd);
  put_u16(out, 0);

  json meta;
  meta["alphabet"] = m.meta.alphabet;
  json cells = json::array();
  for (const Layer& l : m.layers)
    cells.push_back(l.kind == Layer::Kind::Full ? "full" : "factorized");
  meta["cells"] = cells;
  meta["config_hash"] = hash_hex(m.meta.config_hash);
  meta["kind"] = m.meta.kind;
  meta["layers"] = m.n_layers();
  meta["obs_dim"] = m.meta.obs_dim;
  if (m.enc.kind == Encoder::Kind::RffProj) meta["sigma"] = m.enc.rff.sigma;
  std::string mtext = meta.dump();
  put_u64(out, mtext.size());
  out += mtext;
  return out;
}

PsrnnModel deserialize_model(const std::string& bytes) {
  Cursor c{bytes};
  if (c.bytes(4) != std::string(kMagic, 4)) throw IoError("not a model file (bad magic)");
  std::uint32_t version = c.u32();
  if (version != kVersion)
    throw IoError("unsupported model file version " + std::to_string(version));
  auto arrays = read_arrays(c);
  std::uint64_t meta_len = c.u64();
  std::string mtext = c.bytes(static_cast<std::size_t>(meta_len));
  if (c.pos != bytes.size()) throw IoError("model file has trailing bytes");

  json meta;
  try {
    meta = json::parse(mtext);
  } catch (const json::exception& e) {
    throw IoError("model metadata is not valid JSON: " + std::string(e.what()));
  }

  PsrnnModel m;
  try {
    m.meta.kind = meta.at("kind").get<std::string>();
    m.meta.alphabet = meta.at("alphabet").get<int>();
    m.meta.obs_dim = meta.at("obs_dim").get<int>();
    m.meta.config_hash = hash_from_hex(meta.at("config_hash").get<std::string>());
    int n_layers = meta.at("layers").get<int>();
    auto cells = meta.at("cells");
    if (n_layers < 1 || static_cast<int>(cells.size()) != n_layers)
      throw IoError("model metadata has inconsistent layer structure");

    if (meta.contains("sigma")) {
      m.enc.kind = Encoder::Kind::RffProj;
      m.enc.rff.frequencies = as_mat(want(arrays, "encoder.frequencies", 2));
      m.enc.rff.phases = as_vec(want(arrays, "encoder.phases", 1));
      m.enc.rff.sigma = meta.at("sigma").get<double>();
      m.enc.rff.scale = std::sqrt(2.0 / static_cast<double>(m.enc.rff.out_dim()));
      m.enc.proj.basis = as_mat(want(arrays, "encoder.basis", 2));
      m.enc.proj.mean = as_vec(want(arrays, "encoder.mean", 1));
      if (m.enc.rff.phases.size() != m.enc.rff.frequencies.rows() ||
          m.enc.proj.basis.cols() != m.enc.rff.frequencies.rows() ||
          m.enc.proj.mean.size() != m.enc.rff.frequencies.rows())
        throw IoError("model encoder arrays have inconsistent shapes");
    } else {
      m.enc.kind = Encoder::Kind::OneHot;
      m.enc.alphabet = m.meta.alphabet;
    }

    bool any_original = false;
    m.meta.original_bias.assign(static_cast<std::size_t>(n_layers), VectorXd());
    for (int i = 0; i < n_layers; ++i) {
      const std::string p = "layer" + std::to_string(i) + ".";
      Layer l;
      std::string ck = cells[static_cast<std::size_t>(i)].get<std::string>();
      if (ck == "full") {
        l.kind = Layer::Kind::Full;
        l.full.W = as_ten(want(arrays, p + "W", 3));
      } else if (ck == "factorized") {
        l.kind = Layer::Kind::Factorized;
        l.fact.A = as_mat(want(arrays, p + "A", 2));
        l.fact.B = as_mat(want(arrays, p + "B", 2));
        l.fact.C = as_mat(want(arrays, p + "C", 2));
        if (l.fact.B.rows() != l.fact.A.rows() || l.fact.C.rows() != l.fact.A.rows())
          throw IoError("model array '" + p + "' factors disagree on rank");
      } else {
        throw IoError("model metadata has unknown cell kind '" + ck + "'");
      }
      l.bias() = as_vec(want(arrays, p + "b", 1));
      l.q1 = as_vec(want(arrays, p + "q1", 1));
      if (l.bias().size() != l.state_dim() || l.q1.size() != l.state_dim())
        throw IoError("model layer " + std::to_string(i) + " arrays have inconsistent shapes");
      if (auto it = arrays.find(p + "b_original"); it != arrays.end()) {
        if (it->second.dims.size() != 1)
          throw IoError("model array '" + p + "b_original' has the wrong rank");
        m.meta.original_bias[static_cast<std::size_t>(i)] = as_vec(it->second);
        any_original = true;
      }
      m.layers.push_back(std::move(l));
    }
    if (!any_original) m.meta.original_bias.clear();

    m.Wd = as_mat(want(arrays, "decoder.W", 2));
    m.bd = as_vec(want(arrays, "decoder.b", 1));
    if (m.bd.size() != m.Wd.rows() || m.Wd.cols() != m.top_dim())
      throw IoError("model decoder arrays have inconsistent shapes");
  } catch (const json::exception& e) {
    throw IoError("model metadata is malformed: " + std::string(e.what()));
  }
  return m;
}

void save_model(const PsrnnModel& m, const std::string& path) {
  std::string bytes = serialize_model(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path);
}

PsrnnModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace psrnn
