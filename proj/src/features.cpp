#include "psrnn/features.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace psrnn {

VectorXd one_hot(int sym, int alphabet) {
  if (sym < 0 || sym >= alphabet)
    throw DimensionMismatch("one_hot: symbol " + std::to_string(sym) +
                            " outside alphabet of size " + std::to_string(alphabet));
  VectorXd v = VectorXd::Zero(alphabet);
  v[sym] = 1.0;
  return v;
}

double fit_bandwidth(const MatrixXd& points, std::uint64_t seed) {
  const long n = points.rows();
  if (n < 2) throw DegenerateSample("fit_bandwidth: need at least two points");

  constexpr long kCap = 2000;
  MatrixXd sub;
  if (n > kCap) {
    // Partial Fisher-Yates draw of kCap distinct indices.
    std::vector<long> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (long i = 0; i < kCap; ++i) {
      std::uniform_int_distribution<long> d(i, n - 1);
      std::swap(idx[i], idx[d(rng)]);
    }
    sub.resize(kCap, points.cols());
    for (long i = 0; i < kCap; ++i) sub.row(i) = points.row(idx[i]);
  } else {
    sub = points;
  }

  const long m = sub.rows();
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(m) * (m - 1) / 2);
  for (long i = 0; i < m; ++i)
    for (long j = i + 1; j < m; ++j) d2.push_back((sub.row(i) - sub.row(j)).squaredNorm());

  std::sort(d2.begin(), d2.end());
  const std::size_t half = d2.size() / 2;
  double med;
  if (d2.size() % 2 == 1)
    med = d2[half];
  else
    med = 0.5 * (d2[half - 1] + d2[half]);
  const double sigma = std::sqrt(med);
  if (!(sigma > 0.0))
    throw DegenerateSample("fit_bandwidth: zero median pairwise distance");
  return sigma;
}

RffMap sample_rff(int d_in, int D, double sigma, std::uint64_t seed) {
  if (d_in < 1 || D < 1) throw DimensionMismatch("sample_rff: dimensions must be positive");
  if (!(sigma > 0.0)) throw DegenerateSample("sample_rff: bandwidth must be positive");
  RffMap m;
  m.sigma = sigma;
  m.scale = std::sqrt(2.0 / D);
  m.frequencies.resize(D, d_in);
  m.phases.resize(D);
  Rng rng(seed);
  std::normal_distribution<double> N(0.0, 1.0 / sigma);
  for (int r = 0; r < D; ++r)
    for (int c = 0; c < d_in; ++c) m.frequencies(r, c) = N(rng);
  std::uniform_real_distribution<double> U(0.0, 2.0 * M_PI);
  for (int r = 0; r < D; ++r) m.phases[r] = U(rng);
  return m;
}

VectorXd apply_rff(const RffMap& m, const VectorXd& x) {
  if (x.size() != m.in_dim())
    throw DimensionMismatch("apply_rff: input dimension mismatch");
  return m.scale * (m.frequencies * x + m.phases).array().cos().matrix();
}

MatrixXd apply_rff(const RffMap& m, const MatrixXd& X) {
  if (X.cols() != m.in_dim())
    throw DimensionMismatch("apply_rff: input dimension mismatch");
  const long n = X.rows();
  MatrixXd out(n, m.out_dim());
#ifdef _OPENMP
#pragma omp parallel for if (n * m.out_dim() > 32768) schedule(static)
#endif
  for (long i = 0; i < n; ++i)
    out.row(i) =
        (m.scale *
         (m.frequencies * X.row(i).transpose() + m.phases).array().cos())
            .transpose();
  return out;
}

namespace ref {
MatrixXd apply_rff(const RffMap& m, const MatrixXd& X) {
  const long n = X.rows();
  const int D = m.out_dim(), d = m.in_dim();
  MatrixXd out(n, D);
  for (long i = 0; i < n; ++i)
    for (int r = 0; r < D; ++r) {
      double a = m.phases[r];
      for (int c = 0; c < d; ++c) a += m.frequencies(r, c) * X(i, c);
      out(i, r) = m.scale * std::cos(a);
    }
  return out;
}
}  // namespace ref

Projection fit_projection(const MatrixXd& F, int d_out, Warnings* warn) {
  if (F.rows() == 0) throw EmptyData("fit_projection: no rows");
  if (d_out < 1 || d_out > F.cols())
    throw DimensionMismatch("fit_projection: output dimension out of range");
  Projection p;
  p.mean = F.colwise().mean();
  MatrixXd centered = F.rowwise() - p.mean.transpose();
  Eigen::BDCSVD<MatrixXd> svd(centered, Eigen::ComputeThinV);
  const VectorXd& s = svd.singularValues();
  p.basis = svd.matrixV().leftCols(d_out).transpose();
  if (s.size() < d_out || s[d_out - 1] <= 1e-10 * std::max(1.0, s[0])) {
    p.rank_deficient = true;
    if (warn)
      warn->add("fit_projection: feature matrix rank below requested dimension " +
                std::to_string(d_out));
  }
  return p;
}

VectorXd project(const Projection& p, const VectorXd& x) {
  if (x.size() != p.in_dim())
    throw DimensionMismatch("project: input dimension mismatch");
  return p.basis * (x - p.mean);
}

MatrixXd project(const Projection& p, const MatrixXd& X) {
  if (X.cols() != p.in_dim())
    throw DimensionMismatch("project: input dimension mismatch");
  return (X.rowwise() - p.mean.transpose()) * p.basis.transpose();
}

VectorXd augment_constant(const VectorXd& x, double c) {
  VectorXd out(x.size() + 1);
  out.head(x.size()) = x;
  out[x.size()] = c;
  return out;
}

VectorXd stack_window(const MatrixXd& seq, long first, int len) {
  const int d = static_cast<int>(seq.cols());
  VectorXd out(static_cast<Eigen::Index>(len) * d);
  for (int i = 0; i < len; ++i) out.segment(static_cast<Eigen::Index>(i) * d, d) = seq.row(first + i);
  return out;
}

VectorXd StreamEncoder::encode(const VectorXd& window) const {
  return project(proj, apply_rff(rff, window));
}

namespace {

template <typename EmitFn>
void walk_windows(long T, const WindowSpec& w, EmitFn&& emit) {
  // Valid positions: the past window o_{t-p..t-1} and the future window
  // o_{t..t+k-1} must both fit, i.e. p <= t <= T-k (0-based).
  for (long t = w.past_len; t + w.future_len <= T; ++t)
    emit(t, /*has_next=*/t + 1 + w.future_len <= T);
}

}  // namespace

TripleSet build_triples(const std::vector<std::vector<int>>& seqs, int alphabet,
                        const WindowSpec& w) {
  if (w.past_len < 1 || w.future_len < 1)
    throw DimensionMismatch("build_triples: window lengths must be >= 1");
  if (seqs.empty()) throw EmptyData("build_triples: no sequences");
  const long min_len = static_cast<long>(w.past_len) + w.future_len;
  long n = 0;
  for (const auto& s : seqs) {
    if (static_cast<long>(s.size()) < min_len)
      throw SequenceTooShort("build_triples: sequence of length " +
                             std::to_string(s.size()) + " shorter than p+k = " +
                             std::to_string(min_len));
    n += static_cast<long>(s.size()) - w.past_len - w.future_len + 1;
  }

  const int d_h = w.past_len * alphabet;
  const int d_f = w.future_len * alphabet;
  TripleSet ts;
  ts.n = n;
  ts.eta = MatrixXd::Zero(n, d_h);
  ts.omega = MatrixXd::Zero(n, alphabet);
  ts.phi = MatrixXd::Zero(n, d_f);
  ts.phi_next = MatrixXd::Zero(n, d_f);
  ts.has_next.assign(static_cast<std::size_t>(n), 0);

  long row = 0;
  for (const auto& s : seqs) {
    const long T = static_cast<long>(s.size());
    walk_windows(T, w, [&](long t, bool next) {
      for (int i = 0; i < w.past_len; ++i) {
        const int sym = s[t - w.past_len + i];
        if (sym < 0 || sym >= alphabet)
          throw DimensionMismatch("build_triples: symbol outside alphabet");
        ts.eta(row, i * alphabet + sym) = 1.0;
      }
      ts.omega(row, s[t]) = 1.0;
      for (int i = 0; i < w.future_len; ++i)
        ts.phi(row, i * alphabet + s[t + i]) = 1.0;
      if (next) {
        for (int i = 0; i < w.future_len; ++i)
          ts.phi_next(row, i * alphabet + s[t + 1 + i]) = 1.0;
        ts.has_next[row] = 1;
      }
      ++row;
    });
  }
  return ts;
}

TripleSet build_triples(const std::vector<MatrixXd>& seqs, const WindowSpec& w,
                        const StreamEncoder& hist, const StreamEncoder& obs,
                        const StreamEncoder& fut) {
  if (w.past_len < 1 || w.future_len < 1)
    throw DimensionMismatch("build_triples: window lengths must be >= 1");
  if (seqs.empty()) throw EmptyData("build_triples: no sequences");
  const long min_len = static_cast<long>(w.past_len) + w.future_len;
  long n = 0;
  for (const auto& s : seqs) {
    if (s.rows() < min_len)
      throw SequenceTooShort("build_triples: trajectory of length " +
                             std::to_string(s.rows()) + " shorter than p+k = " +
                             std::to_string(min_len));
    n += s.rows() - w.past_len - w.future_len + 1;
  }

  TripleSet ts;
  ts.n = n;
  ts.eta.resize(n, hist.out_dim());
  ts.omega.resize(n, obs.out_dim());
  ts.phi.resize(n, fut.out_dim());
  ts.phi_next = MatrixXd::Zero(n, fut.out_dim());
  ts.has_next.assign(static_cast<std::size_t>(n), 0);

  long row = 0;
  for (const auto& s : seqs) {
    walk_windows(s.rows(), w, [&](long t, bool next) {
      ts.eta.row(row) = hist.encode(stack_window(s, t - w.past_len, w.past_len));
      ts.omega.row(row) = obs.encode(stack_window(s, t, 1));
      ts.phi.row(row) = fut.encode(stack_window(s, t, w.future_len));
      if (next) {
        ts.phi_next.row(row) = fut.encode(stack_window(s, t + 1, w.future_len));
        ts.has_next[row] = 1;
      }
      ++row;
    });
  }
  return ts;
}

}  // namespace psrnn
