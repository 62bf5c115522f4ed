#include "hjlab/nonlinearity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "hjlab/errors.hpp"

namespace hjlab {

namespace {

int ipow(int base, int e) {
  int r = 1;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

// digits[idx * p + i] = i-th factor index of multi-index idx.
std::vector<int> multi_index_digits(int D, int p) {
  const int n = ipow(D, p);
  std::vector<int> digits(std::size_t(n) * p);
  for (int idx = 0; idx < n; ++idx) {
    int rem = idx;
    for (int i = p - 1; i >= 0; --i) {
      digits[std::size_t(idx) * p + i] = rem % D;
      rem /= D;
    }
  }
  return digits;
}

void check_q(const InteractionSpec& spec, const SymMatrix& q) {
  if (q.dim() != spec.D) {
    throw UsageError("nonlinearity: q has dimension " + std::to_string(q.dim()) +
                     ", interaction expects " + std::to_string(spec.D));
  }
}

}  // namespace

InteractionSpec make_interaction(int D, int p, const Dense& A, const std::optional<Dense>& declared_gram) {
  if (D < 1 || D > kMaxDim) throw ConfigError("interaction: D must be in [1, 8]");
  if (p < 1 || p > 4) throw ConfigError("interaction: p must be in [1, 4]");
  const long rows = std::lround(std::pow(double(D), double(p)));
  if (rows > kMaxTensorSize) {
    throw ConfigError("interaction: D^p = " + std::to_string(rows) + " exceeds " +
                      std::to_string(kMaxTensorSize));
  }
  if (A.rows != rows || A.cols < 1) {
    std::ostringstream os;
    os << "interaction: A must be " << rows << " x L with L >= 1, got " << A.rows << " x " << A.cols;
    throw ConfigError(os.str());
  }
  InteractionSpec s;
  s.D = D;
  s.p = p;
  s.L = A.cols;
  s.A = A;
  s.gram = Dense(int(rows), int(rows));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < rows; ++j) {
      double v = 0.0;
      for (int l = 0; l < A.cols; ++l) v += A(i, l) * A(j, l);
      s.gram(i, j) = v;
    }
  if (declared_gram) {
    if (declared_gram->rows != rows || declared_gram->cols != rows) {
      throw ConfigError("interaction: declared gram has the wrong shape");
    }
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < rows; ++j)
        if (std::abs((*declared_gram)(i, j) - s.gram(i, j)) > 1e-12) {
          std::ostringstream os;
          os << "interaction: declared gram differs from A A^T at (" << i << "," << j
             << "): " << (*declared_gram)(i, j) << " vs " << s.gram(i, j);
          throw ConfigError(os.str());
        }
  }
  return s;
}

double h_value(const InteractionSpec& spec, const SymMatrix& q) {
  check_q(spec, q);
  const int n = spec.tensor_rows();
  const int p = spec.p;
  const std::vector<int> dig = multi_index_digits(spec.D, p);
  double total = 0.0;
  for (int d = 0; d < n; ++d) {
    const int* a = &dig[std::size_t(d) * p];
    for (int e = 0; e < n; ++e) {
      const double g = spec.gram(d, e);
      if (g == 0.0) continue;
      const int* b = &dig[std::size_t(e) * p];
      double prod = g;
      for (int i = 0; i < p; ++i) prod *= q(a[i], b[i]);
      total += prod;
    }
  }
  return total;
}

SymMatrix h_grad(const InteractionSpec& spec, const SymMatrix& q) {
  check_q(spec, q);
  const int n = spec.tensor_rows();
  const int p = spec.p;
  const int D = spec.D;
  const std::vector<int> dig = multi_index_digits(D, p);
  std::vector<double> G(std::size_t(D) * D, 0.0);
  std::vector<double> prefix(p + 1), suffix(p + 1);
  for (int d = 0; d < n; ++d) {
    const int* a = &dig[std::size_t(d) * p];
    for (int e = 0; e < n; ++e) {
      const double g = spec.gram(d, e);
      if (g == 0.0) continue;
      const int* b = &dig[std::size_t(e) * p];
      prefix[0] = 1.0;
      for (int i = 0; i < p; ++i) prefix[i + 1] = prefix[i] * q(a[i], b[i]);
      suffix[p] = 1.0;
      for (int i = p - 1; i >= 0; --i) suffix[i] = suffix[i + 1] * q(a[i], b[i]);
      for (int k = 0; k < p; ++k) G[std::size_t(a[k]) * D + b[k]] += g * prefix[k] * suffix[k + 1];
    }
  }
  SymMatrix out(D);
  for (int i = 0; i < D; ++i)
    for (int j = i; j < D; ++j) out.set(i, j, 0.5 * (G[std::size_t(i) * D + j] + G[std::size_t(j) * D + i]));
  return out;
}

SymMatrix random_wishart(int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> g(std::size_t(dim) * dim);
  for (double& v : g) v = normal(rng);
  SymMatrix w(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) {
      double s = 0.0;
      for (int k = 0; k < dim; ++k) s += g[std::size_t(i) * dim + k] * g[std::size_t(j) * dim + k];
      w.set(i, j, s / dim);
    }
  return w;
}

ProbeReport cone_monotone_check(const InteractionSpec& spec, int samples, std::uint64_t seed) {
  if (samples < 1) throw UsageError("cone_monotone_check: samples must be >= 1");
  ProbeReport r;
  r.samples = samples;
  for (int i = 0; i < samples; ++i) {
    const SymMatrix q = random_wishart(spec.D, seed + std::uint64_t(i));
    const double lo = min_eigenvalue(h_grad(spec, q));
    r.worst = std::min(r.worst, lo);
    if (lo < -1e-10) ++r.failures;
  }
  r.passed = r.failures == 0;
  return r;
}

ProbeReport convexity_probe(const InteractionSpec& spec, int samples, std::uint64_t seed) {
  if (samples < 1) throw UsageError("convexity_probe: samples must be >= 1");
  ProbeReport r;
  r.samples = samples;
  r.worst = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    const std::uint64_t s = seed + 2 * std::uint64_t(i);
    const SymMatrix q = random_wishart(spec.D, s);
    const SymMatrix q2 = random_wishart(spec.D, s + 1);
    const double excess = h_value(spec, 0.5 * (q + q2)) - 0.5 * (h_value(spec, q) + h_value(spec, q2));
    r.worst = std::max(r.worst, excess);
    if (excess > 1e-10) ++r.failures;
  }
  r.passed = r.failures == 0;
  return r;
}

LipschitzEstimate estimate_lipschitz(const InteractionSpec& spec, const GradientOracle& psi_grad,
                                     double radius, int samples, std::uint64_t seed) {
  if (samples < 2) throw UsageError("estimate_lipschitz: need at least 2 samples");
  if (!(radius > 0.0)) throw UsageError("estimate_lipschitz: radius must be positive");
  const int D = spec.D;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  auto random_point = [&](double max_norm, std::uint64_t s) {
    SymMatrix w = random_wishart(D, s);
    const double n = norm(w);
    if (n == 0.0) return SymMatrix(D);
    return w * (max_norm * unif(rng) / n);
  };
  auto map = [&](const SymMatrix& h) { return h_grad(spec, psi_grad(h)); };

  LipschitzEstimate est;
  est.samples = samples;
  est.region_radius = radius;
  est.pair_a = SymMatrix(D);
  est.pair_b = SymMatrix(D);
  for (int i = 0; i < samples; ++i) {
    const std::uint64_t s = seed + 1000003ULL * std::uint64_t(i + 1);
    SymMatrix a(D), b(D);
    if (i % 2 == 0) {
      a = random_point(radius, s);
      b = random_point(radius, s + 1);
    } else {
      const double delta = 1e-4 * std::pow(100.0, unif(rng));
      const double room = std::max(radius - delta, 0.0);
      // The first near pair starts at the apex of the cone.
      a = (i == 1) ? SymMatrix(D) : random_point(room, s);
      SymMatrix dir = random_wishart(D, s + 1);
      const double dn = norm(dir);
      if (dn == 0.0) dir = SymMatrix::identity(D) * (1.0 / std::sqrt(double(D)));
      else dir *= 1.0 / dn;
      b = a + dir * delta;
    }
    const double dist = norm(a - b);
    if (dist < 1e-4 * 0.999) continue;
    const double q = norm(map(a) - map(b)) / dist;
    if (q > est.L_hat) {
      est.L_hat = q;
      est.pair_a = a;
      est.pair_b = b;
    }
  }
  return est;
}

}  // namespace hjlab
