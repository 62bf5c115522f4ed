#include "hjlab/model.hpp"

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

void check_shape(const Dense& m, int rows, int cols, const char* what) {
  if (m.rows != rows || m.cols != cols) {
    std::ostringstream os;
    os << what << " must be " << rows << " x " << cols << ", got " << m.rows << " x " << m.cols;
    throw UsageError(os.str());
  }
}

}  // namespace

PriorSpec make_prior(int D, std::vector<std::vector<double>> support, std::vector<double> weights) {
  if (D < 1 || D > kMaxDim) throw ConfigError("prior: D must be in [1, 8]");
  if (support.empty()) throw ConfigError("prior: empty support");
  if (support.size() != weights.size()) throw ConfigError("prior: support and weights differ in length");
  double total = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    if (static_cast<int>(support[i].size()) != D) {
      throw ConfigError("prior: support point " + std::to_string(i) + " does not have D entries");
    }
    for (double v : support[i]) {
      if (!(v >= -1.0 && v <= 1.0)) {
        throw ConfigError("prior: support entry " + std::to_string(v) + " outside [-1, 1]");
      }
    }
    if (!(weights[i] >= 0.0)) throw ConfigError("prior: negative weight");
    total += weights[i];
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "prior: weights sum to " << total << ", expected 1";
    throw ConfigError(os.str());
  }
  return PriorSpec{D, std::move(support), std::move(weights)};
}

PriorSpec rademacher_prior(int D) {
  const int n = 1 << D;
  std::vector<std::vector<double>> support(n, std::vector<double>(D));
  for (int k = 0; k < n; ++k)
    for (int d = 0; d < D; ++d) support[k][d] = ((k >> (D - 1 - d)) & 1) ? 1.0 : -1.0;
  return make_prior(D, std::move(support), std::vector<double>(n, 1.0 / n));
}

std::vector<double> prior_mean(const PriorSpec& prior) {
  std::vector<double> m(prior.D, 0.0);
  for (std::size_t i = 0; i < prior.support.size(); ++i)
    for (int d = 0; d < prior.D; ++d) m[d] += prior.weights[i] * prior.support[i][d];
  return m;
}

SymMatrix prior_second_moment(const PriorSpec& prior) {
  SymMatrix s(prior.D);
  for (int a = 0; a < prior.D; ++a)
    for (int b = a; b < prior.D; ++b) {
      double v = 0.0;
      for (std::size_t i = 0; i < prior.support.size(); ++i)
        v += prior.weights[i] * prior.support[i][a] * prior.support[i][b];
      s.set(a, b, v);
    }
  return s;
}

int ModelSpec::tensor_rows() const { return ipow(N, p()); }

std::size_t ModelSpec::configurations() const {
  std::size_t total = 1;
  const std::size_t k = prior.support.size();
  for (int n = 0; n < N; ++n) {
    if (total > std::numeric_limits<std::size_t>::max() / k) return std::numeric_limits<std::size_t>::max();
    total *= k;
  }
  return total;
}

ModelSpec make_model(PriorSpec prior, InteractionSpec interaction, int N) {
  if (N < 1) throw ConfigError("model: N must be >= 1");
  if (prior.D != interaction.D) {
    throw ConfigError("model: prior D=" + std::to_string(prior.D) + " but interaction D=" +
                      std::to_string(interaction.D));
  }
  return ModelSpec{std::move(prior), std::move(interaction), N};
}

DisorderSample sample_disorder(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  const int D = spec.D();
  DisorderSample d{Dense(spec.N, D), Dense(spec.tensor_rows(), spec.L()), Dense(spec.N, D)};
  for (int n = 0; n < spec.N; ++n) {
    const double u = unif(rng);
    double acc = 0.0;
    std::size_t pick = spec.prior.support.size() - 1;
    for (std::size_t i = 0; i < spec.prior.support.size(); ++i) {
      acc += spec.prior.weights[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    for (int a = 0; a < D; ++a) d.X(n, a) = spec.prior.support[pick][a];
  }
  for (double& v : d.W.data) v = normal(rng);
  for (double& v : d.Z.data) v = normal(rng);
  return d;
}

Dense signal_tensor(const ModelSpec& spec, const Dense& x) {
  check_shape(x, spec.N, spec.D(), "signal");
  const int p = spec.p();
  const int D = spec.D();
  const int rows = spec.tensor_rows();
  const int drows = spec.interaction.tensor_rows();
  const Dense& A = spec.interaction.A;
  Dense out(rows, spec.L());
  std::vector<int> iv(p), dv(p);
  for (int i = 0; i < rows; ++i) {
    int rem = i;
    for (int k = p - 1; k >= 0; --k) {
      iv[k] = rem % spec.N;
      rem /= spec.N;
    }
    for (int d = 0; d < drows; ++d) {
      int r2 = d;
      double prod = 1.0;
      for (int k = p - 1; k >= 0; --k) {
        dv[k] = r2 % D;
        r2 /= D;
        prod *= x(iv[k], dv[k]);
      }
      if (prod == 0.0) continue;
      for (int l = 0; l < spec.L(); ++l) out(i, l) += prod * A(d, l);
    }
  }
  return out;
}

double hamiltonian(const ModelSpec& spec, double t, const ConePoint& h, const Dense& x,
                   const DisorderSample& d) {
  if (t < 0.0) throw UsageError("hamiltonian: t must be nonnegative");
  if (h.dim() != spec.D()) throw UsageError("hamiltonian: h has the wrong dimension");
  check_shape(d.X, spec.N, spec.D(), "X");
  check_shape(d.W, spec.tensor_rows(), spec.L(), "W");
  check_shape(d.Z, spec.N, spec.D(), "Z");
  const int D = spec.D();
  const double scale = std::pow(double(spec.N), double(spec.p() - 1));
  const double c = std::sqrt(2.0 * t / scale);
  const Dense xt = signal_tensor(spec, x);
  const Dense Xt = signal_tensor(spec, d.X);
  const SymMatrix s = sqrt_psd(ConePoint(2.0 * h.matrix())).matrix();

  double tensor_term = 0.0;
  for (std::size_t k = 0; k < xt.size(); ++k) tensor_term += xt.data[k] * (c * Xt.data[k] + d.W.data[k]);
  const double tensor_sq = frobenius_sq(xt);

  // Ybar = X sqrt(2h) + Z
  Dense ybar(spec.N, D);
  for (int n = 0; n < spec.N; ++n)
    for (int b = 0; b < D; ++b) {
      double v = d.Z(n, b);
      for (int a = 0; a < D; ++a) v += d.X(n, a) * s(a, b);
      ybar(n, b) = v;
    }
  double field = 0.0, self = 0.0;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) {
      double xy = 0.0, xx = 0.0;
      for (int n = 0; n < spec.N; ++n) {
        xy += x(n, a) * ybar(n, b);
        xx += x(n, a) * x(n, b);
      }
      field += s(a, b) * xy;
      self += h.matrix()(a, b) * xx;
    }
  return c * tensor_term - (t / scale) * tensor_sq + field - self;
}

ConfigTable::ConfigTable(const ModelSpec& spec) : spec_(spec) {
  count_ = spec.configurations();
  if (count_ > kMaxConfigurations) {
    std::ostringstream os;
    os << "exact enumeration needs " << spec.prior.support.size() << "^" << spec.N
       << " configurations, above the limit of " << kMaxConfigurations
       << "; reduce N or use a smaller support";
    throw CapacityError(os.str());
  }
  nd_ = spec.signal_size();
  nt_ = spec.tensor_size();
  const double bytes = double(count_) * double(nd_ + nt_ + 2) * sizeof(double);
  if (bytes > 2e9) throw CapacityError("configuration table would need more than 2 GB");
  x_.resize(count_ * nd_);
  tensor_.resize(count_ * nt_);
  tensor_sq_.resize(count_);
  log_prior_.resize(count_);

  const std::size_t k = spec.prior.support.size();
  const int D = spec.D();
  Dense x(spec.N, D);
  for (std::size_t c = 0; c < count_; ++c) {
    std::size_t rem = c;
    double lp = 0.0;
    for (int n = spec.N - 1; n >= 0; --n) {
      const std::size_t digit = rem % k;
      rem /= k;
      for (int a = 0; a < D; ++a) x(n, a) = spec.prior.support[digit][a];
      lp += std::log(spec.prior.weights[digit]);
    }
    std::copy(x.data.begin(), x.data.end(), x_.begin() + c * nd_);
    const Dense t = signal_tensor(spec, x);
    std::copy(t.data.begin(), t.data.end(), tensor_.begin() + c * nt_);
    tensor_sq_[c] = frobenius_sq(t);
    log_prior_[c] = lp;
  }
}

std::size_t ConfigTable::index_of(const Dense& X) const {
  check_shape(X, spec_.N, spec_.D(), "X");
  const std::size_t k = spec_.prior.support.size();
  std::size_t c = 0;
  for (int n = 0; n < spec_.N; ++n) {
    std::size_t found = k;
    for (std::size_t i = 0; i < k && found == k; ++i) {
      bool eq = true;
      for (int a = 0; a < spec_.D(); ++a) eq = eq && spec_.prior.support[i][a] == X(n, a);
      if (eq) found = i;
    }
    if (found == k) throw UsageError("signal row " + std::to_string(n) + " is not a support point");
    c = c * k + found;
  }
  return c;
}

}  // namespace hjlab
