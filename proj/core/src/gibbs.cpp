#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "hjlab/errors.hpp"
#include "hjlab/model.hpp"

namespace hjlab {

Channel::Channel(std::shared_ptr<const ConfigTable> table, double t, const ConePoint& h)
    : table_(std::move(table)), t_(t), h_(h) {
  const ModelSpec& spec = table_->spec();
  if (!(t >= 0.0)) throw UsageError("channel: t must be nonnegative");
  if (h.dim() != spec.D()) throw UsageError("channel: h has the wrong dimension");
  const int D = spec.D();
  const int N = spec.N;
  sqrt2h_ = sqrt_psd(ConePoint(2.0 * h.matrix())).matrix();
  c_ = std::sqrt(2.0 * t / std::pow(double(N), double(spec.p() - 1)));
  dims_ = gaussian_dims();
  const std::size_t count = table_->size();
  mu_.assign(count * dims_, 0.0);
  mu_sq_.assign(count, 0.0);
  const int nt = tensor_dims();
  for (std::size_t c = 0; c < count; ++c) {
    double* mu = mu_.data() + c * dims_;
    double sq = 0.0;
    if (nt > 0) {
      const auto tv = table_->tensor(c);
      for (int k = 0; k < nt; ++k) {
        mu[k] = c_ * tv[k];
        sq += mu[k] * mu[k];
      }
    }
    const auto x = table_->x(c);
    for (int n = 0; n < N; ++n)
      for (int b = 0; b < D; ++b) {
        double v = 0.0;
        for (int a = 0; a < D; ++a) v += x[n * D + a] * sqrt2h_(a, b);
        mu[nt + n * D + b] = v;
        sq += v * v;
      }
    mu_sq_[c] = sq;
  }
  if (h.interior()) {
    dsqrt_basis_.reserve(std::size_t(D) * D);
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        SymMatrix e(D);
        e.set(a, b, a == b ? 1.0 : 0.5);
        dsqrt_basis_.push_back(dsqrt(h, e));
      }
  }
}

std::vector<double> Channel::observation(const DisorderSample& d) const {
  const ModelSpec& spec = this->spec();
  const std::size_t truth = table_->index_of(d.X);
  std::vector<double> noise;
  noise.reserve(dims_);
  if (has_tensor_block()) noise.insert(noise.end(), d.W.data.begin(), d.W.data.end());
  if (d.Z.rows != spec.N || d.Z.cols != spec.D()) throw UsageError("observation: Z has the wrong shape");
  noise.insert(noise.end(), d.Z.data.begin(), d.Z.data.end());
  std::vector<double> y(dims_);
  observation(truth, noise, y);
  return y;
}

void Channel::observation(std::size_t truth, std::span<const double> noise, std::span<double> y) const {
  const auto mu = mean(truth);
  for (int k = 0; k < dims_; ++k) y[k] = mu[k] + noise[k];
}

Posterior::Posterior(const Channel& channel) : ch_(&channel) {
  y_.assign(channel.gaussian_dims(), 0.0);
  w_.assign(channel.table().size(), 0.0);
}

Posterior::Posterior(const Channel& channel, std::span<const double> y) : Posterior(channel) { assign(y); }

void Posterior::assign(std::span<const double> y) {
  const int dims = ch_->gaussian_dims();
  if (static_cast<int>(y.size()) != dims) throw UsageError("posterior: observation has the wrong length");
  std::copy(y.begin(), y.end(), y_.begin());
  const ConfigTable& table = ch_->table();
  const std::size_t count = table.size();
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < count; ++c) {
    const auto mu = ch_->mean(c);
    double dot = 0.0;
    for (int k = 0; k < dims; ++k) dot += mu[k] * y[k];
    const double lw = table.log_prior(c) + dot - 0.5 * ch_->mean_sq(c);
    w_[c] = lw;
    mx = std::max(mx, lw);
  }
  if (!std::isfinite(mx)) throw NumericError("posterior: no configuration has finite weight");
  double s = 0.0;
  for (std::size_t c = 0; c < count; ++c) {
    w_[c] = std::exp(w_[c] - mx);
    s += w_[c];
  }
  const double inv = 1.0 / s;
  for (double& v : w_) v *= inv;
  log_z_ = mx + std::log(s);
  have_mean_ = have_tensor_ = have_second_ = false;
}

const std::vector<double>& Posterior::mean_x() const {
  if (!have_mean_) {
    const ConfigTable& table = ch_->table();
    mean_.assign(table.signal_size(), 0.0);
    for (std::size_t c = 0; c < table.size(); ++c) {
      const double w = w_[c];
      const auto x = table.x(c);
      for (std::size_t k = 0; k < x.size(); ++k) mean_[k] += w * x[k];
    }
    have_mean_ = true;
  }
  return mean_;
}

const std::vector<double>& Posterior::mean_tensor() const {
  if (!have_tensor_) {
    const ConfigTable& table = ch_->table();
    tensor_mean_.assign(table.tensor_size(), 0.0);
    for (std::size_t c = 0; c < table.size(); ++c) {
      const double w = w_[c];
      const auto x = table.tensor(c);
      for (std::size_t k = 0; k < x.size(); ++k) tensor_mean_[k] += w * x[k];
    }
    have_tensor_ = true;
  }
  return tensor_mean_;
}

double Posterior::mean_tensor_sq() const {
  double s = 0.0;
  for (double v : mean_tensor()) s += v * v;
  return s;
}

const std::vector<double>& Posterior::second_moment() const {
  if (!have_second_) {
    const ConfigTable& table = ch_->table();
    const int nd = table.signal_size();
    second_.assign(std::size_t(nd) * nd, 0.0);
    for (std::size_t c = 0; c < table.size(); ++c) {
      const double w = w_[c];
      const auto x = table.x(c);
      for (int i = 0; i < nd; ++i) {
        const double wx = w * x[i];
        for (int j = i; j < nd; ++j) second_[std::size_t(i) * nd + j] += wx * x[j];
      }
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < i; ++j) second_[std::size_t(i) * nd + j] = second_[std::size_t(j) * nd + i];
    have_second_ = true;
  }
  return second_;
}

SymMatrix Posterior::replica_overlap() const {
  const int D = ch_->spec().D();
  const int N = ch_->spec().N;
  const auto& m = mean_x();
  SymMatrix r(D);
  for (int a = 0; a < D; ++a)
    for (int b = a; b < D; ++b) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) s += m[n * D + a] * m[n * D + b];
      r.set(a, b, s / N);
    }
  return r;
}

SymMatrix Posterior::mean_xtx() const {
  const int D = ch_->spec().D();
  const int N = ch_->spec().N;
  const int nd = N * D;
  const auto& S = second_moment();
  SymMatrix r(D);
  for (int a = 0; a < D; ++a)
    for (int b = a; b < D; ++b) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) s += S[std::size_t(n * D + a) * nd + n * D + b];
      r.set(a, b, s);
    }
  return r;
}

Dense Posterior::overlap_mean(std::size_t truth) const {
  const int D = ch_->spec().D();
  const int N = ch_->spec().N;
  const auto X = ch_->table().x(truth);
  const auto& m = mean_x();
  Dense q(D, D);
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) s += X[n * D + a] * m[n * D + b];
      q(a, b) = s / N;
    }
  return q;
}

double Posterior::overlap_abs_dev(std::size_t truth, const Dense& center) const {
  const int D = ch_->spec().D();
  const int N = ch_->spec().N;
  if (center.rows != D || center.cols != D) throw UsageError("overlap_abs_dev: center must be D x D");
  const ConfigTable& table = ch_->table();
  const auto X = table.x(truth);
  double total = 0.0;
  for (std::size_t c = 0; c < table.size(); ++c) {
    if (w_[c] == 0.0) continue;
    const auto x = table.x(c);
    double sq = 0.0;
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        double s = 0.0;
        for (int n = 0; n < N; ++n) s += X[n * D + a] * x[n * D + b];
        const double d = s / N - center(a, b);
        sq += d * d;
      }
    total += w_[c] * std::sqrt(sq);
  }
  return total;
}

NishimoriMoments Posterior::nishimori(std::size_t truth) const {
  const int D = ch_->spec().D();
  const int N = ch_->spec().N;
  const int nd = N * D;
  const ConfigTable& table = ch_->table();
  const auto X = table.x(truth);
  const auto& m = mean_x();
  const auto& S = second_moment();
  auto s_at = [&](int n, int a, int k, int b) { return S[std::size_t(n * D + a) * nd + k * D + b]; };

  NishimoriMoments mom;
  mom.q_mean = overlap_mean(truth);
  mom.r_mean = replica_overlap();
  for (std::size_t c = 0; c < table.size(); ++c) {
    if (w_[c] == 0.0) continue;
    const auto x = table.x(c);
    double sq = 0.0;
    for (int a = 0; a < D; ++a)
      for (int b = 0; b < D; ++b) {
        double s = 0.0;
        for (int n = 0; n < N; ++n) s += X[n * D + a] * x[n * D + b];
        sq += s * s;
      }
    mom.q_sq += w_[c] * sq;
  }
  mom.q_sq /= double(N) * N;

  double rr = 0.0, qr = 0.0, rrr = 0.0;
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b)
      for (int n = 0; n < N; ++n)
        for (int k = 0; k < N; ++k) {
          rr += s_at(n, a, k, a) * s_at(n, b, k, b);
          // <(X^T x).(x^T x')> and its replica image <(x''^T x).(x^T x')>
          const double sx = s_at(n, b, k, a) * m[k * D + b];
          qr += X[n * D + a] * sx;
          rrr += m[n * D + a] * sx;
        }
  const double nn = double(N) * N;
  mom.r_sq = rr / nn;
  mom.q_dot_r = qr / nn;
  mom.r12_dot_r13 = rrr / nn;
  return mom;
}

SymMatrix Posterior::mmse_matrix(std::size_t truth) const {
  const int D = ch_->spec().D();
  const int N = ch_->spec().N;
  const auto X = ch_->table().x(truth);
  const auto& m = mean_x();
  SymMatrix r(D);
  for (int a = 0; a < D; ++a)
    for (int b = a; b < D; ++b) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) s += (X[n * D + a] - m[n * D + a]) * (X[n * D + b] - m[n * D + b]);
      r.set(a, b, s / N);
    }
  return r;
}

double Posterior::tensor_error_sq(std::size_t truth) const {
  const auto X = ch_->table().tensor(truth);
  const auto& m = mean_tensor();
  double s = 0.0;
  for (std::size_t k = 0; k < X.size(); ++k) s += (X[k] - m[k]) * (X[k] - m[k]);
  return s;
}

std::vector<double> Posterior::noise_z(std::size_t truth) const {
  const int nt = ch_->tensor_dims();
  const int nd = ch_->table().signal_size();
  const auto mu = ch_->mean(truth);
  std::vector<double> z(nd);
  for (int k = 0; k < nd; ++k) z[k] = y_[nt + k] - mu[nt + k];
  return z;
}

void Posterior::require_l() const {
  if (!ch_->has_l_basis()) {
    throw DomainError("the l-observable needs h strictly positive definite (smallest eigenvalue " +
                      std::to_string(ch_->h().interior_margin()) + ")");
  }
}

namespace {

// (1/N) [sqrt2 dsqrt(h, sym(u^T Z)) + 2 sym(u^T X) - v], with u the first
// moment of x and v the (mean of) x^T x.
SymMatrix l_combine(const Channel& ch, std::span<const double> u, std::span<const double> Z,
                    std::span<const double> X, const SymMatrix& v) {
  const int D = ch.spec().D();
  const int N = ch.spec().N;
  SymMatrix out(D);
  for (int a = 0; a < D; ++a)
    for (int b = 0; b < D; ++b) {
      double uz = 0.0;
      for (int n = 0; n < N; ++n) uz += u[n * D + a] * Z[n * D + b];
      if (uz != 0.0) out += (std::numbers::sqrt2 * uz) * ch.dsqrt_basis(a, b);
    }
  for (int a = 0; a < D; ++a)
    for (int b = a; b < D; ++b) {
      double ux = 0.0;
      for (int n = 0; n < N; ++n) ux += u[n * D + a] * X[n * D + b] + u[n * D + b] * X[n * D + a];
      out.set(a, b, out(a, b) + ux - v(a, b));
    }
  return out * (1.0 / N);
}

}  // namespace

SymMatrix Posterior::l_value(std::size_t truth, std::size_t c) const {
  require_l();
  const int D = ch_->spec().D();
  const int N = ch_->spec().N;
  const auto x = ch_->table().x(c);
  SymMatrix xtx(D);
  for (int a = 0; a < D; ++a)
    for (int b = a; b < D; ++b) {
      double s = 0.0;
      for (int n = 0; n < N; ++n) s += x[n * D + a] * x[n * D + b];
      xtx.set(a, b, s);
    }
  const auto z = noise_z(truth);
  return l_combine(*ch_, x, z, ch_->table().x(truth), xtx);
}

SymMatrix Posterior::l_mean(std::size_t truth) const {
  require_l();
  const auto z = noise_z(truth);
  return l_combine(*ch_, mean_x(), z, ch_->table().x(truth), mean_xtx());
}

double Posterior::l_sq_mean(std::size_t truth) const {
  require_l();
  const ConfigTable& table = ch_->table();
  double s = 0.0;
  for (std::size_t c = 0; c < table.size(); ++c) {
    if (w_[c] == 0.0) continue;
    const SymMatrix l = l_value(truth, c);
    s += w_[c] * inner(l, l);
  }
  return s;
}

GibbsSummary::GibbsSummary(std::shared_ptr<const Channel> channel, const DisorderSample& d)
    : ch_(std::move(channel)), post_(*ch_, ch_->observation(d)), truth_(ch_->table().index_of(d.X)) {}

GibbsSummary gibbs_exact(const ModelSpec& spec, double t, const ConePoint& h, const DisorderSample& d) {
  auto table = std::make_shared<const ConfigTable>(spec);
  auto channel = std::make_shared<const Channel>(table, t, h);
  return GibbsSummary(channel, d);
}

SymMatrix l_observable(const ModelSpec& spec, double t, const ConePoint& h, const DisorderSample& d,
                       const Dense& x) {
  (void)t;  // the l-observable does not depend on t
  const int D = spec.D();
  const int N = spec.N;
  if (x.rows != N || x.cols != D) throw UsageError("l_observable: x must be N x D");
  if (!h.interior()) {
    throw DomainError("the l-observable needs h strictly positive definite (smallest eigenvalue " +
                      std::to_string(h.interior_margin()) + ")");
  }
  SymMatrix xz(D), xX(D), xx(D);
  for (int a = 0; a < D; ++a)
    for (int b = a; b < D; ++b) {
      double sz = 0.0, sX = 0.0, sx = 0.0;
      for (int n = 0; n < N; ++n) {
        sz += 0.5 * (x(n, a) * d.Z(n, b) + x(n, b) * d.Z(n, a));
        sX += 0.5 * (x(n, a) * d.X(n, b) + x(n, b) * d.X(n, a));
        sx += x(n, a) * x(n, b);
      }
      xz.set(a, b, sz);
      xX.set(a, b, sX);
      xx.set(a, b, sx);
    }
  return (std::numbers::sqrt2 * dsqrt(h, xz) + 2.0 * xX - xx) * (1.0 / N);
}

}  // namespace hjlab
