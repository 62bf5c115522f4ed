#pragma once

// Finite-N inference model: prior, disorder, Hamiltonian and the exact
// Gibbs posterior obtained by enumerating every configuration.
//
// For fixed (t, h) the observation y = (Y, Ybar) is Gaussian around
// mu_x = (c x~, x sqrt(2h)) with c = sqrt(2t / N^{p-1}) and x~ = x^{(x)p} A,
// and the Hamiltonian is H(x) = mu_x . y - |mu_x|^2 / 2. All quenched averages
// below are built on that representation.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hjlab/dense.hpp"
#include "hjlab/nonlinearity.hpp"
#include "hjlab/symcone.hpp"

namespace hjlab {

inline constexpr std::size_t kMaxConfigurations = std::size_t(1) << 20;

struct PriorSpec {
  int D = 1;
  std::vector<std::vector<double>> support;
  std::vector<double> weights;
};

// Entries must lie in [-1, 1] and weights must sum to 1 within 1e-12.
PriorSpec make_prior(int D, std::vector<std::vector<double>> support, std::vector<double> weights);
// Uniform on {-1, +1}^D.
PriorSpec rademacher_prior(int D);
std::vector<double> prior_mean(const PriorSpec& prior);
// E[X_1^T X_1] for one row.
SymMatrix prior_second_moment(const PriorSpec& prior);

struct ModelSpec {
  PriorSpec prior;
  InteractionSpec interaction;
  int N = 1;

  int D() const noexcept { return prior.D; }
  int p() const noexcept { return interaction.p; }
  int L() const noexcept { return interaction.L; }
  int tensor_rows() const;  // N^p
  int tensor_size() const { return tensor_rows() * L(); }
  int signal_size() const noexcept { return N * D(); }
  // |support|^N, saturating at SIZE_MAX.
  std::size_t configurations() const;
};

ModelSpec make_model(PriorSpec prior, InteractionSpec interaction, int N);

struct DisorderSample {
  Dense X;  // N x D
  Dense W;  // N^p x L
  Dense Z;  // N x D
};

DisorderSample sample_disorder(const ModelSpec& spec, std::uint64_t seed);

// x^{(x)p} A as an N^p x L matrix; x is N x D.
Dense signal_tensor(const ModelSpec& spec, const Dense& x);

double hamiltonian(const ModelSpec& spec, double t, const ConePoint& h, const Dense& x,
                   const DisorderSample& d);

// Every configuration in support^N with its tensor and log prior weight.
// Configuration c has rows given by the base-|support| digits of c, row 0
// most significant.
class ConfigTable {
 public:
  // CapacityError if |support|^N exceeds kMaxConfigurations.
  explicit ConfigTable(const ModelSpec& spec);

  std::size_t size() const noexcept { return count_; }
  int signal_size() const noexcept { return nd_; }
  int tensor_size() const noexcept { return nt_; }
  std::span<const double> x(std::size_t c) const { return {x_.data() + c * nd_, std::size_t(nd_)}; }
  std::span<const double> tensor(std::size_t c) const {
    return {tensor_.data() + c * nt_, std::size_t(nt_)};
  }
  double tensor_sq(std::size_t c) const { return tensor_sq_[c]; }
  double log_prior(std::size_t c) const { return log_prior_[c]; }
  // Index of the configuration equal to X; UsageError if X is off-support.
  std::size_t index_of(const Dense& X) const;
  const ModelSpec& spec() const noexcept { return spec_; }

 private:
  ModelSpec spec_;
  std::size_t count_ = 0;
  int nd_ = 0;
  int nt_ = 0;
  std::vector<double> x_;
  std::vector<double> tensor_;
  std::vector<double> tensor_sq_;
  std::vector<double> log_prior_;
};

// Per-(t, h) channel: the means mu_x of every configuration. When t == 0
// the Y block is dropped, since it does not interact with x.
class Channel {
 public:
  Channel(std::shared_ptr<const ConfigTable> table, double t, const ConePoint& h);

  const ConfigTable& table() const noexcept { return *table_; }
  const ModelSpec& spec() const noexcept { return table_->spec(); }
  double t() const noexcept { return t_; }
  const ConePoint& h() const noexcept { return h_; }
  const SymMatrix& sqrt2h() const noexcept { return sqrt2h_; }
  double tensor_scale() const noexcept { return c_; }
  bool has_tensor_block() const noexcept { return t_ > 0.0; }
  int tensor_dims() const noexcept { return has_tensor_block() ? table_->tensor_size() : 0; }
  int gaussian_dims() const noexcept { return tensor_dims() + table_->signal_size(); }

  std::span<const double> mean(std::size_t c) const {
    return {mu_.data() + c * std::size_t(dims_), std::size_t(dims_)};
  }
  double mean_sq(std::size_t c) const { return mu_sq_[c]; }

  // y = mu_X + (W, Z) for a disorder sample.
  std::vector<double> observation(const DisorderSample& d) const;
  // y built from a truth configuration and a Gaussian noise vector of length gaussian_dims().
  void observation(std::size_t truth, std::span<const double> noise, std::span<double> y) const;

  // dsqrt(h, sym(E_ab)) for the l-observable; only for interior h.
  bool has_l_basis() const noexcept { return !dsqrt_basis_.empty(); }
  const SymMatrix& dsqrt_basis(int a, int b) const { return dsqrt_basis_[std::size_t(a) * spec().D() + b]; }

 private:
  std::shared_ptr<const ConfigTable> table_;
  double t_;
  ConePoint h_;
  SymMatrix sqrt2h_;
  double c_;
  int dims_;
  std::vector<double> mu_;
  std::vector<double> mu_sq_;
  std::vector<SymMatrix> dsqrt_basis_;
};

struct NishimoriMoments {
  Dense q_mean;        // <Q>, Q = X^T x / N
  SymMatrix r_mean;    // <R>, R = x^T x' / N
  double q_sq = 0.0;   // <|Q|^2>
  double r_sq = 0.0;   // <|R|^2>
  double q_dot_r = 0.0;    // <Q(x, X) . R(x, x')>
  double r12_dot_r13 = 0.0;  // <R(x, x') . R(x, x'')>
};

// Exact posterior for one observation. Buffers are reused by assign(), so a
// worker can hold one Posterior and feed it many observations.
class Posterior {
 public:
  explicit Posterior(const Channel& channel);
  Posterior(const Channel& channel, std::span<const double> y);

  void assign(std::span<const double> y);

  const Channel& channel() const noexcept { return *ch_; }
  std::span<const double> observation() const noexcept { return y_; }
  double log_partition() const noexcept { return log_z_; }
  double f_N() const noexcept { return log_z_ / ch_->spec().N; }
  std::span<const double> weights() const noexcept { return w_; }

  const std::vector<double>& mean_x() const;       // N x D
  const std::vector<double>& mean_tensor() const;  // N^p x L
  double mean_tensor_sq() const;
  // S[(n,a),(m,b)] = <x_na x_mb>
  const std::vector<double>& second_moment() const;
  SymMatrix replica_overlap() const;  // <R> = <x>^T <x> / N
  SymMatrix mean_xtx() const;         // <x^T x>

  // Truth-dependent statistics; `truth` is a configuration index.
  Dense overlap_mean(std::size_t truth) const;
  double overlap_abs_dev(std::size_t truth, const Dense& center) const;
  NishimoriMoments nishimori(std::size_t truth) const;
  SymMatrix mmse_matrix(std::size_t truth) const;  // (X - <x>)^T (X - <x>) / N
  double tensor_error_sq(std::size_t truth) const;  // |X~ - <x~>|^2
  // Z recovered from the observation: Ybar - X sqrt(2h).
  std::vector<double> noise_z(std::size_t truth) const;
  // l-observable of configuration c; the channel must have interior h.
  SymMatrix l_value(std::size_t truth, std::size_t c) const;
  SymMatrix l_mean(std::size_t truth) const;
  double l_sq_mean(std::size_t truth) const;  // <|L|^2>

 private:
  void require_l() const;

  const Channel* ch_;
  std::vector<double> y_;
  std::vector<double> w_;
  double log_z_ = 0.0;
  mutable bool have_mean_ = false, have_tensor_ = false, have_second_ = false;
  mutable std::vector<double> mean_;
  mutable std::vector<double> tensor_mean_;
  mutable std::vector<double> second_;
};

// One disorder draw with its exact posterior.
class GibbsSummary {
 public:
  GibbsSummary(std::shared_ptr<const Channel> channel, const DisorderSample& d);

  const Posterior& posterior() const noexcept { return post_; }
  std::size_t truth() const noexcept { return truth_; }
  double f_N() const noexcept { return post_.f_N(); }
  const std::vector<double>& mean_x() const { return post_.mean_x(); }
  const std::vector<double>& mean_tensor() const { return post_.mean_tensor(); }
  Dense overlap_mean() const { return post_.overlap_mean(truth_); }
  SymMatrix replica_overlap_mean() const { return post_.replica_overlap(); }
  double overlap_abs_dev(const Dense& center) const { return post_.overlap_abs_dev(truth_, center); }
  SymMatrix L_mean() const { return post_.l_mean(truth_); }
  double L_sq_mean() const { return post_.l_sq_mean(truth_); }

 private:
  std::shared_ptr<const Channel> ch_;
  Posterior post_;
  std::size_t truth_;
};

// Enumerates support^N for this disorder draw.
GibbsSummary gibbs_exact(const ModelSpec& spec, double t, const ConePoint& h, const DisorderSample& d);

// l-observable for an arbitrary configuration x of the support.
SymMatrix l_observable(const ModelSpec& spec, double t, const ConePoint& h, const DisorderSample& d,
                       const Dense& x);

}  // namespace hjlab
