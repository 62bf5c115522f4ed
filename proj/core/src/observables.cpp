#include "hjlab/observables.hpp"

#include <algorithm>
#include <cmath>

#include "hjlab/errors.hpp"

namespace hjlab {

SymMatrix sym_from_upper(const std::vector<double>& v, std::size_t offset, int dim) {
  SymMatrix m(dim);
  std::size_t k = offset;
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) m.set(i, j, v.at(k++));
  return m;
}

Dense dense_from(const std::vector<double>& v, std::size_t offset, int rows, int cols) {
  Dense m(rows, cols);
  for (std::size_t k = 0; k < m.size(); ++k) m.data[k] = v.at(offset + k);
  return m;
}

namespace {

void put_upper(const SymMatrix& m, double* out) {
  for (int i = 0; i < m.dim(); ++i)
    for (int j = i; j < m.dim(); ++j) *out++ = m(i, j);
}

int dof(int D) { return D * (D + 1) / 2; }

}  // namespace

QuenchedEstimate free_energy_moments(std::shared_ptr<const ConfigTable> table, double t, const ConePoint& h,
                                     const QuenchedOptions& opts) {
  const ModelSpec& spec = table->spec();
  const double np = double(spec.tensor_rows());
  Estimator est;
  est.outputs = 2 + dof(spec.D());
  est.fn = [np](const Posterior& post, std::size_t, double* out) {
    out[0] = post.f_N();
    out[1] = post.mean_tensor_sq() / np;
    put_upper(post.replica_overlap(), out + 2);
  };
  return quenched(std::move(table), t, h, est, opts);
}

QuenchedEstimate free_energy(const ModelSpec& spec, double t, const ConePoint& h, const QuenchedOptions& opts) {
  Estimator est;
  est.fn = [](const Posterior& post, std::size_t, double* out) { out[0] = post.f_N(); };
  return quenched(spec, t, h, est, opts);
}

FreeEnergyMoments free_energy_and_moments(const ModelSpec& spec, double t, const ConePoint& h,
                                          const QuenchedOptions& opts) {
  FreeEnergyMoments r;
  r.raw = free_energy_moments(std::make_shared<const ConfigTable>(spec), t, h, opts);
  r.F = r.raw.value[0];
  r.dt_moment = r.raw.value[1];
  r.dh_moment = sym_from_upper(r.raw.value, 2, spec.D());
  return r;
}

OverlapStatistics overlap_statistics(const ModelSpec& spec, double t, const ConePoint& h, const Dense& center,
                                     const QuenchedOptions& opts) {
  const int D = spec.D();
  if (center.rows != D || center.cols != D) throw UsageError("overlap_statistics: center must be D x D");
  auto table = std::make_shared<const ConfigTable>(spec);

  Estimator first;
  first.needs_truth = true;
  first.outputs = D * D + 1 + dof(D);
  first.fn = [&center, D](const Posterior& post, std::size_t truth, double* out) {
    const Dense q = post.overlap_mean(truth);
    std::copy(q.data.begin(), q.data.end(), out);
    out[D * D] = post.overlap_abs_dev(truth, center);
    put_upper(post.replica_overlap(), out + D * D + 1);
  };
  const QuenchedEstimate a = quenched(table, t, h, first, opts);

  OverlapStatistics s;
  s.method = opts.method;
  s.q_mean = dense_from(a.value, 0, D, D);
  s.q_mean_se = dense_from(a.std_error, 0, D, D);
  s.dev_center = a.value[D * D];
  s.dev_center_se = a.std_error[D * D];
  s.r_mean = sym_from_upper(a.value, D * D + 1, D);

  // Second pass over the same disorder, centred at the first-pass mean.
  const Dense qbar = s.q_mean;
  Estimator second;
  second.needs_truth = true;
  second.fn = [qbar](const Posterior& post, std::size_t truth, double* out) {
    out[0] = post.overlap_abs_dev(truth, qbar);
  };
  const QuenchedEstimate b = quenched(table, t, h, second, opts);
  s.dev_mean = b.value[0];
  s.dev_mean_se = b.std_error[0];
  return s;
}

double NishimoriPairs::max_gap() const {
  double g = 0.0;
  for (int a = 0; a < r_mean.dim(); ++a)
    for (int b = 0; b < r_mean.dim(); ++b) g = std::max(g, std::abs(q_mean(a, b) - r_mean(a, b)));
  g = std::max(g, std::abs(q_sq - r_sq));
  g = std::max(g, std::abs(q_dot_r - r12_dot_r13));
  return g;
}

NishimoriPairs nishimori_pairs(const ModelSpec& spec, double t, const ConePoint& h, const QuenchedOptions& opts) {
  const int D = spec.D();
  Estimator est;
  est.needs_truth = true;
  est.outputs = D * D + dof(D) + 4;
  est.fn = [D](const Posterior& post, std::size_t truth, double* out) {
    const NishimoriMoments m = post.nishimori(truth);
    std::copy(m.q_mean.data.begin(), m.q_mean.data.end(), out);
    put_upper(m.r_mean, out + D * D);
    double* tail = out + D * D + dof(D);
    tail[0] = m.q_sq;
    tail[1] = m.r_sq;
    tail[2] = m.q_dot_r;
    tail[3] = m.r12_dot_r13;
  };
  const QuenchedEstimate e = quenched(spec, t, h, est, opts);
  NishimoriPairs p;
  p.q_mean = dense_from(e.value, 0, D, D);
  p.r_mean = sym_from_upper(e.value, D * D, D);
  const std::size_t k = std::size_t(D * D + dof(D));
  p.q_sq = e.value[k];
  p.r_sq = e.value[k + 1];
  p.q_dot_r = e.value[k + 2];
  p.r12_dot_r13 = e.value[k + 3];
  return p;
}

QuenchedEstimate mmse_matrix(const ModelSpec& spec, double t, const ConePoint& h, const QuenchedOptions& opts) {
  Estimator est;
  est.needs_truth = true;
  est.outputs = dof(spec.D());
  est.fn = [](const Posterior& post, std::size_t truth, double* out) { put_upper(post.mmse_matrix(truth), out); };
  return quenched(spec, t, h, est, opts);
}

QuenchedEstimate mmse_scalar(const ModelSpec& spec, double t, const ConePoint& h, const QuenchedOptions& opts) {
  const double np = double(spec.tensor_rows());
  Estimator est;
  est.needs_truth = true;
  est.fn = [np](const Posterior& post, std::size_t truth, double* out) {
    out[0] = post.tensor_error_sq(truth) / np;
  };
  return quenched(spec, t, h, est, opts);
}

double tensor_second_moment(const ModelSpec& spec) {
  const ConfigTable table(spec);
  double s = 0.0;
  for (std::size_t c = 0; c < table.size(); ++c) s += std::exp(table.log_prior(c)) * table.tensor_sq(c);
  return s / double(spec.tensor_rows());
}

LStatistics l_statistics(const ModelSpec& spec, double t, const ConePoint& h, const QuenchedOptions& opts) {
  if (!h.interior()) throw DomainError("l_statistics needs h strictly positive definite");
  const int D = spec.D();
  Estimator est;
  est.needs_truth = true;
  est.outputs = dof(D) + 2;
  est.fn = [D](const Posterior& post, std::size_t truth, double* out) {
    const SymMatrix m = post.l_mean(truth);
    put_upper(m, out);
    const double sq = post.l_sq_mean(truth);
    out[dof(D)] = sq;
    out[dof(D) + 1] = sq - inner(m, m);
  };
  LStatistics s;
  s.raw = quenched(spec, t, h, est, opts);
  s.mean = sym_from_upper(s.raw.value, 0, D);
  const double sq = s.raw.value[dof(D)];
  const double within = s.raw.value[dof(D) + 1];
  s.ell0 = std::sqrt(std::max(within, 0.0));
  s.ell1 = std::sqrt(std::max(sq - inner(s.mean, s.mean), 0.0));
  return s;
}

}  // namespace hjlab
