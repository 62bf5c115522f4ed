#include "hjlab/quenched.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>
#include <thread>

#include "hjlab/errors.hpp"
#include "hjlab/quadrature.hpp"

namespace hjlab {

std::string to_string(Method m) { return m == Method::quadrature ? "quadrature" : "monte_carlo"; }

Method parse_method(const std::string& s) {
  if (s == "quadrature") return Method::quadrature;
  if (s == "mc" || s == "monte_carlo") return Method::monte_carlo;
  throw UsageError("unknown averaging mode '" + s + "' (expected quadrature or mc)");
}

int max_nodes_for(int gaussian_dims) { return gaussian_dims <= 2 ? 128 : 16; }

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

namespace {

constexpr std::size_t kMaxGridNodes = std::size_t(1) << 27;

// Runs body(block) for every block, in parallel, rethrowing the first error.
template <class Body>
void for_each_block(std::size_t blocks, int threads, Body&& body) {
  int n = threads > 0 ? threads : int(std::max(1u, std::thread::hardware_concurrency()));
  n = int(std::min<std::size_t>(std::size_t(n), blocks));
  if (n <= 1) {
    for (std::size_t b = 0; b < blocks; ++b) body(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t b = next.fetch_add(1);
      if (b >= blocks || failed.load()) return;
      try {
        body(b);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<double> reduce_blocks(const std::vector<double>& partial, std::size_t blocks, int outputs) {
  std::vector<double> col(blocks), out(outputs);
  for (int j = 0; j < outputs; ++j) {
    for (std::size_t b = 0; b < blocks; ++b) col[b] = partial[b * outputs + j];
    out[j] = pairwise_sum(col.data(), blocks);
  }
  return out;
}

QuenchedEstimate quadrature(const Channel& ch, const Estimator& est, const QuenchedOptions& opts) {
  const int dims = ch.gaussian_dims();
  if (dims > kMaxQuadratureDims) {
    std::ostringstream os;
    os << "quadrature needs " << dims << " Gaussian dimensions, above the limit of " << kMaxQuadratureDims
       << "; use Monte Carlo mode";
    throw CapacityError(os.str());
  }
  const int n = opts.nodes;
  if (n < 1 || n > max_nodes_for(dims)) {
    std::ostringstream os;
    os << "quadrature with " << dims << " dimensions allows 1.." << max_nodes_for(dims) << " nodes, got " << n;
    throw CapacityError(os.str());
  }
  std::size_t total = 1;
  for (int d = 0; d < dims; ++d) {
    total *= std::size_t(n);
    if (total > kMaxGridNodes) throw CapacityError("quadrature grid exceeds 2^27 nodes; use Monte Carlo mode");
  }
  const GaussRule& rule = gauss_hermite(n);
  std::vector<double> log_w(n);
  for (int i = 0; i < n; ++i) log_w[i] = std::log(rule.weights[i]);

  const int outputs = est.outputs;
  constexpr std::size_t kBlock = 4096;
  const std::size_t blocks = (total + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks * outputs, 0.0);
  const std::size_t count = ch.table().size();

  for_each_block(blocks, opts.threads, [&](std::size_t b) {
    Posterior post(ch);
    std::vector<double> y(dims), out(outputs);
    std::vector<int> digit(dims);
    double* acc = partial.data() + b * outputs;
    const std::size_t lo = b * kBlock;
    const std::size_t hi = std::min(total, lo + kBlock);
    for (std::size_t k = lo; k < hi; ++k) {
      std::size_t rem = k;
      double lw = 0.0;
      for (int d = dims - 1; d >= 0; --d) {
        const int i = int(rem % std::size_t(n));
        rem /= std::size_t(n);
        y[d] = rule.nodes[i];
        lw += log_w[i];
      }
      post.assign(y);
      const double node_mass = std::exp(lw + post.log_partition());
      if (node_mass == 0.0) continue;
      if (!est.needs_truth) {
        est.fn(post, 0, out.data());
        for (int j = 0; j < outputs; ++j) acc[j] += node_mass * out[j];
      } else {
        const auto w = post.weights();
        for (std::size_t c = 0; c < count; ++c) {
          if (w[c] == 0.0) continue;
          est.fn(post, c, out.data());
          const double m = node_mass * w[c];
          for (int j = 0; j < outputs; ++j) acc[j] += m * out[j];
        }
      }
    }
  });

  QuenchedEstimate r;
  r.method = Method::quadrature;
  r.nodes = n;
  r.n_replicas = long(total);
  r.value = reduce_blocks(partial, blocks, outputs);
  r.std_error.assign(outputs, 0.0);
  r.spread.assign(outputs, 0.0);
  r.refinement_delta.assign(outputs, 0.0);
  return r;
}

QuenchedEstimate monte_carlo(const Channel& ch, const Estimator& est, const QuenchedOptions& opts) {
  if (opts.budget < kMinMonteCarloBudget) {
    throw CapacityError("Monte Carlo needs a budget of at least " + std::to_string(kMinMonteCarloBudget) +
                        " disorder samples, got " + std::to_string(opts.budget));
  }
  const ModelSpec& spec = ch.spec();
  const std::size_t reps = std::size_t(opts.budget);
  const int outputs = est.outputs;
  const int dims = ch.gaussian_dims();
  const int nt_full = spec.tensor_size();
  const int nd = spec.signal_size();
  const std::size_t k = spec.prior.support.size();
  std::vector<double> cumulative(k);
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) cumulative[i] = (acc += spec.prior.weights[i]);

  std::vector<double> samples(reps * outputs);
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (reps + kBlock - 1) / kBlock;
  for_each_block(blocks, opts.threads, [&](std::size_t b) {
    Posterior post(ch);
    std::vector<double> noise(std::size_t(nt_full) + nd), y(dims);
    const std::size_t lo = b * kBlock;
    const std::size_t hi = std::min(reps, lo + kBlock);
    for (std::size_t r = lo; r < hi; ++r) {
      // Replica r owns its generator; W is drawn even when t = 0 so that the
      // disorder of a replica does not depend on t.
      std::mt19937_64 rng(opts.seed + r);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      std::normal_distribution<double> normal;
      std::size_t truth = 0;
      for (int row = 0; row < spec.N; ++row) {
        const double u = unif(rng);
        std::size_t pick = k - 1;
        for (std::size_t i = 0; i < k; ++i)
          if (u < cumulative[i]) {
            pick = i;
            break;
          }
        truth = truth * k + pick;
      }
      for (double& v : noise) v = normal(rng);
      const std::span<const double> used =
          ch.has_tensor_block() ? std::span<const double>(noise) : std::span<const double>(noise).subspan(nt_full);
      ch.observation(truth, used, y);
      post.assign(y);
      est.fn(post, truth, samples.data() + r * outputs);
    }
  });

  QuenchedEstimate res;
  res.method = Method::monte_carlo;
  res.n_replicas = long(reps);
  res.value.resize(outputs);
  res.std_error.resize(outputs);
  res.spread.resize(outputs);
  res.refinement_delta.assign(outputs, 0.0);
  std::vector<double> col(reps);
  for (int j = 0; j < outputs; ++j) {
    for (std::size_t r = 0; r < reps; ++r) col[r] = samples[r * outputs + j];
    const double mean = pairwise_sum(col.data(), reps) / double(reps);
    for (std::size_t r = 0; r < reps; ++r) col[r] = (col[r] - mean) * (col[r] - mean);
    const double var = pairwise_sum(col.data(), reps) / double(reps - 1);
    res.value[j] = mean;
    res.spread[j] = std::sqrt(var);
    // For a sample mean the jackknife standard error reduces to s / sqrt(n).
    res.std_error[j] = std::sqrt(var / double(reps));
  }
  return res;
}

}  // namespace

QuenchedEstimate quenched(std::shared_ptr<const ConfigTable> table, double t, const ConePoint& h,
                          const Estimator& estimator, const QuenchedOptions& opts) {
  if (estimator.outputs < 1 || !estimator.fn) throw UsageError("quenched: empty estimator");
  const Channel ch(std::move(table), t, h);
  if (opts.method == Method::monte_carlo) return monte_carlo(ch, estimator, opts);
  QuenchedEstimate r = quadrature(ch, estimator, opts);
  if (opts.refine_nodes > 0) {
    QuenchedOptions o = opts;
    o.nodes = opts.refine_nodes;
    const QuenchedEstimate ref = quadrature(ch, estimator, o);
    for (std::size_t j = 0; j < r.value.size(); ++j) r.refinement_delta[j] = std::abs(ref.value[j] - r.value[j]);
  }
  return r;
}

QuenchedEstimate quenched(const ModelSpec& spec, double t, const ConePoint& h, const Estimator& estimator,
                          const QuenchedOptions& opts) {
  return quenched(std::make_shared<const ConfigTable>(spec), t, h, estimator, opts);
}

}  // namespace hjlab
