#include "hjlab/psi.hpp"

#include <algorithm>
#include <cstring>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <unordered_map>

#include "hjlab/errors.hpp"
#include "hjlab/observables.hpp"

namespace hjlab {

int default_psi_nodes(int D) {
  if (D == 1) return 128;
  if (D == 2) return 64;
  return 16;
}

namespace {

constexpr std::size_t kMaxCacheEntries = 1u << 20;

std::string key_of(const SymMatrix& h) {
  const std::vector<double> u = h.upper();
  std::string k(u.size() * sizeof(double), '\0');
  std::memcpy(k.data(), u.data(), k.size());
  return k;
}

}  // namespace

struct PsiOracle::Impl {
  PriorSpec prior;
  int nodes;
  std::shared_ptr<const ConfigTable> table;
  mutable std::shared_mutex mu;
  mutable std::unordered_map<std::string, std::pair<double, SymMatrix>> cache;

  std::pair<double, SymMatrix> evaluate(const SymMatrix& h) const {
    const std::string key = key_of(h);
    {
      std::shared_lock lock(mu);
      auto it = cache.find(key);
      if (it != cache.end()) return it->second;
    }
    QuenchedOptions opts;
    opts.nodes = nodes;
    opts.threads = 1;
    const QuenchedEstimate e = free_energy_moments(table, 0.0, ConePoint(h), opts);
    std::pair<double, SymMatrix> r{e.value[0], sym_from_upper(e.value, 2, prior.D)};
    const double lo = min_eigenvalue(r.second);
    if (lo < -1e-8) {
      std::ostringstream os;
      os << "psi gradient at " << to_string(h) << " has eigenvalue " << lo
         << " below -1e-8; increase the quadrature nodes";
      throw NumericError(os.str());
    }
    std::unique_lock lock(mu);
    if (cache.size() >= kMaxCacheEntries) cache.clear();
    cache.emplace(key, r);
    return r;
  }
};

PsiOracle::PsiOracle(PriorSpec prior, int nodes) : impl_(std::make_unique<Impl>()) {
  const int D = prior.D;
  impl_->nodes = nodes > 0 ? nodes : default_psi_nodes(D);
  if (impl_->nodes > max_nodes_for(D)) {
    throw CapacityError("psi: " + std::to_string(impl_->nodes) + " nodes exceeds the limit for D=" +
                        std::to_string(D));
  }
  // At t = 0 the interaction never enters; any valid spec will do.
  Dense eye(D, D);
  for (int d = 0; d < D; ++d) eye(d, d) = 1.0;
  impl_->table = std::make_shared<const ConfigTable>(make_model(prior, make_interaction(D, 1, eye), 1));
  impl_->prior = std::move(prior);
}

PsiOracle::~PsiOracle() = default;

int PsiOracle::dim() const noexcept { return impl_->prior.D; }
int PsiOracle::nodes() const noexcept { return impl_->nodes; }
const PriorSpec& PsiOracle::prior() const noexcept { return impl_->prior; }

double PsiOracle::value(const SymMatrix& h) const { return impl_->evaluate(h).first; }
SymMatrix PsiOracle::grad(const SymMatrix& h) const { return impl_->evaluate(h).second; }

Dense PsiOracle::hess(const SymMatrix& h, double step) const {
  const std::vector<SymMatrix> b = basis(dim());
  const int k = int(b.size());
  Dense H(k, k);
  for (int j = 0; j < k; ++j) {
    const SymMatrix gp = grad(h + step * b[j]);
    const SymMatrix gm = grad(h - step * b[j]);
    const SymMatrix dg = (gp - gm) * (0.5 / step);
    for (int i = 0; i < k; ++i) H(i, j) = inner(dg, b[i]);
  }
  return H;
}

ConeFunction PsiOracle::as_function() const {
  ConeFunction f;
  f.dim = dim();
  f.value = [this](const SymMatrix& h) { return value(h); };
  f.gradient = [this](const SymMatrix& h) { return grad(h); };
  f.lipschitz_bound = double(dim());
  f.label = "psi";
  return f;
}

std::size_t PsiOracle::cache_size() const {
  std::shared_lock lock(impl_->mu);
  return impl_->cache.size();
}

double psi(const PriorSpec& prior, const ConePoint& h, int nodes) {
  return PsiOracle(prior, nodes).value(h.matrix());
}

}  // namespace hjlab
