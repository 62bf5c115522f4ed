#include "hjlab/variational.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>
#include <unordered_map>

#include "hjlab/errors.hpp"

namespace hjlab {

std::string to_string(Formula f) {
  switch (f) {
    case Formula::conjugate: return "conjugate";
    case Formula::hopf: return "hopf";
    case Formula::hopf_lax: return "hopf_lax";
    case Formula::hopf_lax_scaled: return "hopf_lax_scaled";
  }
  return "unknown";
}

SymMatrix project_cone_ball(const SymMatrix& s, double radius) {
  SymMatrix p = project_psd(s).matrix();
  const double n = norm(p);
  if (n > radius) p *= radius / n;
  return p;
}

AscentResult maximize_on_cone(const ConeObjective& f, const SymMatrix& start, double radius,
                              const AscentOptions& opts) {
  AscentResult r;
  SymMatrix x = project_cone_ball(start, radius);
  ConeEval e = f(x);
  for (int k = 0; k < 80 && !(e.ok && std::isfinite(e.value)); ++k) {
    x *= 0.5;
    if (k == 79) x = SymMatrix(x.dim());
    e = f(x);
  }
  if (!e.ok || !std::isfinite(e.value)) {
    throw NumericError("cone ascent: no feasible point between the start and the origin");
  }

  double alpha = 1.0;
  int it = 0;
  // Values and gradients that come from quadrature agree only to the
  // quadrature error, so the gradient test alone can fail to trigger.
  // Stop after a run of steps that no longer improve the value, and stop
  // backtracking once a trial step promises less than the value resolution.
  int stalled = 0;
  double stat = norm(project_cone_ball(x + e.grad, radius) - x);
  for (; it < opts.max_iter; ++it) {
    if (stat <= opts.tol) {
      r.converged = true;
      break;
    }
    bool accepted = false;
    SymMatrix xn(x.dim()), s(x.dim());
    ConeEval en;
    const double slack = 1e-15 * (1.0 + std::abs(e.value));
    for (int ls = 0; ls < 60; ++ls) {
      xn = project_cone_ball(x + alpha * e.grad, radius);
      s = xn - x;
      if (max_abs(s) == 0.0 || inner(e.grad, s) <= 10.0 * slack) break;
      en = f(xn);
      if (en.ok && std::isfinite(en.value) && en.value >= e.value + opts.armijo * inner(e.grad, s) - slack) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    stalled = en.value - e.value <= 1e-15 * (1.0 + std::abs(e.value)) ? stalled + 1 : 0;
    const double ss = inner(s, s);
    const double sy = inner(s, en.grad - e.grad);
    alpha = sy < 0.0 ? ss / -sy : alpha * 4.0;
    alpha = std::clamp(alpha, 1e-12, 1e8);
    x = xn;
    e = en;
    stat = norm(project_cone_ball(x + e.grad, radius) - x);
    if (stalled >= 5) {
      ++it;
      break;
    }
  }
  r.x = x;
  r.value = e.value;
  r.grad = e.grad;
  r.stationarity = stat;
  r.iterations = it;
  r.on_boundary = norm(x) >= radius * (1.0 - 1e-7);
  return r;
}

namespace {

double initial_radius(const ConeFunction& g, const SymMatrix& h) {
  return norm(h) + g.lipschitz_bound.value_or(0.0) + 1.0;
}

SymMatrix fd_gradient(const ConeFunction& g, const SymMatrix& x) {
  const double step = 1e-6;
  const std::vector<SymMatrix> b = basis(x.dim());
  SymMatrix grad(x.dim());
  const double f0 = g.value(x);
  for (const SymMatrix& e : b) {
    const SymMatrix xp = x + step * e;
    const SymMatrix xm = x - step * e;
    double d;
    if (min_eigenvalue(xm) >= 0.0) d = (g.value(xp) - g.value(xm)) / (2 * step);
    else d = (g.value(xp) - f0) / step;
    grad += (d / inner(e, e)) * e;
  }
  return grad;
}

ConeObjective conjugate_objective(const ConeFunction& g, const SymMatrix& h) {
  return [&g, h](const SymMatrix& x) {
    ConeEval e;
    const double gv = g.value(x);
    if (!std::isfinite(gv)) {
      e.ok = false;
      return e;
    }
    e.value = inner(h, x) - gv;
    e.grad = h - (g.gradient ? g.gradient(x) : fd_gradient(g, x));
    return e;
  };
}

struct ConjugateRun {
  AscentResult ascent;
  bool diverged = false;
  double radius = 0.0;
};

// Ascent with radius doubling; see monotone_conjugate.
ConjugateRun conjugate_from(const ConeObjective& J, const SymMatrix& start, double radius,
                            const AscentOptions& opts) {
  ConjugateRun run;
  run.radius = radius;
  run.ascent = maximize_on_cone(J, start, radius, opts);
  for (int doubling = 0;; ++doubling) {
    if (!run.ascent.on_boundary) return run;
    if (doubling == 3) {
      run.diverged = true;
      return run;
    }
    run.radius *= 2.0;
    AscentResult next = maximize_on_cone(J, run.ascent.x, run.radius, opts);
    const bool grew = next.value > run.ascent.value + 1e-12 * (1.0 + std::abs(run.ascent.value));
    run.ascent = next;
    if (!grew) return run;
  }
}

// Seeds for multi-start: hints first, then the given anchors, then random
// Wishart matrices with norms uniform in (0, scale].
std::vector<SymMatrix> start_points(int dim, int count, std::uint64_t seed, double scale,
                                    std::span<const SymMatrix> hints, const std::vector<SymMatrix>& anchors) {
  std::vector<SymMatrix> pts;
  for (const SymMatrix& s : hints)
    if (int(pts.size()) < count) pts.push_back(s);
  for (const SymMatrix& s : anchors)
    if (int(pts.size()) < count) pts.push_back(s);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::uint64_t i = 0; int(pts.size()) < count; ++i) {
    SymMatrix w = random_wishart(dim, seed + i);
    const double n = norm(w);
    if (n > 0.0) w *= scale * unif(rng) / n;
    pts.push_back(w);
  }
  return pts;
}

VariationalResult multi_start(const ConeObjective& J, const std::vector<SymMatrix>& starts, double radius,
                              const AscentOptions& opts, Formula formula) {
  VariationalResult res;
  res.formula = formula;
  res.starts = int(starts.size());
  res.search_radius = radius;
  double best = -std::numeric_limits<double>::infinity();
  AscentResult best_run;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    const AscentResult a = maximize_on_cone(J, starts[i], radius, opts);
    res.iterations += a.iterations;
    res.start_values.push_back(a.value);
    res.start_maximizers.push_back(a.x);
    if (a.value > best) {
      best = a.value;
      best_run = a;
      res.best_start_index = int(i);
    }
  }
  res.value = best_run.value;
  res.maximizer = ConePoint(best_run.x);
  res.stationarity_residual = best_run.stationarity;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    if (std::abs(res.start_values[i] - best) <= 1e-8) {
      res.tie_distance = std::max(res.tie_distance, norm(res.start_maximizers[i] - best_run.x));
    }
  }
  res.possibly_nondifferentiable = res.tie_distance > 1e-4;
  return res;
}

std::string memo_key(const SymMatrix& h) {
  const std::vector<double> u = h.upper();
  std::string k(u.size() * sizeof(double), '\0');
  std::memcpy(k.data(), u.data(), k.size());
  return k;
}

}  // namespace

VariationalResult monotone_conjugate(const ConeFunction& g, const SymMatrix& h, double radius, int starts,
                                     std::uint64_t seed, const AscentOptions& opts) {
  if (h.dim() != g.dim) throw UsageError("monotone_conjugate: dimension mismatch");
  const double r0 = radius > 0.0 ? radius : initial_radius(g, h);
  const ConeObjective J = conjugate_objective(g, h);
  const std::vector<SymMatrix> anchors{SymMatrix(h.dim()), project_cone_ball(h, r0)};
  const std::vector<SymMatrix> pts = start_points(h.dim(), std::max(starts, 1), seed, r0, {}, anchors);

  VariationalResult res;
  res.formula = Formula::conjugate;
  res.starts = int(pts.size());
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const ConjugateRun run = conjugate_from(J, pts[i], r0, opts);
    res.iterations += run.ascent.iterations;
    res.start_values.push_back(run.diverged ? std::numeric_limits<double>::infinity() : run.ascent.value);
    res.start_maximizers.push_back(run.ascent.x);
    res.search_radius = std::max(res.search_radius, run.radius);
    if (run.diverged) {
      res.diverged = true;
      res.value = std::numeric_limits<double>::infinity();
      res.best_start_index = int(i);
      res.maximizer = ConePoint(run.ascent.x);
      res.stationarity_residual = run.ascent.stationarity;
      return res;
    }
    if (run.ascent.value > best) {
      best = run.ascent.value;
      res.best_start_index = int(i);
      res.value = run.ascent.value;
      res.maximizer = ConePoint(run.ascent.x);
      res.stationarity_residual = run.ascent.stationarity;
    }
  }
  return res;
}

struct ConjugateSolver::Impl {
  ConeFunction g;
  AscentOptions opts;
  std::unordered_map<std::string, Value> memo;
  std::optional<SymMatrix> last;
  std::size_t evaluations = 0;
  std::size_t hits = 0;
};

ConjugateSolver::ConjugateSolver(ConeFunction g, AscentOptions opts) : impl_(std::make_unique<Impl>()) {
  impl_->g = std::move(g);
  impl_->opts = opts;
}
ConjugateSolver::~ConjugateSolver() = default;
ConjugateSolver::ConjugateSolver(ConjugateSolver&&) noexcept = default;
ConjugateSolver& ConjugateSolver::operator=(ConjugateSolver&&) noexcept = default;

ConjugateSolver::Value ConjugateSolver::operator()(const SymMatrix& h) {
  Impl& s = *impl_;
  const std::string key = memo_key(h);
  if (auto it = s.memo.find(key); it != s.memo.end()) {
    ++s.hits;
    return it->second;
  }
  ++s.evaluations;
  const ConeObjective J = conjugate_objective(s.g, h);
  const SymMatrix start = s.last ? *s.last : SymMatrix(h.dim());
  const ConjugateRun run = conjugate_from(J, start, initial_radius(s.g, h), s.opts);
  Value v;
  v.diverged = run.diverged;
  v.value = run.diverged ? std::numeric_limits<double>::infinity() : run.ascent.value;
  v.maximizer = run.ascent.x;
  v.stationarity = run.ascent.stationarity;
  if (!run.diverged) s.last = run.ascent.x;
  if (s.memo.size() > (1u << 20)) s.memo.clear();
  s.memo.emplace(key, v);
  return v;
}

std::size_t ConjugateSolver::evaluations() const noexcept { return impl_->evaluations; }
std::size_t ConjugateSolver::memo_hits() const noexcept { return impl_->hits; }

struct VariationalSolver::Impl {
  ConeFunction psi;
  InteractionSpec spec;
  VariationalSettings settings;
  ConjugateSolver psi_conj;
  ConjugateSolver h_conj;
  ProbeReport probe;

  Impl(ConeFunction p, InteractionSpec s, VariationalSettings st)
      : psi(std::move(p)),
        spec(std::move(s)),
        settings(st),
        psi_conj(psi, settings.inner),
        h_conj(nonlinearity_function(spec), settings.inner),
        probe(convexity_probe(spec, std::max(1, settings.probe_samples), settings.seed)) {}

  static ConeFunction nonlinearity_function(const InteractionSpec& spec) {
    ConeFunction f;
    f.dim = spec.D;
    f.value = [spec](const SymMatrix& q) { return h_value(spec, q); };
    f.gradient = [spec](const SymMatrix& q) { return h_grad(spec, q); };
    f.label = "H";
    return f;
  }

  SymMatrix psi_grad(const SymMatrix& h) const {
    return psi.gradient ? psi.gradient(h) : fd_gradient(psi, h);
  }

  // Bound on |grad H(q)| over |q| <= D sqrt(D).
  double grad_h_bound() const {
    const double r = spec.D * std::sqrt(double(spec.D));
    return spec.p * std::sqrt(frobenius_sq(spec.gram)) * std::pow(r, spec.p - 1);
  }
};

VariationalSolver::VariationalSolver(ConeFunction psi, InteractionSpec spec, VariationalSettings settings)
    : impl_(std::make_unique<Impl>(std::move(psi), std::move(spec), settings)) {
  if (impl_->psi.dim != impl_->spec.D) throw UsageError("variational: psi and interaction differ in D");
}
VariationalSolver::~VariationalSolver() = default;
VariationalSolver::VariationalSolver(VariationalSolver&&) noexcept = default;

const ConeFunction& VariationalSolver::psi() const noexcept { return impl_->psi; }
const InteractionSpec& VariationalSolver::spec() const noexcept { return impl_->spec; }
const VariationalSettings& VariationalSolver::settings() const noexcept { return impl_->settings; }
const ProbeReport& VariationalSolver::convexity() const noexcept { return impl_->probe; }

ConjugateSolver::Value VariationalSolver::psi_conjugate(const SymMatrix& hp) { return impl_->psi_conj(hp); }
ConjugateSolver::Value VariationalSolver::h_conjugate(const SymMatrix& q) { return impl_->h_conj(q); }

VariationalResult VariationalSolver::hopf(double t, const SymMatrix& h, std::span<const SymMatrix> hints,
                                          int starts) {
  Impl& s = *impl_;
  if (!(t >= 0.0)) throw UsageError("hopf: t must be nonnegative");
  if (h.dim() != s.spec.D) throw UsageError("hopf: h has the wrong dimension");
  (void)ConePoint(h);  // domain check
  const int D = s.spec.D;
  const double radius = D * std::sqrt(double(D)) + 1.0;
  const ConeObjective J = [&](const SymMatrix& x) {
    ConeEval e;
    const ConjugateSolver::Value cv = s.psi_conj(x);
    if (cv.diverged) {
      e.ok = false;
      return e;
    }
    e.value = inner(x, h) - cv.value + t * h_value(s.spec, x);
    e.grad = h - cv.maximizer + t * h_grad(s.spec, x);
    return e;
  };
  std::vector<SymMatrix> anchors{s.psi_grad(h), SymMatrix(D)};
  for (double c : {0.25, 0.5, 0.75}) anchors.push_back(SymMatrix::identity(D) * c);
  const int count = starts > 0 ? starts : s.settings.starts;
  const auto pts = start_points(D, std::max(count, 1), s.settings.seed, double(D), hints, anchors);
  return multi_start(J, pts, radius, s.settings.outer, Formula::hopf);
}

VariationalResult VariationalSolver::hopf_lax(double t, const SymMatrix& h, HopfLaxForm form,
                                              std::span<const SymMatrix> hints, int starts) {
  Impl& s = *impl_;
  if (!s.probe.passed) {
    std::ostringstream os;
    os << "Hopf-Lax needs a convex nonlinearity; the midpoint probe failed in " << s.probe.failures << " of "
       << s.probe.samples << " trials (worst excess " << s.probe.worst << ")";
    throw FormulaUnavailableError(os.str());
  }
  if (!(t >= 0.0)) throw UsageError("hopf_lax: t must be nonnegative");
  if (h.dim() != s.spec.D) throw UsageError("hopf_lax: h has the wrong dimension");
  (void)ConePoint(h);
  const int D = s.spec.D;
  const Formula formula = form == HopfLaxForm::standard ? Formula::hopf_lax : Formula::hopf_lax_scaled;
  if (t == 0.0) {
    VariationalResult r;
    r.formula = formula;
    r.value = s.psi.value(h);
    r.maximizer = ConePoint(SymMatrix(D));
    r.starts = 1;
    r.best_start_index = 0;
    r.start_values = {r.value};
    r.start_maximizers = {SymMatrix(D)};
    return r;
  }
  const double B = s.grad_h_bound();
  const SymMatrix drift = h_grad(s.spec, s.psi_grad(h));
  ConeObjective J;
  double radius;
  std::vector<SymMatrix> anchors;
  if (form == HopfLaxForm::standard) {
    radius = t * B + 1.0;
    anchors = {t * drift, SymMatrix(D)};
    J = [&, t](const SymMatrix& x) {
      ConeEval e;
      const ConjugateSolver::Value cv = s.h_conj(x * (1.0 / t));
      if (cv.diverged) {
        e.ok = false;
        return e;
      }
      const SymMatrix y = h + x;
      e.value = s.psi.value(y) - t * cv.value;
      e.grad = s.psi_grad(y) - cv.maximizer;
      return e;
    };
  } else {
    radius = B + 1.0;
    anchors = {drift, SymMatrix(D)};
    J = [&, t](const SymMatrix& x) {
      ConeEval e;
      const ConjugateSolver::Value cv = s.h_conj(x);
      if (cv.diverged) {
        e.ok = false;
        return e;
      }
      const SymMatrix y = h + t * x;
      e.value = s.psi.value(y) - t * cv.value;
      e.grad = t * (s.psi_grad(y) - cv.maximizer);
      return e;
    };
  }
  const int count = starts > 0 ? starts : s.settings.starts;
  const auto pts = start_points(D, std::max(count, 1), s.settings.seed, radius, hints, anchors);
  return multi_start(J, pts, radius, s.settings.outer, formula);
}

VariationalResult VariationalSolver::evaluate(Formula f, double t, const SymMatrix& h,
                                              std::span<const SymMatrix> hints, int starts) {
  switch (f) {
    case Formula::hopf: return hopf(t, h, hints, starts);
    case Formula::hopf_lax: return hopf_lax(t, h, HopfLaxForm::standard, hints, starts);
    case Formula::hopf_lax_scaled: return hopf_lax(t, h, HopfLaxForm::scaled, hints, starts);
    case Formula::conjugate: break;
  }
  throw UsageError("evaluate: the conjugate is not a free-energy formula");
}

VariationalResult hopf_value(const ConeFunction& psi, const InteractionSpec& spec, double t, const SymMatrix& h,
                             const VariationalSettings& settings) {
  VariationalSolver solver(psi, spec, settings);
  return solver.hopf(t, h);
}

VariationalResult hopf_lax_value(const ConeFunction& psi, const InteractionSpec& spec, double t,
                                 const SymMatrix& h, HopfLaxForm form, const VariationalSettings& settings) {
  VariationalSolver solver(psi, spec, settings);
  return solver.hopf_lax(t, h, form);
}

FdDerivatives fd_derivatives(VariationalSolver& solver, const VariationalResult& center, double t,
                             const SymMatrix& h, double step) {
  FdDerivatives d;
  d.f = center.value;
  d.tie = center.possibly_nondifferentiable;
  const SymMatrix hint[] = {center.maximizer.matrix()};
  auto f = [&](double tt, const SymMatrix& hh) { return solver.evaluate(center.formula, tt, hh, hint, 2).value; };

  d.t_two_sided = t - step >= 0.0;
  const double ftp = f(t + step, h);
  if (d.t_two_sided) {
    const double ftm = f(t - step, h);
    d.dt = (ftp - ftm) / (2 * step);
    d.max_asymmetry = std::abs((ftp - d.f) / step - (d.f - ftm) / step);
  } else {
    d.dt = (ftp - d.f) / step;
  }

  d.h_two_sided = true;
  d.grad_h = SymMatrix(h.dim());
  for (const SymMatrix& e : basis(h.dim())) {
    const SymMatrix hp = h + step * e;
    const SymMatrix hm = h - step * e;
    const double fp = f(t, hp);
    double deriv;
    if (min_eigenvalue(hm) >= 0.0) {
      const double fm = f(t, hm);
      deriv = (fp - fm) / (2 * step);
      d.max_asymmetry = std::max(d.max_asymmetry, std::abs((fp - d.f) / step - (d.f - fm) / step));
    } else {
      d.h_two_sided = false;
      deriv = (fp - d.f) / step;
    }
    d.grad_h += (deriv / inner(e, e)) * e;
  }
  d.differentiable = d.t_two_sided && d.h_two_sided && d.max_asymmetry <= 1e-3;
  return d;
}

MaximizerReport maximizer_diagnostics(VariationalSolver& solver, const VariationalResult& result, double t,
                                      const SymMatrix& h, double fd_step) {
  MaximizerReport r;
  r.formula = result.formula;
  r.fd = fd_derivatives(solver, result, t, h, fd_step);
  const InteractionSpec& spec = solver.spec();
  const SymMatrix& m = result.maximizer.matrix();
  switch (result.formula) {
    case Formula::hopf:
      r.a1 = norm(m - r.fd.grad_h);
      r.a2 = std::abs(h_value(spec, m) - r.fd.dt);
      break;
    case Formula::hopf_lax:
    case Formula::hopf_lax_scaled: {
      const SymMatrix diamond = result.formula == Formula::hopf_lax ? m : t * m;
      const ConeFunction& psi = solver.psi();
      const SymMatrix g = psi.gradient ? psi.gradient(h + diamond) : fd_gradient(psi, h + diamond);
      r.b1 = norm(g - r.fd.grad_h);
      break;
    }
    case Formula::conjugate: throw UsageError("maximizer_diagnostics: not a free-energy result");
  }
  r.hj_residual = std::abs(r.fd.dt - h_value(spec, r.fd.grad_h));
  r.assertable = r.fd.differentiable && !result.possibly_nondifferentiable;
  return r;
}

}  // namespace hjlab
