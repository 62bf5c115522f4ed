#include <doctest.h>

#include <cmath>
#include <random>

#include "hjlab/errors.hpp"
#include "hjlab/psi.hpp"
#include "hjlab/variational.hpp"

using namespace hjlab;

namespace {

ConeFunction quadratic(int dim) {
  ConeFunction g;
  g.dim = dim;
  g.value = [](const SymMatrix& x) { return 0.5 * inner(x, x); };
  g.gradient = [](const SymMatrix& x) { return x; };
  g.label = "half squared norm";
  return g;
}

InteractionSpec square_interaction() { return make_interaction(1, 2, Dense::from_rows({{1.0}})); }

// Rademacher psi in D = 1 by the trapezoid rule, independent of the library.
double psi_trapezoid(double h) {
  const int n = 2000;
  const double a = -10.0, dz = 20.0 / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = a + i * dz;
    const double u = 2 * h + std::sqrt(2 * h) * z;
    const double lc = std::abs(u) + std::log1p(std::exp(-2 * std::abs(u))) - std::log(2.0);
    s += (i == 0 || i == n ? 0.5 : 1.0) * std::exp(-0.5 * z * z) * lc;
  }
  return s * dz / std::sqrt(2 * M_PI) - h;
}

// Hopf formula for H(q) = q^2 by brute-force grids: psi* on a k-grid, then
// a coarse-to-fine search over h' in [0, 1).
struct GridHopf {
  std::vector<double> k, psi_k;
  GridHopf() {
    for (double v = 0.0; v <= 8.0 + 1e-12; v += 1e-3) {
      k.push_back(v);
      psi_k.push_back(psi_trapezoid(v));
    }
  }
  double conj(double hp) const {
    double best = -INFINITY;
    for (std::size_t i = 0; i < k.size(); ++i) best = std::max(best, hp * k[i] - psi_k[i]);
    return best;
  }
  double operator()(double t, double h) const {
    auto obj = [&](double hp) { return hp * h - conj(hp) + t * hp * hp; };
    double best = -INFINITY, arg = 0.0;
    for (double hp = 0.0; hp < 0.995; hp += 1e-3) {
      const double v = obj(hp);
      if (v > best) best = v, arg = hp;
    }
    for (double hp = std::max(0.0, arg - 2e-3); hp <= arg + 2e-3; hp += 1e-5) best = std::max(best, obj(hp));
    return best;
  }
};

}  // namespace

TEST_CASE("conjugate of half the squared norm") {
  VariationalResult r = monotone_conjugate(quadratic(1), SymMatrix::scalar(0.7), 0.0, 2, 1);
  CHECK_FALSE(r.diverged);
  CHECK(r.value == doctest::Approx(0.245).epsilon(1e-10));
  CHECK(r.maximizer.matrix()(0, 0) == doctest::Approx(0.7).epsilon(1e-8));

  // The cone constraint: sup over x >= 0 of -0.3 x - x^2/2 is 0.
  CHECK(std::abs(monotone_conjugate(quadratic(1), SymMatrix::scalar(-0.3), 0.0, 2, 1).value) < 1e-14);

  // D = 2: the value is |P(h)|^2 / 2 with P the projection onto the cone.
  SymMatrix h = SymMatrix::diagonal(std::vector<double>{0.5, -0.2});
  CHECK(monotone_conjugate(quadratic(2), h, 0.0, 4, 1).value == doctest::Approx(0.125).epsilon(1e-9));
}

TEST_CASE("divergence sentinel fires on a linear function") {
  ConeFunction g;
  g.dim = 1;
  g.value = [](const SymMatrix& x) { return 0.5 * x(0, 0); };
  g.gradient = [](const SymMatrix&) { return SymMatrix::scalar(0.5); };
  CHECK(monotone_conjugate(g, SymMatrix::scalar(1.0), 1.0, 1, 1).diverged);
  CHECK_FALSE(monotone_conjugate(g, SymMatrix::scalar(0.2), 1.0, 1, 1).diverged);
}

TEST_CASE("projection onto cone and ball") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 20; ++rep) {
    SymMatrix s(3);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) s.set(i, j, 3 * n(rng));
    SymMatrix p = project_cone_ball(s, 1.5);
    CHECK(norm(p) <= 1.5 + 1e-12);
    CHECK(min_eigenvalue(p) > -1e-12);
    CHECK(max_abs(project_cone_ball(p, 1.5) - p) < 1e-12);
  }
}

TEST_CASE("Hopf value matches a brute-force grid") {
  PsiOracle psi(rademacher_prior(1));
  VariationalSolver solver(psi.as_function(), square_interaction());
  GridHopf grid;
  for (auto [t, h] : {std::pair{0.2, 0.3}, {0.1, 0.8}, {0.4, 0.5}}) {
    const double want = grid(t, h);
    CHECK(solver.hopf(t, SymMatrix::scalar(h)).value == doctest::Approx(want).epsilon(2e-6));
  }
}

TEST_CASE("Hopf at t = 0 is psi and the Hopf-Lax forms agree") {
  PsiOracle psi(rademacher_prior(1));
  VariationalSolver solver(psi.as_function(), square_interaction());
  for (double h : {0.1, 0.5, 1.0}) {
    CHECK(solver.hopf(0.0, SymMatrix::scalar(h)).value == doctest::Approx(psi_trapezoid(h)).epsilon(1e-6));
  }
  for (double t : {0.1, 0.3}) {
    const SymMatrix h = SymMatrix::scalar(0.4);
    const double f = solver.hopf(t, h).value;
    CHECK(solver.hopf_lax(t, h, HopfLaxForm::standard).value == doctest::Approx(f).epsilon(2e-5));
    CHECK(solver.hopf_lax(t, h, HopfLaxForm::scaled).value == doctest::Approx(f).epsilon(2e-5));
  }
}

TEST_CASE("Hopf-Lax is refused when the interaction fails the convexity probe") {
  PsiOracle psi(rademacher_prior(2));
  VariationalSolver solver(psi.as_function(), make_interaction(2, 2, Dense(4, 1, {0, 1, -1, 0})));
  CHECK_FALSE(solver.hopf_lax_available());
  CHECK_THROWS_AS(solver.hopf_lax(0.1, SymMatrix::identity(2), HopfLaxForm::standard), FormulaUnavailableError);
}

TEST_CASE("maximizer diagnostics at a smooth point") {
  PsiOracle psi(rademacher_prior(1));
  VariationalSolver solver(psi.as_function(), square_interaction());
  const SymMatrix h = SymMatrix::scalar(0.3);
  VariationalResult r = solver.hopf(0.2, h);
  MaximizerReport m = maximizer_diagnostics(solver, r, 0.2, h);
  REQUIRE(m.assertable);
  CHECK(*m.a1 < 1e-3);
  CHECK(*m.a2 < 1e-3);
  CHECK(m.hj_residual < 1e-3);
}
