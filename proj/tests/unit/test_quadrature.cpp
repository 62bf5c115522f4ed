#include <doctest.h>

#include <cmath>

#include "hjlab/errors.hpp"
#include "hjlab/observables.hpp"
#include "hjlab/psi.hpp"
#include "hjlab/quadrature.hpp"

using namespace hjlab;

namespace {

double double_factorial(int n) {
  double r = 1.0;
  for (int k = n; k > 1; k -= 2) r *= k;
  return r;
}

// psi for the Rademacher prior in D = 1 by the trapezoid rule on [-12, 12]:
// E log cosh(2h + sqrt(2h) z) - h, using X = 1 by symmetry.
double psi_trapezoid(double h) {
  const int n = 24000;
  const double a = -12.0, dz = 24.0 / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = a + i * dz;
    const double u = 2 * h + std::sqrt(2 * h) * z;
    const double lc = std::abs(u) + std::log1p(std::exp(-2 * std::abs(u))) - std::log(2.0);
    s += (i == 0 || i == n ? 0.5 : 1.0) * std::exp(-0.5 * z * z) * lc;
  }
  return s * dz / std::sqrt(2 * M_PI) - h;
}

ModelSpec reference(int N) {
  return make_model(rademacher_prior(1), make_interaction(1, 2, Dense::from_rows({{1.0}})), N);
}

}  // namespace

TEST_CASE("Gauss-Hermite rule integrates Gaussian moments") {
  for (int n : {1, 2, 5, 12, 40, 128}) {
    const GaussRule& r = gauss_hermite(n);
    REQUIRE(int(r.nodes.size()) == n);
    double w = 0.0;
    for (double v : r.weights) w += v;
    CHECK(w == doctest::Approx(1.0).epsilon(1e-13));
    for (int i = 0; i < n; ++i) CHECK(r.nodes[i] == doctest::Approx(-r.nodes[n - 1 - i]).epsilon(1e-12));
    // Exact for polynomials of degree up to 2n - 1; keep the moments modest.
    for (int k = 1; 2 * k <= std::min(2 * n - 1, 16); ++k) {
      double m = 0.0;
      for (int i = 0; i < n; ++i) m += r.weights[i] * std::pow(r.nodes[i], 2 * k);
      CHECK(m == doctest::Approx(double_factorial(2 * k - 1)).epsilon(1e-10));
    }
  }
  CHECK_THROWS(gauss_hermite(0));
  CHECK_THROWS(gauss_hermite(129));
}

TEST_CASE("psi matches a trapezoid integral") {
  PriorSpec prior = rademacher_prior(1);
  // log cosh is nearly a kink at large h, so Gauss-Hermite loses digits there.
  for (double h : {0.05, 0.3, 1.0}) {
    CHECK(psi(prior, ConePoint(SymMatrix::scalar(h))) == doctest::Approx(psi_trapezoid(h)).epsilon(1e-12));
  }
  CHECK(psi(prior, ConePoint(SymMatrix::scalar(2.5))) == doctest::Approx(psi_trapezoid(2.5)).epsilon(1e-8));
  CHECK(psi(prior, ConePoint(SymMatrix::scalar(0.0))) == 0.0);
}

TEST_CASE("quenched free energy at t = 0, N = 1 is psi") {
  QuenchedOptions q;
  q.nodes = 64;
  for (double h : {0.1, 0.7}) {
    const double F = free_energy(reference(1), 0.0, ConePoint(SymMatrix::scalar(h)), q).scalar();
    CHECK(F == doctest::Approx(psi_trapezoid(h)).epsilon(1e-9));
  }
}

TEST_CASE("quadrature refinement delta is small for smooth integrands") {
  QuenchedOptions q;
  q.nodes = 24;
  q.refine_nodes = 32;
  QuenchedEstimate e = free_energy(reference(1), 0.2, ConePoint(SymMatrix::scalar(0.3)), q);
  REQUIRE(e.refinement_delta.size() == e.value.size());
  CHECK(std::abs(e.refinement_delta[0]) < 1e-8);
}

TEST_CASE("Monte Carlo agrees with quadrature and is reproducible") {
  const ConePoint h(SymMatrix::scalar(0.3));
  QuenchedOptions qq;
  qq.nodes = 12;
  const double exact = free_energy(reference(2), 0.2, h, qq).scalar();

  QuenchedOptions mc;
  mc.method = Method::monte_carlo;
  mc.budget = 4000;
  mc.seed = 42;
  mc.threads = 1;
  QuenchedEstimate a = free_energy(reference(2), 0.2, h, mc);
  CHECK(std::abs(a.scalar() - exact) < 4 * a.std_error[0]);
  CHECK(a.n_replicas == 4000);

  mc.threads = 3;
  QuenchedEstimate b = free_energy(reference(2), 0.2, h, mc);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);

  mc.seed = 43;
  CHECK(free_energy(reference(2), 0.2, h, mc).scalar() != a.scalar());
}

TEST_CASE("quadrature refuses grids that are too large") {
  QuenchedOptions q;
  q.nodes = 128;
  CHECK_THROWS_AS(free_energy(reference(3), 0.2, ConePoint(SymMatrix::scalar(0.3)), q), CapacityError);
}

TEST_CASE("pairwise sum is exact on representable data") {
  std::vector<double> v(1000, 0.125);
  CHECK(pairwise_sum(v.data(), v.size()) == 125.0);
}
