#include <doctest.h>

#include <cmath>

#include "hjlab/characteristics.hpp"
#include "hjlab/errors.hpp"
#include "hjlab/psi.hpp"
#include "hjlab/variational.hpp"

using namespace hjlab;

namespace {

InteractionSpec square_interaction() { return make_interaction(1, 2, Dense::from_rows({{1.0}})); }

}  // namespace

TEST_CASE("linear initial condition is transported exactly") {
  // psi(h) = c h, so grad psi is constant and u(t, k) = c k + t c^2.
  const double c = 0.4;
  auto val = [&](const SymMatrix& h) { return c * h(0, 0); };
  auto grad = [&](const SymMatrix&) { return SymMatrix::scalar(c); };
  for (double t : {0.0, 0.3, 2.0}) {
    for (double k : {0.0, 0.5, 1.7}) {
      CharSolution s = u_value(val, grad, square_interaction(), t, ConePoint(SymMatrix::scalar(k)));
      CHECK(s.u == doctest::Approx(c * k + t * c * c).epsilon(1e-14));
      CHECK(s.z.matrix()(0, 0) == doctest::Approx(k + 2 * t * c).epsilon(1e-14));
    }
  }
}

TEST_CASE("quadratic initial condition has a closed-form characteristic") {
  // psi(h) = a h^2 / 2: z = k / (1 - 2 a t), u = a z^2 / 2 - t a^2 z^2.
  const double a = 0.5;
  auto val = [&](const SymMatrix& h) { return 0.5 * a * h(0, 0) * h(0, 0); };
  auto grad = [&](const SymMatrix& h) { return a * h; };
  const double t = 0.3, k = 0.8;
  CharSolution s = u_value(val, grad, square_interaction(), t, ConePoint(SymMatrix::scalar(k)), 1e-13, 1000);
  const double z = k / (1 - 2 * a * t);
  CHECK(s.z.matrix()(0, 0) == doctest::Approx(z).epsilon(1e-12));
  CHECK(s.u == doctest::Approx(0.5 * a * z * z - t * a * a * z * z).epsilon(1e-12));
  CHECK(s.residual <= 1e-13);
  CHECK(s.contraction_quotient == doctest::Approx(2 * a * t).epsilon(1e-3));

  // The forward map sends z back to k.
  CHECK(char_forward(grad, square_interaction(), t, s.z)(0, 0) == doctest::Approx(k).epsilon(1e-12));
}

TEST_CASE("non-contracting inversion reports its quotient") {
  auto grad = [](const SymMatrix& h) { return h; };
  try {
    char_invert(grad, square_interaction(), 0.6, ConePoint(SymMatrix::scalar(0.5)), 1e-10, 200);
    FAIL("expected NonContractionError");
  } catch (const NonContractionError& e) {
    CHECK(e.empirical_quotient() > 1.0);
  }
}

TEST_CASE("short-time solution matches Hopf on the reference instance") {
  PsiOracle psi(rademacher_prior(1));
  auto val = [&](const SymMatrix& h) { return psi.value(h); };
  auto grad = [&](const SymMatrix& h) { return psi.grad(h); };
  LipschitzEstimate L = estimate_lipschitz(square_interaction(), grad, 2.0, 200, 1);
  const double t_max = short_time_limit(L.L_hat);
  CHECK(t_max == doctest::Approx(0.9 / (1.1 * L.L_hat)));

  VariationalSolver solver(psi.as_function(), square_interaction());
  for (double frac : {0.2, 0.6}) {
    const double t = frac * t_max;
    for (double h : {0.2, 0.6}) {
      CharSolution s = u_value(val, grad, square_interaction(), t, ConePoint(SymMatrix::scalar(h)));
      CHECK(s.u == doctest::Approx(solver.hopf(t, SymMatrix::scalar(h)).value).epsilon(1e-4));
      CHECK(s.residual <= 1e-10);
      CHECK(s.min_iterate_eigenvalue >= -1e-10);
    }
  }
  CHECK_THROWS_AS(smoothness_report(val, grad, square_interaction(), t_max, {1.5 * t_max},
                                    {SymMatrix::scalar(0.3)}),
                  UsageError);
}
