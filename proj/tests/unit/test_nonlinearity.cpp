#include <doctest.h>

#include <cmath>
#include <random>

#include "hjlab/errors.hpp"
#include "hjlab/nonlinearity.hpp"

using namespace hjlab;

namespace {

// Direct sum over multi-indices: sum_{I,J} gram[I,J] prod_k q[i_k, j_k].
double brute_h(const Dense& gram, int D, int p, const SymMatrix& q) {
  int rows = 1;
  for (int k = 0; k < p; ++k) rows *= D;
  double s = 0.0;
  for (int I = 0; I < rows; ++I) {
    for (int J = 0; J < rows; ++J) {
      double prod = 1.0;
      int a = I, b = J;
      for (int k = 0; k < p; ++k) {
        prod *= q(a % D, b % D);
        a /= D;
        b /= D;
      }
      s += gram(I, J) * prod;
    }
  }
  return s;
}

Dense random_dense(int r, int c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Dense a(r, c);
  for (double& v : a.data) v = g(rng);
  return a;
}

}  // namespace

TEST_CASE("h_value matches the multi-index sum") {
  std::mt19937_64 rng(1);
  for (int D = 1; D <= 3; ++D) {
    for (int p = 1; p <= 3; ++p) {
      int rows = 1;
      for (int k = 0; k < p; ++k) rows *= D;
      InteractionSpec spec = make_interaction(D, p, random_dense(rows, 2, rng));
      for (int rep = 0; rep < 5; ++rep) {
        SymMatrix q = random_wishart(D, 50 + rep);
        const double want = brute_h(spec.gram, D, p, q);
        CHECK(h_value(spec, q) == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("identity interaction gives the squared Frobenius norm") {
  InteractionSpec spec = make_interaction(2, 2, Dense(4, 1, {1, 0, 0, 1}));
  SymMatrix q = SymMatrix::from_rows({{0.5, 0.2}, {0.2, 0.3}});
  CHECK(h_value(spec, q) == doctest::Approx(0.25 + 0.08 + 0.09));
  CHECK(max_abs(h_grad(spec, q) - 2.0 * q) < 1e-14);
}

TEST_CASE("h_grad agrees with central differences on 100 inputs") {
  std::mt19937_64 rng(2);
  const double e = 1e-5;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int D = 1 + i % 3;
    const int p = 1 + (i / 3) % 3;
    int rows = 1;
    for (int k = 0; k < p; ++k) rows *= D;
    InteractionSpec spec = make_interaction(D, p, random_dense(rows, 1 + i % 2, rng));
    SymMatrix q = random_wishart(D, 300 + i);
    SymMatrix g = h_grad(spec, q);
    for (const SymMatrix& b : basis(D)) {
      const double fd = (brute_h(spec.gram, D, p, q + e * b) - brute_h(spec.gram, D, p, q - e * b)) / (2 * e);
      const double an = inner(g, b);
      worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(fd)));
    }
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("declared gram must match A A^T") {
  Dense A = Dense::from_rows({{1.0}});
  CHECK_NOTHROW(make_interaction(1, 2, A, Dense::from_rows({{1.0}})));
  CHECK_THROWS_AS(make_interaction(1, 2, A, Dense::from_rows({{1.5}})), ConfigError);
  CHECK_THROWS_AS(make_interaction(1, 2, Dense::from_rows({{1.0}, {2.0}})), ConfigError);
  CHECK_THROWS_AS(make_interaction(2, 0, Dense(1, 1)), ConfigError);
}

TEST_CASE("probes separate convex and non-convex interactions") {
  InteractionSpec good = make_interaction(2, 2, Dense(4, 1, {1, 0, 0, 1}));
  CHECK(cone_monotone_check(good, 200, 1).passed);
  CHECK(convexity_probe(good, 200, 1).passed);

  // vec of [[0, 1], [-1, 0]]: H(diag(x, y)) = 2xy, not convex on the cone.
  InteractionSpec bad = make_interaction(2, 2, Dense(4, 1, {0, 1, -1, 0}));
  CHECK(brute_h(bad.gram, 2, 2, SymMatrix::diagonal(std::vector<double>{1.0, 2.0})) == doctest::Approx(4.0));
  ProbeReport r = convexity_probe(bad, 200, 1);
  CHECK_FALSE(r.passed);
  CHECK(r.worst > 0.0);
}

TEST_CASE("Lipschitz estimate recovers a linear map exactly") {
  // H(q) = q^2 and psi_grad(h) = c h give h -> 2 c h.
  InteractionSpec spec = make_interaction(1, 2, Dense::from_rows({{1.0}}));
  const double c = 0.35;
  LipschitzEstimate est = estimate_lipschitz(spec, [&](const SymMatrix& h) { return c * h; }, 2.0, 50, 4);
  CHECK(est.L_hat == doctest::Approx(2 * c).epsilon(1e-9));
}
