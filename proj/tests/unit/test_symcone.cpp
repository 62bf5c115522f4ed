#include <doctest.h>

#include <cmath>
#include <random>

#include "hjlab/errors.hpp"
#include "hjlab/nonlinearity.hpp"
#include "hjlab/symcone.hpp"

using namespace hjlab;

namespace {

SymMatrix product(const SymMatrix& a, const SymMatrix& b, int n) {
  // Only used where a*b + b*a is wanted, so symmetrize.
  SymMatrix r(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += a(i, k) * b(k, j) + b(i, k) * a(k, j);
      r.set(i, j, s);
    }
  }
  return r;
}

SymMatrix random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  SymMatrix s(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) s.set(i, j, g(rng));
  }
  return s;
}

}  // namespace

TEST_CASE("2x2 square root matches the closed form") {
  // sqrt(M) = (M + s I) / sqrt(tr M + 2 s) with s = sqrt(det M).
  const double a = 2.0, b = 0.7, c = 1.3;
  const double s = std::sqrt(a * c - b * b);
  const double d = std::sqrt(a + c + 2 * s);
  SymMatrix m = SymMatrix::from_rows({{a, b}, {b, c}});
  SymMatrix r = sqrt_psd(ConePoint(m)).matrix();
  CHECK(r(0, 0) == doctest::Approx((a + s) / d).epsilon(1e-14));
  CHECK(r(0, 1) == doctest::Approx(b / d).epsilon(1e-14));
  CHECK(r(1, 1) == doctest::Approx((c + s) / d).epsilon(1e-14));
}

TEST_CASE("sqrt round trip and Sylvester residual") {
  std::mt19937_64 rng(7);
  for (int n = 1; n <= 5; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      SymMatrix h = random_wishart(n, 1000 * n + rep) + 0.05 * SymMatrix::identity(n);
      ConePoint hp(h);
      SymMatrix r = sqrt_psd(hp).matrix();
      CHECK(max_abs(square(r) - h) < 1e-10);

      SymMatrix a = random_symmetric(n, rng);
      SymMatrix m = dsqrt(hp, a);
      CHECK(max_abs(product(m, r, n) - a) < 1e-10);
    }
  }
}

TEST_CASE("dsqrt agrees with a difference quotient") {
  SymMatrix h = random_wishart(3, 11) + 0.2 * SymMatrix::identity(3);
  std::mt19937_64 rng(3);
  SymMatrix a = random_symmetric(3, rng);
  const double e = 1e-6;
  SymMatrix fd = (sqrt_psd(ConePoint(h + e * a)).matrix() - sqrt_psd(ConePoint(h - e * a)).matrix()) * (0.5 / e);
  CHECK(max_abs(fd - dsqrt(ConePoint(h), a)) < 1e-7);
}

TEST_CASE("eigensystem reconstructs the input") {
  std::mt19937_64 rng(5);
  for (int n = 1; n <= kMaxDim; ++n) {
    SymMatrix s = random_symmetric(n, rng);
    Eigensystem e = eigensystem(s);
    for (int k = 1; k < n; ++k) CHECK(e.values[k - 1] <= e.values[k]);
    CHECK(max_abs(reconstruct(e, {e.values.data(), std::size_t(n)}) - s) < 1e-12);
  }
}

TEST_CASE("projection clips negative eigenvalues") {
  SymMatrix s = SymMatrix::diagonal(std::vector<double>{-1.0, 2.0});
  SymMatrix p = project_psd(s).matrix();
  CHECK(p(0, 0) == doctest::Approx(0.0));
  CHECK(p(1, 1) == doctest::Approx(2.0));

  // Frobenius-nearest: the residual is orthogonal to the projection.
  std::mt19937_64 rng(9);
  SymMatrix r = random_symmetric(4, rng);
  SymMatrix q = project_psd(r).matrix();
  CHECK(std::abs(inner(r - q, q)) < 1e-12);
  CHECK(min_eigenvalue(q) > -1e-12);
}

TEST_CASE("cone points reject clearly indefinite input and clamp round-off") {
  CHECK_THROWS_AS(ConePoint(SymMatrix::scalar(-1e-6)), DomainError);
  ConePoint tiny(SymMatrix::scalar(-1e-14));
  CHECK(tiny.interior_margin() >= 0.0);
  CHECK_FALSE(tiny.interior());
  CHECK_THROWS_AS(SymMatrix::from_rows({{1.0, 0.5}, {0.4, 1.0}}), UsageError);

  // A large rank-one matrix: its zero eigenvalue carries round-off of order
  // 1e-16 |m|, which must be clamped rather than rejected.
  const double a = 30025.679323562796, b = 18017.110465907885, c = 10811.288099183261;
  CHECK_NOTHROW(ConePoint(SymMatrix::from_rows({{a, b}, {b, c}})));
  CHECK_THROWS_AS(ConePoint(SymMatrix::from_rows({{a, b}, {b, b * b / a - 1e-6}})), DomainError);
}

TEST_CASE("basis is orthogonal with the expected size") {
  for (int n = 1; n <= 4; ++n) {
    auto b = basis(n);
    REQUIRE(int(b.size()) == n * (n + 1) / 2);
    for (std::size_t i = 0; i < b.size(); ++i) {
      for (std::size_t j = 0; j < b.size(); ++j) {
        if (i != j) CHECK(inner(b[i], b[j]) == 0.0);
      }
    }
  }
}
