#include <doctest.h>

#include <cmath>
#include <memory>

#include "hjlab/errors.hpp"
#include "hjlab/model.hpp"
#include "hjlab/observables.hpp"

using namespace hjlab;

namespace {

ModelSpec reference(int N) {
  return make_model(rademacher_prior(1), make_interaction(1, 2, Dense::from_rows({{1.0}})), N);
}

ModelSpec matrix(int N) {
  return make_model(rademacher_prior(2), make_interaction(2, 2, Dense(4, 1, {1, 0, 0, 1})), N);
}

Dense config_matrix(const ConfigTable& table, std::size_t c) {
  const ModelSpec& s = table.spec();
  auto x = table.x(c);
  return Dense(s.N, s.D(), std::vector<double>(x.begin(), x.end()));
}

// (1/N) log sum_x P(x) exp(H(x)) straight from the Hamiltonian.
double brute_f(const ModelSpec& spec, double t, const SymMatrix& h, const DisorderSample& d) {
  ConfigTable table(spec);
  double mx = -INFINITY;
  std::vector<double> lw(table.size());
  for (std::size_t c = 0; c < table.size(); ++c) {
    lw[c] = table.log_prior(c) + hamiltonian(spec, t, ConePoint(h), config_matrix(table, c), d);
    mx = std::max(mx, lw[c]);
  }
  double s = 0.0;
  for (double v : lw) s += std::exp(v - mx);
  return (mx + std::log(s)) / spec.N;
}

}  // namespace

TEST_CASE("prior validation") {
  CHECK_THROWS_AS(make_prior(1, {}, {}), ConfigError);
  CHECK_THROWS_AS(make_prior(1, {{2.0}}, {1.0}), ConfigError);
  CHECK_THROWS_AS(make_prior(1, {{1.0}, {-1.0}}, {0.5, -0.5}), ConfigError);
  CHECK_THROWS_AS(make_prior(2, {{1.0}}, {1.0}), ConfigError);
  PriorSpec p = make_prior(1, {{1.0}, {0.0}}, {0.75, 0.25});
  CHECK(prior_mean(p)[0] == doctest::Approx(0.75));
  CHECK(prior_second_moment(p)(0, 0) == doctest::Approx(0.75));
  SymMatrix S = prior_second_moment(rademacher_prior(3));
  CHECK(max_abs(S - SymMatrix::identity(3)) < 1e-15);
}

TEST_CASE("configuration table enumerates support^N and refuses oversize") {
  ConfigTable table(matrix(2));
  CHECK(table.size() == 16);
  for (std::size_t c = 0; c < table.size(); ++c) CHECK(table.index_of(config_matrix(table, c)) == c);
  CHECK_THROWS_AS(ConfigTable(reference(21)), CapacityError);
}

TEST_CASE("disorder draws are reproducible") {
  DisorderSample a = sample_disorder(matrix(2), 5), b = sample_disorder(matrix(2), 5);
  CHECK(a.X.data == b.X.data);
  CHECK(a.W.data == b.W.data);
  CHECK(a.Z.data == b.Z.data);
  CHECK(sample_disorder(matrix(2), 6).Z.data != a.Z.data);
}

TEST_CASE("one-row free energy at t = 0 is log cosh") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double h = 0.1 * double(seed);
    DisorderSample d = sample_disorder(reference(1), seed);
    const double s = std::sqrt(2 * h) * (d.X(0, 0) * std::sqrt(2 * h) + d.Z(0, 0));
    const double want = std::log(std::cosh(s)) - h;
    CHECK(gibbs_exact(reference(1), 0.0, ConePoint(SymMatrix::scalar(h)), d).f_N() ==
          doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("observation-space posterior matches the direct Hamiltonian") {
  const SymMatrix h = SymMatrix::from_rows({{0.4, 0.1}, {0.1, 0.3}});
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    DisorderSample d = sample_disorder(matrix(2), seed);
    const double f = gibbs_exact(matrix(2), 0.25, ConePoint(h), d).f_N();
    CHECK(f == doctest::Approx(brute_f(matrix(2), 0.25, h, d)).epsilon(1e-11));
  }
}

TEST_CASE("Gibbs mean of the l-observable is the h-derivative of F_N") {
  const double t = 0.2, e = 1e-5;
  for (int N : {1, 2, 3}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      ModelSpec spec = reference(N);
      DisorderSample d = sample_disorder(spec, 100 * N + seed);
      const SymMatrix h = SymMatrix::scalar(0.3);
      GibbsSummary g = gibbs_exact(spec, t, ConePoint(h), d);
      const SymMatrix one = SymMatrix::scalar(1.0);
      const double fd =
          (brute_f(spec, t, h + e * one, d) - brute_f(spec, t, h - e * one, d)) / (2 * e);
      CHECK(g.L_mean()(0, 0) == doctest::Approx(fd).epsilon(1e-6));

      // The same mean by summing l_observable over the posterior weights.
      ConfigTable table(spec);
      double s = 0.0;
      auto w = g.posterior().weights();
      for (std::size_t c = 0; c < table.size(); ++c) {
        s += w[c] * l_observable(spec, t, ConePoint(h), d, config_matrix(table, c))(0, 0);
      }
      CHECK(s == doctest::Approx(g.L_mean()(0, 0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("l-observable needs an interior h") {
  DisorderSample d = sample_disorder(reference(1), 1);
  CHECK_THROWS_AS(l_observable(reference(1), 0.1, ConePoint(SymMatrix::scalar(0.0)), d, d.X), DomainError);
}

TEST_CASE("overlap at t = 0, h = 0 is the prior overlap") {
  // Posterior equals the prior; by symmetry E<|Q|> = E_x |sum_i x_i| / N.
  const int N = 3;
  double brute = 0.0;
  for (int c = 0; c < (1 << N); ++c) {
    int s = 0;
    for (int i = 0; i < N; ++i) s += (c >> i & 1) ? 1 : -1;
    brute += std::abs(s) / double(N);
  }
  brute /= (1 << N);
  QuenchedOptions q;
  q.nodes = 4;
  OverlapStatistics o = overlap_statistics(reference(N), 0.0, ConePoint(SymMatrix::scalar(0.0)), Dense(1, 1), q);
  CHECK(o.dev_center == doctest::Approx(brute).epsilon(1e-13));
  CHECK(std::abs(o.q_mean(0, 0)) < 1e-14);
}

TEST_CASE("Nishimori pairs hold to round-off under quadrature") {
  QuenchedOptions q;
  q.nodes = 12;
  NishimoriPairs n1 = nishimori_pairs(reference(1), 0.2, ConePoint(SymMatrix::scalar(0.3)), q);
  CHECK(n1.max_gap() < 1e-12);
  NishimoriPairs n2 = nishimori_pairs(matrix(1), 0.2, ConePoint(SymMatrix::from_rows({{0.3, 0.05}, {0.05, 0.2}})), q);
  CHECK(n2.max_gap() < 1e-12);
}

TEST_CASE("trivial channel: zero free energy and prior-covariance MMSE") {
  QuenchedOptions q;
  q.nodes = 4;
  const ConePoint zero(SymMatrix::zero(1));
  CHECK(std::abs(free_energy(reference(2), 0.0, zero, q).scalar()) < 1e-14);
  CHECK(mmse_matrix(reference(2), 0.0, zero, q).scalar() == doctest::Approx(1.0));
  // x (x) x has unit entries for Rademacher x, so the tensor is known exactly.
  CHECK(mmse_scalar(reference(2), 0.0, zero, q).scalar() == doctest::Approx(0.5));
  CHECK(tensor_second_moment(reference(2)) == doctest::Approx(1.0));
}
