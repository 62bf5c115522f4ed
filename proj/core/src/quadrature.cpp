#include "hjlab/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "hjlab/errors.hpp"

namespace hjlab {

namespace {

constexpr int kMaxNodes = 128;

// Newton on the orthonormal Hermite recurrence (physicists' weight e^{-x^2}),
// then rescaled to the standard normal.
GaussRule build_rule(int n) {
  std::vector<double> x(n), w(n);
  const int m = (n + 1) / 2;
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    else if (i == 1) z -= 1.14 * std::pow(double(n), 0.426) / z;
    else if (i == 2) z = 1.86 * z - 0.86 * x[0];
    else if (i == 3) z = 1.91 * z - 0.91 * x[1];
    else z = 2.0 * z - x[i - 2];
    double pp = 0.0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(double(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NumericError("Gauss-Hermite Newton iteration failed for n=" + std::to_string(n));
    x[i] = z;
    x[n - 1 - i] = -z;
    w[i] = 2.0 / (pp * pp);
    w[n - 1 - i] = w[i];
  }
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double wscale = 1.0 / std::sqrt(std::numbers::pi);
  for (int i = 0; i < n; ++i) {
    // x was generated in descending order.
    rule.nodes[i] = std::numbers::sqrt2 * x[n - 1 - i];
    rule.weights[i] = w[n - 1 - i] * wscale;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

const GaussRule& gauss_hermite(int n) {
  if (n < 1 || n > kMaxNodes) {
    throw UsageError("gauss_hermite: node count " + std::to_string(n) + " outside [1, 128]");
  }
  static std::array<std::unique_ptr<GaussRule>, kMaxNodes + 1> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (!cache[n]) cache[n] = std::make_unique<GaussRule>(build_rule(n));
  return *cache[n];
}

}  // namespace hjlab
