#pragma once

#include <vector>

namespace hjlab {

// Gauss–Hermite rule for the standard normal density: sum_i w_i g(x_i)
// approximates E g(G), G ~ N(0,1). Weights sum to 1. Nodes ascending.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n in [1, 128]. Results are cached per n.
const GaussRule& gauss_hermite(int n);

}  // namespace hjlab
