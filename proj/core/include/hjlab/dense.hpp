#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hjlab {

// Row-major real matrix. Used for signals (N x D), tensors (N^p x L) and
// the interaction matrix; shapes here are small, so no expression tricks.
struct Dense {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Dense() = default;
  Dense(int r, int c) : rows(r), cols(c), data(std::size_t(r) * std::size_t(c), 0.0) {}
  Dense(int r, int c, std::vector<double> values);

  static Dense from_rows(const std::vector<std::vector<double>>& rows);

  double& operator()(int i, int j) noexcept { return data[std::size_t(i) * cols + j]; }
  double operator()(int i, int j) const noexcept { return data[std::size_t(i) * cols + j]; }

  std::span<const double> row(int i) const noexcept {
    return {data.data() + std::size_t(i) * cols, std::size_t(cols)};
  }
  std::size_t size() const noexcept { return data.size(); }

  std::vector<std::vector<double>> to_rows() const;
};

double frobenius_sq(const Dense& a);

}  // namespace hjlab
