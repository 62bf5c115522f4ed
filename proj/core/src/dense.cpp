#include "hjlab/dense.hpp"

#include "hjlab/errors.hpp"

namespace hjlab {

Dense::Dense(int r, int c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != std::size_t(r) * std::size_t(c)) {
    throw UsageError("Dense: value count does not match shape");
  }
}

Dense Dense::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Dense(0, 0);
  Dense m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows; ++i) {
    if (static_cast<int>(rows[i].size()) != m.cols) throw UsageError("ragged matrix literal");
    for (int j = 0; j < m.cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<std::vector<double>> Dense::to_rows() const {
  std::vector<std::vector<double>> r(rows, std::vector<double>(cols));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) r[i][j] = (*this)(i, j);
  return r;
}

double frobenius_sq(const Dense& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return s;
}

}  // namespace hjlab
