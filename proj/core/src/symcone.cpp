#include "hjlab/symcone.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "hjlab/errors.hpp"

namespace hjlab {

namespace {

void check_dim(int dim) {
  if (dim < 1 || dim > kMaxDim) {
    throw UsageError("SymMatrix dimension " + std::to_string(dim) + " outside [1, " +
                     std::to_string(kMaxDim) + "]");
  }
}

void check_same(const SymMatrix& a, const SymMatrix& b, const char* op) {
  if (a.dim() != b.dim()) {
    throw UsageError(std::string(op) + ": dimension mismatch " + std::to_string(a.dim()) +
                     " vs " + std::to_string(b.dim()));
  }
}

}  // namespace

SymMatrix::SymMatrix(int dim) : dim_(dim) { check_dim(dim); }

SymMatrix SymMatrix::identity(int dim) {
  SymMatrix m(dim);
  for (int i = 0; i < dim; ++i) m.set(i, i, 1.0);
  return m;
}

SymMatrix SymMatrix::scalar(double v) {
  SymMatrix m(1);
  m.set(0, 0, v);
  return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> d) {
  SymMatrix m(static_cast<int>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i) m.set(int(i), int(i), d[i]);
  return m;
}

SymMatrix SymMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const int dim = static_cast<int>(rows.size());
  SymMatrix m(dim);
  for (int i = 0; i < dim; ++i) {
    if (static_cast<int>(rows[i].size()) != dim) {
      throw UsageError("matrix literal is not square");
    }
  }
  for (int i = 0; i < dim; ++i) {
    for (int j = i; j < dim; ++j) {
      if (rows[i][j] != rows[j][i]) {
        std::ostringstream os;
        os << "matrix literal is not symmetric at (" << i << "," << j << "): " << rows[i][j]
           << " vs " << rows[j][i];
        throw UsageError(os.str());
      }
      m.set(i, j, rows[i][j]);
    }
  }
  return m;
}

SymMatrix SymMatrix::from_upper(int dim, std::span<const double> upper) {
  SymMatrix m(dim);
  if (static_cast<int>(upper.size()) != m.dof()) {
    throw UsageError("upper-triangle length does not match dimension");
  }
  std::size_t k = 0;
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) m.set(i, j, upper[k++]);
  return m;
}

std::vector<std::vector<double>> SymMatrix::rows() const {
  std::vector<std::vector<double>> r(dim_, std::vector<double>(dim_));
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) r[i][j] = (*this)(i, j);
  return r;
}

std::vector<double> SymMatrix::upper() const {
  std::vector<double> u;
  u.reserve(dof());
  for (int i = 0; i < dim_; ++i)
    for (int j = i; j < dim_; ++j) u.push_back((*this)(i, j));
  return u;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& o) {
  check_same(*this, o, "operator+");
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) a_[i * kMaxDim + j] += o.a_[i * kMaxDim + j];
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& o) {
  check_same(*this, o, "operator-");
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) a_[i * kMaxDim + j] -= o.a_[i * kMaxDim + j];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) noexcept {
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) a_[i * kMaxDim + j] *= s;
  return *this;
}

bool operator==(const SymMatrix& a, const SymMatrix& b) {
  if (a.dim_ != b.dim_) return false;
  for (int i = 0; i < a.dim_; ++i)
    for (int j = 0; j < a.dim_; ++j)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

double inner(const SymMatrix& a, const SymMatrix& b) {
  check_same(a, b, "inner");
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) s += a(i, j) * b(i, j);
  return s;
}

double norm(const SymMatrix& a) { return std::sqrt(inner(a, a)); }

double max_abs(const SymMatrix& a) {
  double m = 0.0;
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) m = std::max(m, std::abs(a(i, j)));
  return m;
}

std::string to_string(const SymMatrix& a) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (int i = 0; i < a.dim(); ++i) {
    os << (i ? ",[" : "[");
    for (int j = 0; j < a.dim(); ++j) os << (j ? "," : "") << a(i, j);
    os << ']';
  }
  os << ']';
  return os.str();
}

SymMatrix anticommutator(const SymMatrix& a, const SymMatrix& b) {
  check_same(a, b, "anticommutator");
  const int n = a.dim();
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

SymMatrix square(const SymMatrix& a) {
  const int n = a.dim();
  SymMatrix r(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += a(i, k) * a(k, j);
      r.set(i, j, s);
    }
  }
  return r;
}

Eigensystem eigensystem(const SymMatrix& a) {
  const int n = a.dim();
  std::array<double, kMaxDim * kMaxDim> m{};
  Eigensystem eig;
  eig.dim = n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m[i * kMaxDim + j] = a(i, j);
    eig.vectors[i * kMaxDim + i] = 1.0;
  }
  auto at = [&](int i, int j) -> double& { return m[i * kMaxDim + j]; };
  auto v = [&](int i, int j) -> double& { return eig.vectors[i * kMaxDim + j]; };

  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(at(i, j)));

  constexpr int kMaxSweeps = 100;
  bool converged = (n == 1) || scale == 0.0;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(p, q) * at(p, q);
    if (std::sqrt(off) <= 1e-300 || std::sqrt(off) <= 1e-17 * scale) {
      converged = true;
      break;
    }
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        at(p, q) = 0.0;
        at(q, p) = 0.0;
        for (int k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(p, q) * at(p, q);
    if (std::sqrt(off) > 1e-14 * std::max(scale, 1.0)) {
      throw NumericError("Jacobi eigensolver did not converge for " + to_string(a));
    }
  }

  std::array<int, kMaxDim> order{};
  std::iota(order.begin(), order.begin() + n, 0);
  std::sort(order.begin(), order.begin() + n, [&](int x, int y) { return at(x, x) < at(y, y); });
  Eigensystem sorted;
  sorted.dim = n;
  for (int k = 0; k < n; ++k) {
    sorted.values[k] = at(order[k], order[k]);
    for (int i = 0; i < n; ++i) sorted.vectors[i * kMaxDim + k] = v(i, order[k]);
  }
  return sorted;
}

double min_eigenvalue(const SymMatrix& a) { return eigensystem(a).values[0]; }

SymMatrix reconstruct(const Eigensystem& eig, std::span<const double> values) {
  const int n = eig.dim;
  SymMatrix r(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += eig.vector(i, k) * values[k] * eig.vector(j, k);
      r.set(i, j, s);
    }
  }
  return r;
}

ConePoint::ConePoint(const SymMatrix& m) : m_(m), eig_(eigensystem(m)) {
  // Eigenvalue round-off scales with the matrix, so the slack does too.
  const double scale = std::max({1.0, std::abs(eig_.values[0]), std::abs(eig_.values[m.dim() - 1])});
  if (eig_.values[0] < -kPsdTolerance * scale) {
    std::ostringstream os;
    os << "matrix is not positive semidefinite (smallest eigenvalue " << eig_.values[0]
       << "): " << to_string(m);
    throw DomainError(os.str());
  }
  if (eig_.values[0] < 0.0) {
    std::array<double, kMaxDim> clamped = eig_.values;
    for (int k = 0; k < m.dim(); ++k) clamped[k] = std::max(clamped[k], 0.0);
    m_ = reconstruct(eig_, std::span<const double>(clamped.data(), m.dim()));
    eig_.values = clamped;
  }
}

ConePoint sqrt_psd(const ConePoint& h) {
  const Eigensystem& eig = h.eigen();
  std::array<double, kMaxDim> roots{};
  for (int k = 0; k < eig.dim; ++k) roots[k] = std::sqrt(std::max(eig.values[k], 0.0));
  return ConePoint(reconstruct(eig, std::span<const double>(roots.data(), eig.dim)));
}

SymMatrix dsqrt(const ConePoint& h, const SymMatrix& a) {
  if (a.dim() != h.dim()) throw UsageError("dsqrt: dimension mismatch");
  if (!h.interior()) {
    std::ostringstream os;
    os << "dsqrt requires a strictly positive definite point (margin " << h.interior_margin()
       << " <= " << kInteriorMargin << ")";
    throw DomainError(os.str());
  }
  const Eigensystem& eig = h.eigen();
  const int n = eig.dim;
  std::array<double, kMaxDim> roots{};
  for (int k = 0; k < n; ++k) roots[k] = std::sqrt(eig.values[k]);

  // a in the eigenbasis, then divide entrywise by (r_i + r_j), then rotate back.
  std::array<double, kMaxDim * kMaxDim> tmp{};
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < n; ++l) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) s += a(i, k) * eig.vector(k, l);
      tmp[i * kMaxDim + l] = s;
    }
  std::array<double, kMaxDim * kMaxDim> rot{};
  for (int k = 0; k < n; ++k)
    for (int l = k; l < n; ++l) {
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += eig.vector(i, k) * tmp[i * kMaxDim + l];
      s /= roots[k] + roots[l];
      rot[k * kMaxDim + l] = s;
      rot[l * kMaxDim + k] = s;
    }
  SymMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) s += eig.vector(i, k) * rot[k * kMaxDim + l] * eig.vector(j, l);
      m.set(i, j, s);
    }
  return m;
}

ConePoint project_psd(const SymMatrix& s) {
  const Eigensystem eig = eigensystem(s);
  if (eig.values[0] >= 0.0) return ConePoint(s);
  std::array<double, kMaxDim> clipped{};
  for (int k = 0; k < eig.dim; ++k) clipped[k] = std::max(eig.values[k], 0.0);
  return ConePoint(reconstruct(eig, std::span<const double>(clipped.data(), eig.dim)));
}

std::vector<SymMatrix> basis(int dim) {
  check_dim(dim);
  std::vector<SymMatrix> b;
  b.reserve(dim * (dim + 1) / 2);
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j) {
      SymMatrix e(dim);
      e.set(i, j, 1.0);
      b.push_back(e);
    }
  return b;
}

}  // namespace hjlab
