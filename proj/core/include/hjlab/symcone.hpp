#pragma once

// Symmetric-matrix algebra on S^D and its positive semidefinite cone for
// D <= 8. Storage is a fixed 8x8 block, so matrices are cheap value types.

#include <array>
#include <span>
#include <string>
#include <vector>

namespace hjlab {

inline constexpr int kMaxDim = 8;
inline constexpr double kPsdTolerance = 1e-12;
inline constexpr double kInteriorMargin = 1e-10;

class SymMatrix {
 public:
  SymMatrix() : SymMatrix(1) {}
  explicit SymMatrix(int dim);

  static SymMatrix zero(int dim) { return SymMatrix(dim); }
  static SymMatrix identity(int dim);
  static SymMatrix scalar(double v);
  static SymMatrix diagonal(std::span<const double> d);
  // Rows must be square and exactly symmetric.
  static SymMatrix from_rows(const std::vector<std::vector<double>>& rows);
  // Upper triangle in row-major order: (0,0), (0,1), ..., (1,1), ...
  static SymMatrix from_upper(int dim, std::span<const double> upper);

  int dim() const noexcept { return dim_; }
  int dof() const noexcept { return dim_ * (dim_ + 1) / 2; }

  double operator()(int i, int j) const noexcept { return a_[i * kMaxDim + j]; }
  void set(int i, int j, double v) noexcept {
    a_[i * kMaxDim + j] = v;
    a_[j * kMaxDim + i] = v;
  }

  std::vector<std::vector<double>> rows() const;
  std::vector<double> upper() const;

  SymMatrix& operator+=(const SymMatrix& o);
  SymMatrix& operator-=(const SymMatrix& o);
  SymMatrix& operator*=(double s) noexcept;

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  friend SymMatrix operator-(SymMatrix a) { return a *= -1.0; }
  friend bool operator==(const SymMatrix& a, const SymMatrix& b);

 private:
  int dim_;
  std::array<double, kMaxDim * kMaxDim> a_{};
};

double inner(const SymMatrix& a, const SymMatrix& b);
double norm(const SymMatrix& a);
double max_abs(const SymMatrix& a);
std::string to_string(const SymMatrix& a);

// a*b + b*a; symmetric whenever a and b are.
SymMatrix anticommutator(const SymMatrix& a, const SymMatrix& b);
// a*a
SymMatrix square(const SymMatrix& a);

// Eigenvalues ascending; column k of `vectors` (stride kMaxDim) is the k-th
// eigenvector.
struct Eigensystem {
  int dim = 0;
  std::array<double, kMaxDim> values{};
  std::array<double, kMaxDim * kMaxDim> vectors{};

  double vector(int row, int k) const noexcept { return vectors[row * kMaxDim + k]; }
};

// Cyclic Jacobi rotations. Throws NumericError if the sweep limit is hit.
Eigensystem eigensystem(const SymMatrix& a);
double min_eigenvalue(const SymMatrix& a);
// Q diag(values) Q^T with Q from `eig`.
SymMatrix reconstruct(const Eigensystem& eig, std::span<const double> values);

// A point of S^D_+: eigenvalues within kPsdTolerance * max(1, |m|_2) below
// zero are clamped.
class ConePoint {
 public:
  ConePoint() : ConePoint(SymMatrix(1)) {}
  // Throws DomainError for eigenvalues below that slack.
  explicit ConePoint(const SymMatrix& m);

  const SymMatrix& matrix() const noexcept { return m_; }
  const Eigensystem& eigen() const noexcept { return eig_; }
  double interior_margin() const noexcept { return eig_.values[0]; }
  bool interior() const noexcept { return interior_margin() > kInteriorMargin; }
  int dim() const noexcept { return m_.dim(); }

 private:
  SymMatrix m_;
  Eigensystem eig_;
};

ConePoint sqrt_psd(const ConePoint& h);
// Directional derivative of h -> sqrt(h) at interior h along a: the
// symmetric solution M of M sqrt(h) + sqrt(h) M = a.
SymMatrix dsqrt(const ConePoint& h, const SymMatrix& a);
// Nearest PSD matrix in Frobenius norm (eigenvalue clipping).
ConePoint project_psd(const SymMatrix& s);
// Orthogonal basis of S^D: E_ii and E_ij + E_ji (i < j), upper-triangle order.
std::vector<SymMatrix> basis(int dim);

}  // namespace hjlab
