#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "hjlab/model.hpp"
#include "hjlab/symcone.hpp"

namespace hjlab {

// A function on the PSD cone with an optional gradient.
struct ConeFunction {
  int dim = 1;
  std::function<double(const SymMatrix&)> value;
  std::function<SymMatrix(const SymMatrix&)> gradient;
  std::optional<double> lipschitz_bound;
  std::string label;
};

// psi(h) = F̄_1(0, h), the one-row free energy of the linear channel, with
// psi_grad(h) = E[<x>^T <x>] from the same quadrature pass. Results are
// memoized on the exact argument; the oracle is safe to share across threads.
class PsiOracle {
 public:
  // nodes == 0 picks a default: 128 for D = 1, 64 for D = 2, 16 otherwise.
  explicit PsiOracle(PriorSpec prior, int nodes = 0);
  ~PsiOracle();
  PsiOracle(const PsiOracle&) = delete;
  PsiOracle& operator=(const PsiOracle&) = delete;

  int dim() const noexcept;
  int nodes() const noexcept;
  const PriorSpec& prior() const noexcept;

  double value(const SymMatrix& h) const;
  // NumericError if the result has an eigenvalue below -1e-8.
  SymMatrix grad(const SymMatrix& h) const;
  // Hessian in the coordinates of basis(D), by central differences of grad.
  // Entry (i, j) is D_i D_j psi with D_i the derivative along basis element i.
  Dense hess(const SymMatrix& h, double step = 1e-5) const;

  // |grad psi| <= D since signal entries lie in [-1, 1].
  ConeFunction as_function() const;
  std::size_t cache_size() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

int default_psi_nodes(int D);

double psi(const PriorSpec& prior, const ConePoint& h, int nodes = 0);

}  // namespace hjlab
