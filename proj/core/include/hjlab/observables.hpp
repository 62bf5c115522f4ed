#pragma once

// Quenched observables built on the exact posterior: free energy, its
// derivative moments, overlaps, Nishimori pairs, MMSE and l-statistics.
// Symmetric-matrix outputs are stored as upper triangles.

#include "hjlab/quenched.hpp"

namespace hjlab {

SymMatrix sym_from_upper(const std::vector<double>& v, std::size_t offset, int dim);
Dense dense_from(const std::vector<double>& v, std::size_t offset, int rows, int cols);

// F̄_N with the two derivative moments from the same pass:
// value = [F̄_N, E|<x~>|^2 / N^p, upper(E[<x>^T <x>] / N)].
QuenchedEstimate free_energy_moments(std::shared_ptr<const ConfigTable> table, double t, const ConePoint& h,
                                     const QuenchedOptions& opts);
QuenchedEstimate free_energy(const ModelSpec& spec, double t, const ConePoint& h, const QuenchedOptions& opts);

struct FreeEnergyMoments {
  double F = 0.0;
  double dt_moment = 0.0;  // E|<x~>|^2 / N^p
  SymMatrix dh_moment;     // E[<x>^T <x>] / N
  QuenchedEstimate raw;
};
FreeEnergyMoments free_energy_and_moments(const ModelSpec& spec, double t, const ConePoint& h,
                                          const QuenchedOptions& opts);

struct OverlapStatistics {
  Dense q_mean;              // E<Q>
  Dense q_mean_se;
  double dev_center = 0.0;   // E<|Q - center|>
  double dev_center_se = 0.0;
  double dev_mean = 0.0;     // E<|Q - E<Q>|>
  double dev_mean_se = 0.0;
  SymMatrix r_mean;          // E<R>
  Method method = Method::quadrature;
};
OverlapStatistics overlap_statistics(const ModelSpec& spec, double t, const ConePoint& h, const Dense& center,
                                     const QuenchedOptions& opts);

// Quenched Nishimori pairs, each side computed from its own formula.
struct NishimoriPairs {
  Dense q_mean;  // E<Q>
  SymMatrix r_mean;  // E<R>
  double q_sq = 0.0, r_sq = 0.0;           // E<|Q|^2>, E<|R|^2>
  double q_dot_r = 0.0, r12_dot_r13 = 0.0;  // E<Q.R>, E<R12.R13>
  // Largest absolute gap over the three pairs.
  double max_gap() const;
};
NishimoriPairs nishimori_pairs(const ModelSpec& spec, double t, const ConePoint& h, const QuenchedOptions& opts);

// (1/N) E[(X - <x>)^T (X - <x>)], upper triangle.
QuenchedEstimate mmse_matrix(const ModelSpec& spec, double t, const ConePoint& h, const QuenchedOptions& opts);
// (1/N^p) E|X~ - <x~>|^2
QuenchedEstimate mmse_scalar(const ModelSpec& spec, double t, const ConePoint& h, const QuenchedOptions& opts);

// (1/N^p) E|X~|^2 by exact enumeration over the prior.
double tensor_second_moment(const ModelSpec& spec);

struct LStatistics {
  SymMatrix mean;  // E<L>
  double ell0 = 0.0;  // (E<|L - <L>|^2>)^{1/2}
  double ell1 = 0.0;  // (E<|L - E<L>|^2>)^{1/2}
  QuenchedEstimate raw;
};
LStatistics l_statistics(const ModelSpec& spec, double t, const ConePoint& h, const QuenchedOptions& opts);

}  // namespace hjlab
