#pragma once

#include <vector>

#include "homog/cell.hpp"

namespace homog {

// Constant-coefficient effective operator B0 and its symbol L(xi).
struct EffectiveOperator {
  SymbolB b;
  AlphaBounds alpha;
  Mat g0;                  // m x m
  Mat V;                   // m x n
  Mat W;                   // n x n
  std::vector<Mat> a_mean; // d entries, mean of a_j + a_j^*
  Mat Q_mean;              // n x n
  Mat Q0_mean;             // n x n, Hermitian positive
  double lambda_shift = 0;
  double c_star = 0;       // lower symbol bound: c_star |xi|^2 <= L(xi)
  double C_L = 0;          // upper symbol bound: L(xi) <= C_L (|xi|^2 + 1)

  Mat L(const Eigen::VectorXd& xi) const;
};

// Coercivity shift: smallest lambda in {0, 1, 2, 4, ...} making the discrete
// cell-grid form (restricted to a band-limited trig subspace) coercive with
// margin c_star ||Du||^2.
double choose_lambda_shift(const PeriodicField& g, const SymbolB& b,
                           const std::vector<PeriodicField>& a,
                           const PeriodicField& Q, const PeriodicField& Q0,
                           const Lattice& lat);

EffectiveOperator assemble_effective(const CellSolution& cell, const PeriodicField& g,
                                     const SymbolB& b, const std::vector<PeriodicField>& a,
                                     const PeriodicField& Q, const PeriodicField& Q0,
                                     double lambda_shift);

}  // namespace homog
