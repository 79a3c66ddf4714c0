#pragma once

#include <string>
#include <vector>

#include "homog/lattice.hpp"
#include "homog/periodic_field.hpp"
#include "homog/symbol.hpp"
#include "homog/types.hpp"

namespace homog {

// One cell problem: b(D)^* g b(D) on the unit cell plus lower-order a_j data.
struct CellProblem {
  Lattice lat;
  SymbolB b;
  PeriodicField g;                // m x m, Hermitian, positive definite
  std::vector<PeriodicField> a;   // d entries n x n, may be empty for a = 0
};

struct CellSolution {
  PeriodicField lambda;         // n x m, zero mean
  PeriodicField lambda_tilde;   // n x n, zero mean
  PeriodicField b_lambda;       // m x m = b(D)Lambda
  PeriodicField b_lambda_tilde; // m x n = b(D)Lambda~
  PeriodicField g_tilde;        // m x m = g (b(D)Lambda + 1_m)
  Mat g0;                       // m x m cell mean of g_tilde
  Mat V;                        // m x n
  Mat W;                        // n x n
  double residual_lambda = 0;
  double residual_lambda_tilde = 0;
  std::string backend;          // "spectral" or "fem"
};

// Spectral differentiation of a nodal field: D_j = -i d/dx_j.
PeriodicField spectral_Dj(const PeriodicField& u, int j);
// b(D) u for a nodal field with n rows: returns an m-row field.
PeriodicField apply_bD(const SymbolB& b, const PeriodicField& u);

PeriodicField solve_lambda(const PeriodicField& g, const SymbolB& b, double* residual = nullptr);
PeriodicField solve_lambda_tilde(const PeriodicField& g, const SymbolB& b,
                                 const std::vector<PeriodicField>& a, double* residual = nullptr);

PeriodicField assemble_g_tilde(const PeriodicField& g, const PeriodicField& b_lambda);
PeriodicField assemble_g_tilde(const PeriodicField& g, const PeriodicField& lambda,
                               const SymbolB& b);
Mat effective_matrix(const PeriodicField& g_tilde);

Mat compute_V(const PeriodicField& g, const PeriodicField& b_lambda,
              const PeriodicField& b_lambda_tilde);
Mat compute_W(const PeriodicField& g, const PeriodicField& b_lambda_tilde);

// Full pipeline; dispatches to the FEM backend for piecewise coefficient fields.
CellSolution solve_cell(const CellProblem& p);

}  // namespace homog
