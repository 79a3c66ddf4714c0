#pragma once

#include <Eigen/Sparse>

#include "homog/effective.hpp"
#include "homog/mesh.hpp"
#include "homog/periodic_field.hpp"
#include "homog/symbol.hpp"

namespace homog {

// Sampled periodic coefficients of the oscillating operator.
struct OscillatingCoeffs {
  PeriodicField g;               // m x m
  std::vector<PeriodicField> a;  // d fields n x n, may be empty
  PeriodicField Q;               // n x n Hermitian
  PeriodicField Q0;              // n x n Hermitian positive
};

struct DiscreteSystem {
  enum class Kind { Oscillating, Effective };
  Kind kind = Kind::Oscillating;
  DomainMesh mesh;
  SymbolB b;
  int n = 1;
  double epsilon = 0;  // 0 for the effective system
  double lambda = 0;

  // interior unknowns only (Dirichlet rows eliminated symmetrically)
  Eigen::SparseMatrix<cplx> stiffness;
  Eigen::SparseMatrix<cplx> mass_q0;
  // all-node versions, used for trace lifting and load projection
  Eigen::SparseMatrix<cplx> stiffness_full;
  Eigen::SparseMatrix<cplx> mass_q0_full;
  Eigen::SparseMatrix<cplx> mass_full;  // plain L2 mass
};

DiscreteSystem assemble_oscillating(const DomainMesh& mesh, const OscillatingCoeffs& coeffs,
                                    const SymbolB& b, double epsilon, double lambda_shift);

DiscreteSystem assemble_effective(const DomainMesh& mesh, const EffectiveOperator& eff);

// dof vector <-> full nodal vector (boundary zeros)
Vec restrict_to_dofs(const DomainMesh& mesh, int n, const Vec& full);
Vec scatter_to_full(const DomainMesh& mesh, int n, const Vec& dofs);

}  // namespace homog
