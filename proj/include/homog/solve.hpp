#pragma once

#include "homog/assemble.hpp"

namespace homog {

struct SolveResult {
  Vec u;  // full nodal vector (nodes * n components), zero on Dirichlet nodes
  cplx zeta{0, 0};
  double epsilon = 0;
  double residual = 0;
  double wall_s = 0;
};

// (stiffness - zeta mass_q0) u = mass F for a nodal load F.
// zeta on or near the positive real axis is rejected unless allow_real_axis
// (paragraph-9 style runs below the spectrum bottom).
SolveResult solve_resolvent(const DiscreteSystem& sys, cplx zeta, const Vec& F_nodal,
                            bool allow_real_axis = false);

// (stiffness - zeta mass_q0) w = 0 in O with w = boundary_data on the boundary,
// via nodal trace lifting.
SolveResult solve_boundary_layer(const DiscreteSystem& sys, cplx zeta, const Vec& boundary_data,
                                 bool allow_real_axis = false);

// bottom of the discrete spectrum of (stiffness, mass_q0)
double smallest_generalized_eig(const DiscreteSystem& sys);
// spectrum bottom with a 5% safety margin, the admissible real-axis threshold
double estimate_c_flat(const DiscreteSystem& sys);

}  // namespace homog
