#pragma once

#include <Eigen/Dense>

#include "homog/types.hpp"

namespace homog {

// Periodicity lattice with its dual, <b_i, a_j> = 2 pi delta_ij.
struct Lattice {
  int dim = 1;
  Eigen::MatrixXd basis;       // columns a_1..a_d
  Eigen::MatrixXd dual_basis;  // columns b_1..b_d
  double cell_volume = 1.0;    // |Omega|
  double dual_cell_volume = 0; // |Omega~|
  double r0 = 0;               // half the shortest nonzero dual vector
  double r1 = 0;               // half the cell diameter
};

Lattice make_cubic_lattice(int dim);

}  // namespace homog
