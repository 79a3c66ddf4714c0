#include "homog/lattice.hpp"

#include <cmath>

namespace homog {

Lattice make_cubic_lattice(int dim) {
  if (dim < 1 || dim > 3) throw ConfigError("lattice dimension must be 1, 2 or 3");
  Lattice lat;
  lat.dim = dim;
  lat.basis = Eigen::MatrixXd::Identity(dim, dim);
  lat.dual_basis = 2.0 * pi * Eigen::MatrixXd::Identity(dim, dim);
  lat.cell_volume = 1.0;
  lat.dual_cell_volume = std::pow(2.0 * pi, dim);
  lat.r0 = pi;
  lat.r1 = 0.5 * std::sqrt(static_cast<double>(dim));
  return lat;
}

}  // namespace homog
