#pragma once

#include <array>

#include "homog/types.hpp"

namespace homog {

// Uniform tensor-product node grid: node i sits at origin + i*h per axis.
struct NodeGrid {
  int dim = 1;
  std::array<long, 3> nn{1, 1, 1};  // node counts
  std::array<double, 3> origin{0, 0, 0};
  double h = 1;

  long total() const { return nn[0] * nn[1] * nn[2]; }
  long index(long i1, long i2, long i3) const { return (i3 * nn[1] + i2) * nn[0] + i1; }
  double coord(int axis, long i) const { return origin[axis] + i * h; }
};

// ncomp complex components per node; column = component.
struct GridFn {
  NodeGrid g;
  int ncomp = 1;
  Eigen::MatrixXcd v;  // total() x ncomp

  static GridFn zero(const NodeGrid& grid, int ncomp) {
    GridFn f;
    f.g = grid;
    f.ncomp = ncomp;
    f.v = Eigen::MatrixXcd::Zero(grid.total(), ncomp);
    return f;
  }
};

}  // namespace homog
