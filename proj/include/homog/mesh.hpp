#pragma once

#include <array>
#include <vector>

#include "homog/types.hpp"

namespace homog {

// Axis-aligned interval (d=1) or rectangle (d=2).
struct Box {
  int dim = 1;
  std::array<double, 2> lo{0, 0};
  std::array<double, 2> hi{1, 1};
};

struct DomainMesh {
  int dim = 1;
  Box box;
  double h = 0;
  std::array<int, 2> nn{1, 1};  // node counts per axis, boundary included
  long nodes = 0;
  long ndof = 0;                 // interior nodes
  std::vector<bool> is_boundary; // per node
  std::vector<long> dof_of;      // node -> interior dof, -1 on boundary
  std::vector<long> node_of;     // interior dof -> node
  double margin = 0;             // delta of the interior subdomain, 0 if none

  long index(int i1, int i2) const { return static_cast<long>(i2) * nn[0] + i1; }
  void coords(long node, double* x) const {
    int i1 = static_cast<int>(node % nn[0]);
    int i2 = static_cast<int>(node / nn[0]);
    x[0] = box.lo[0] + h * i1;
    if (dim > 1) x[1] = box.lo[1] + h * i2;
  }
  // node lies in the closed interior subdomain O' (requires margin > 0)
  bool in_interior_sub(long node) const {
    double x[2] = {0, 0};
    coords(node, x);
    for (int a = 0; a < dim; ++a)
      if (x[a] < box.lo[a] + margin - 1e-12 || x[a] > box.hi[a] - margin + 1e-12) return false;
    return true;
  }
};

DomainMesh build_mesh(const Box& box, double h, double interior_margin = 0);

}  // namespace homog
