#include "homog/mesh.hpp"

#include <cmath>

namespace homog {

namespace {

int edge_cells(double len, double h) {
  double q = len / h;
  long r = std::lround(q);
  if (r < 1 || std::abs(q - r) > 1e-9 * std::max(1.0, q))
    throw ConfigError("mesh spacing h must divide every box edge length");
  return static_cast<int>(r);
}

}  // namespace

DomainMesh build_mesh(const Box& box, double h, double interior_margin) {
  if (box.dim < 1 || box.dim > 2) throw ConfigError("mesh supports dim 1 or 2");
  if (h <= 0) throw ConfigError("mesh spacing must be positive");
  for (int a = 0; a < box.dim; ++a)
    if (box.hi[a] <= box.lo[a]) throw ConfigError("box has empty extent");

  DomainMesh m;
  m.dim = box.dim;
  m.box = box;
  m.h = h;
  for (int a = 0; a < box.dim; ++a) m.nn[a] = edge_cells(box.hi[a] - box.lo[a], h) + 1;
  if (box.dim == 1) m.nn[1] = 1;
  m.nodes = static_cast<long>(m.nn[0]) * m.nn[1];

  if (interior_margin != 0) {
    double q = interior_margin / h;
    if (interior_margin < 2 * h - 1e-12 || std::abs(q - std::lround(q)) > 1e-9)
      throw ConfigError("interior margin must be a multiple of h with margin >= 2h");
    for (int a = 0; a < box.dim; ++a)
      if (2 * interior_margin >= box.hi[a] - box.lo[a])
        throw ConfigError("interior margin leaves an empty subdomain");
    m.margin = interior_margin;
  }

  m.is_boundary.assign(m.nodes, false);
  m.dof_of.assign(m.nodes, -1);
  for (int i2 = 0; i2 < m.nn[1]; ++i2)
    for (int i1 = 0; i1 < m.nn[0]; ++i1) {
      bool bnd = i1 == 0 || i1 == m.nn[0] - 1;
      if (m.dim > 1) bnd = bnd || i2 == 0 || i2 == m.nn[1] - 1;
      m.is_boundary[m.index(i1, i2)] = bnd;
    }
  for (long node = 0; node < m.nodes; ++node)
    if (!m.is_boundary[node]) {
      m.dof_of[node] = m.ndof++;
      m.node_of.push_back(node);
    }
  return m;
}

}  // namespace homog
