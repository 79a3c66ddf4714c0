#pragma once

#include <string>

#include "homog/cell.hpp"
#include "homog/mesh.hpp"

namespace homog {

// Nodal function on an enlarged box grid around the BVP domain O.
// The margin is fixed at 2 r1 + 1, enough for the eps-smoothing support of
// every eps <= 1 plus the cutoff ramp.
struct ExtendedFunction {
  int dim = 1, n = 1;
  double h = 0;
  Box box;     // enlarged box
  Box domain;  // original O
  std::array<long, 2> nn{1, 1};
  std::array<long, 2> off{0, 0};  // index of O's low corner in the enlarged grid
  long nodes = 0;
  double margin = 0;
  double c_ext = 0;  // measured discrete H2(box) / H2(O) norm ratio
  std::string rule;
  Vec v;

  long index(long i1, long i2) const { return i2 * nn[0] + i1; }
};

struct CorrectorOutput {
  Vec v_eps;    // nodes * n, first-order approximation on O
  Vec K_term;   // nodes * n, eps K_D F so that v_eps = u0 + K_term
  Vec flux;     // nodes * m (filled by flux_approx)
  Vec w_trace;  // nodes * n, eps phi_eps (filled by boundary_corrector_trace)
  Vec theta;    // nodes, boundary cutoff field
  bool smoothing = true;
  double mu = 0;  // recorded bound eps |grad theta_eps| <= mu
  double c_ext = 0;
};

// Reflection extension of Dirichlet data to the enlarged box, damped to zero
// beyond the first reflection layer by a fixed C^2 cutoff. Linear in u0 and
// bit-exact on O.
ExtendedFunction extend(const DomainMesh& mesh, const Vec& u0, int n, double epsilon);

// Box smoothing of width eps per axis (the cell average of the multilinear
// interpolant); eps must be an even multiple of h.
void smooth_extended(ExtendedFunction& f, double epsilon);

// b(D) by second-order centered differences, one-sided at the outer edge.
ExtendedFunction apply_bD_extended(const ExtendedFunction& u, const SymbolB& b);

// v_eps = u0 + eps Lambda^eps S_eps b(D) ext(u0) + eps Lt^eps S_eps ext(u0)
CorrectorOutput first_order_approx(const DomainMesh& mesh, const Vec& u0, const SymbolB& b,
                                   const CellSolution& cell, double epsilon);

// Same with S_eps = identity; derivatives taken on the O grid directly.
CorrectorOutput corrector_no_smoothing(const DomainMesh& mesh, const Vec& u0, const SymbolB& b,
                                       const CellSolution& cell, double epsilon);

// g_tilde^eps S_eps b(D) ext(u0) + g^eps (b(D)Lt)^eps S_eps ext(u0), or the
// unsmoothed variant on the O grid.
Vec flux_approx(const DomainMesh& mesh, const Vec& u0, const SymbolB& b, const PeriodicField& g,
                const CellSolution& cell, double epsilon, bool smoothing);

// Cutoff theta_eps (1 on the boundary, 0 past the eps/2 strip) and the
// corrector trace eps phi_eps = theta_eps K_term for the boundary-layer solve.
CorrectorOutput boundary_corrector_trace(const DomainMesh& mesh, const Vec& u0, const SymbolB& b,
                                         const CellSolution& cell, double epsilon);

// Discrete Sobolev norms on a uniform grid (L2 included in H1, H1 in H2).
double grid_l2(const Vec& v, int dim, const long* nn, double h, int n);
double grid_h1(const Vec& v, int dim, const long* nn, double h, int n);
double grid_h2(const Vec& v, int dim, const long* nn, double h, int n);

}  // namespace homog
