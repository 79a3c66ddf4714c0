#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "homog/assemble.hpp"
#include "homog/corrector.hpp"
#include "homog/effective.hpp"
#include "homog/solve.hpp"

namespace homog {

// Weight of the resolvent estimates: |sin phi|^-1 near the positive real
// axis, 1 on [pi/2, 3pi/2]. Requires 0 < phi < 2 pi.
double c_phi(double phi);

// Spectral weight for zeta below the bottom of the spectrum, with
// psi = arg(zeta - c_flat). Requires zeta off the ray [c_flat, inf).
double rho_flat(cplx zeta, double c_flat);

// Common lower bound across the effective and all oscillating systems:
// smallest generalized eigenvalue of (stiffness, mass_q0) over the family,
// with a 5% safety margin, floored at zero.
double estimate_c_flat(const DiscreteSystem& eff, const std::vector<const DiscreteSystem*>& osc);

struct ErrorRow {
  double epsilon = 0;
  cplx zeta{0, 0};
  double phi = 0;  // arg zeta in (0, 2pi]
  double err_l2 = 0;
  double err_h1_plain = 0;
  double err_h1_corr = 0;
  double err_h1_corr_nosmooth = 0;
  double err_h1_bl = 0;
  double err_h1_interior = 0;
  double err_flux = 0;
  double gap_l2 = 0;
  double wall_s = 0;
};

// Integrals of the multilinear interpolant of a nodal field with k components
// per node; interior_only keeps the elements contained in O'.
double quad_l2(const DomainMesh& mesh, const Vec& v, int k, bool interior_only = false);
double quad_h1(const DomainMesh& mesh, const Vec& v, int k, bool interior_only = false);

// b(D) by centered differences on the domain grid, one-sided at the boundary.
Vec grid_bD_domain(const DomainMesh& mesh, const Vec& u, const SymbolB& b);

// Oscillating flux g^eps b(D) u sampled at the mesh nodes.
Vec flux_of(const DomainMesh& mesh, const Vec& u, const SymbolB& b, const PeriodicField& g,
            double epsilon);

// Everything error_norms compares the oscillating solution against.
struct ApproxBundle {
  const CorrectorOutput* smooth = nullptr;  // first-order approximation with S_eps
  const CorrectorOutput* plain = nullptr;   // without S_eps
  const Vec* flux = nullptr;                // flux approximation on the mesh
  const Vec* flux_eps = nullptr;            // g^eps b(D) u_eps
  const SolveResult* w = nullptr;           // boundary-layer solution, may be null
  bool prefer_smooth = true;                // which corrector feeds bl/interior columns
};

ErrorRow error_norms(const DomainMesh& mesh, const SolveResult& u_eps, const SolveResult& u0,
                     const ApproxBundle& approx);

// Deterministic smooth load: a seeded trigonometric polynomial on the box.
Vec sweep_load(const DomainMesh& mesh, int n, std::uint64_t seed);

struct SweepProblem {
  Lattice lat;
  SymbolB b;
  PeriodicField g;
  std::vector<PeriodicField> a;
  PeriodicField Q, Q0;
  Box domain;
  double lambda = -1;  // negative: choose automatically
  int refine = 16;     // h = eps / refine
  std::uint64_t seed = 1;
};

struct SweepToggles {
  bool corrector = true;       // replace v_eps by u0 when false (negative control)
  bool smoothing = true;       // feed the smoothed corrector into bl/interior/flux
  bool boundary_layer = true;  // solve for w_eps; otherwise err_h1_bl repeats err_h1_corr
  double interior_delta = -1;  // O' margin; negative: quarter of the shortest edge
  bool allow_real_axis = false;
  bool timing_in_csv = false;
  int gap_samples = 5;
  int max_workers = 2;
};

struct SweepResult {
  std::vector<ErrorRow> rows;
  double lambda = 0;
};

SweepResult run_sweep(const SweepProblem& prob, const std::vector<double>& eps_grid,
                      const std::vector<cplx>& zeta_grid, const SweepToggles& tog = {});

struct ColumnFit {
  std::string column;
  double slope = 0;
  double intercept = 0;
  double zeta_ratio = 1;  // max over (eps, ray) of max/min of err |zeta|^zeta_power
  double zeta_power = 0;
  long points = 0;
};

struct RateCriteria {
  double l2_lo = 0.9, l2_hi = 1.1;
  double h1_corr_min = 0.45;
  double h1_bl_min = 0.9;
  double h1_interior_min = 0.9;
  double zeta_ratio_max = 4.0;
};

struct RateReport {
  std::vector<ColumnFit> fits;
  bool l2_ok = false;
  bool h1_corr_ok = false;
  bool h1_bl_ok = false;
  bool h1_interior_ok = false;
  bool zeta_ok = false;
  bool pass = false;

  const ColumnFit& fit(const std::string& column) const;
  std::string to_json() const;
};

RateReport fit_and_judge(const std::vector<ErrorRow>& rows, const RateCriteria& crit = {});

std::string rows_to_csv(const std::vector<ErrorRow>& rows, bool timing_in_csv = false);
void write_csv(const std::string& path, const std::vector<ErrorRow>& rows,
               bool timing_in_csv = false);

}  // namespace homog
