#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "homog/assemble.hpp"
#include "homog/cell.hpp"
#include "homog/effective.hpp"
#include "homog/solve.hpp"

using namespace homog;

namespace {

using SpC = Eigen::SparseMatrix<cplx>;

SymbolB gradient_symbol(int dim) {
  SymbolB s;
  s.dim = dim;
  s.m = dim;
  s.n = 1;
  for (int j = 0; j < dim; ++j) {
    Mat bj = Mat::Zero(dim, 1);
    bj(j, 0) = 1;
    s.b.push_back(bj);
  }
  return s;
}

PeriodicField const_field(const Lattice& lat, const Mat& value, int npts) {
  return sample_field(constant_spec(value, lat.dim), lat, npts);
}

// hand-built constant-coefficient effective operator (Laplace-like systems)
EffectiveOperator plain_effective(const SymbolB& b, const Mat& g0, const Mat& Q, const Mat& Q0,
                                  double lambda) {
  EffectiveOperator eff;
  eff.b = b;
  eff.g0 = g0;
  eff.V = Mat::Zero(b.m, b.n);
  eff.W = Mat::Zero(b.n, b.n);
  for (int j = 0; j < b.dim; ++j) eff.a_mean.push_back(Mat::Zero(b.n, b.n));
  eff.Q_mean = Q;
  eff.Q0_mean = Q0;
  eff.lambda_shift = lambda;
  return eff;
}

double sparse_max_abs(const SpC& A) {
  double m = 0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpC::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

double hermiticity_defect(const SpC& A) {
  SpC D = SpC(A.adjoint()) - A;
  return sparse_max_abs(D);
}

double m_norm(const SpC& M, const Vec& v) { return std::sqrt(std::abs(v.dot(M * v))); }

Vec random_complex(long size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec v(size);
  for (long i = 0; i < size; ++i) v(i) = cplx(u(rng), u(rng));
  return v;
}

// smooth oscillating model used by several cases: scalar unknown in 2d with
// first-order terms, an indefinite Q and a positive Q0
struct SmoothModel {
  Lattice lat;
  SymbolB b;
  OscillatingCoeffs coeffs;
  double lambda = 0;
};

SmoothModel make_smooth_model() {
  SmoothModel m;
  m.lat = make_cubic_lattice(2);
  m.b = gradient_symbol(2);
  const std::string gamma = "2 + 0.5*sin(2*pi*x1)*cos(2*pi*x2)";
  m.coeffs.g = sample_field(expr_spec({gamma, "0", "0", gamma}, 2, 2, 2), m.lat, 32);

  FieldSpec a1;
  a1.kind = FieldKind::Fourier;
  a1.dim = 2;
  a1.rows = a1.cols = 1;
  // 0.3 cos(2 pi x2) + 0.4 i sin(2 pi x1)
  a1.modes.push_back({{0, 1, 0}, 0.15 * Mat::Identity(1, 1)});
  a1.modes.push_back({{0, -1, 0}, 0.15 * Mat::Identity(1, 1)});
  a1.modes.push_back({{1, 0, 0}, 0.2 * Mat::Identity(1, 1)});
  a1.modes.push_back({{-1, 0, 0}, -0.2 * Mat::Identity(1, 1)});
  FieldSpec a2;
  a2.kind = FieldKind::Fourier;
  a2.dim = 2;
  a2.rows = a2.cols = 1;
  // 0.25 sin(2 pi (x1 + x2)) - 0.1 i cos(2 pi x2)
  a2.modes.push_back({{1, 1, 0}, cplx(0, -0.125) * Mat::Identity(1, 1)});
  a2.modes.push_back({{-1, -1, 0}, cplx(0, 0.125) * Mat::Identity(1, 1)});
  a2.modes.push_back({{0, 1, 0}, cplx(0, -0.05) * Mat::Identity(1, 1)});
  a2.modes.push_back({{0, -1, 0}, cplx(0, -0.05) * Mat::Identity(1, 1)});
  m.coeffs.a = {sample_field(a1, m.lat, 32), sample_field(a2, m.lat, 32)};

  m.coeffs.Q = sample_field(expr_spec({"-1 + 0.3*cos(2*pi*x1)"}, 1, 1, 2), m.lat, 32);
  m.coeffs.Q0 = sample_field(expr_spec({"1.5 + 0.4*sin(2*pi*x2)"}, 1, 1, 2), m.lat, 32);
  m.lambda = choose_lambda_shift(m.coeffs.g, m.b, m.coeffs.a, m.coeffs.Q, m.coeffs.Q0, m.lat);
  return m;
}

}  // namespace

TEST_CASE("mesh construction and interior subdomain bookkeeping") {
  Box seg{1, {0, 0}, {1, 1}};
  DomainMesh m1 = build_mesh(seg, 0.125);
  CHECK(m1.nodes == 9);
  CHECK(m1.ndof == 7);
  CHECK(m1.is_boundary[0]);
  CHECK(m1.is_boundary[8]);
  CHECK(!m1.is_boundary[4]);

  Box sq{2, {0, 0}, {1, 1}};
  DomainMesh m2 = build_mesh(sq, 0.25);
  CHECK(m2.nodes == 25);
  CHECK(m2.ndof == 9);
  long nb = 0;
  for (long i = 0; i < m2.nodes; ++i) nb += m2.is_boundary[i] ? 1 : 0;
  CHECK(nb == 16);

  // dof <-> node maps invert each other
  for (long d = 0; d < m2.ndof; ++d) CHECK(m2.dof_of[m2.node_of[d]] == d);

  // interior subdomain [1/4, 3/4]^2 at margin 1/4 keeps exactly the 3x3 block
  DomainMesh m3 = build_mesh(sq, 0.125, 0.25);
  long inside = 0;
  for (long i = 0; i < m3.nodes; ++i) inside += m3.in_interior_sub(i) ? 1 : 0;
  CHECK(inside == 25);

  CHECK_THROWS_AS(build_mesh(sq, 0.3), ConfigError);           // h does not divide the edge
  CHECK_THROWS_AS(build_mesh(sq, 0.125, 0.13), ConfigError);   // margin not a multiple of h
  CHECK_THROWS_AS(build_mesh(sq, 0.25, 0.25), ConfigError);    // margin under 2h
  CHECK_THROWS_AS(build_mesh(sq, 0.125, 0.5), ConfigError);    // margin swallows the domain

  // restrict / scatter round trip
  std::mt19937_64 rng(7);
  Vec full = random_complex(m2.nodes, rng);
  Vec dofs = restrict_to_dofs(m2, 1, full);
  Vec back = scatter_to_full(m2, 1, dofs);
  for (long i = 0; i < m2.nodes; ++i) {
    if (m2.is_boundary[i])
      CHECK(std::abs(back(i)) == 0);
    else
      CHECK(std::abs(back(i) - full(i)) == 0);
  }
}

TEST_CASE("dirichlet laplacian matches the classic tridiagonal stencil") {
  SymbolB b = gradient_symbol(1);
  EffectiveOperator eff =
      plain_effective(b, Mat::Identity(1, 1), Mat::Zero(1, 1), Mat::Identity(1, 1), 0);
  double h = 0.125;
  DomainMesh mesh = build_mesh(Box{1, {0, 0}, {1, 1}}, h);
  DiscreteSystem sys = assemble_effective(mesh, eff);

  Mat K = Mat(sys.stiffness);
  Mat M = Mat(sys.mass_q0);
  for (long i = 0; i < mesh.ndof; ++i) {
    CHECK(std::abs(K(i, i) - 2.0 / h) <= 1e-12 / h);
    CHECK(std::abs(M(i, i) - 4.0 * h / 6.0) <= 1e-14);
    if (i + 1 < mesh.ndof) {
      CHECK(std::abs(K(i, i + 1) + 1.0 / h) <= 1e-12 / h);
      CHECK(std::abs(M(i, i + 1) - h / 6.0) <= 1e-14);
    }
  }
  // mass_q0 equals the plain mass when Q0 = 1 (away from boundary couplings)
  CHECK(sparse_max_abs(SpC(sys.mass_q0_full - sys.mass_full)) <= 1e-15);
}

TEST_CASE("spectrum bottom converges to pi^2 at second order") {
  SymbolB b1 = gradient_symbol(1);
  EffectiveOperator eff1 =
      plain_effective(b1, Mat::Identity(1, 1), Mat::Zero(1, 1), Mat::Identity(1, 1), 0);
  Box seg{1, {0, 0}, {1, 1}};

  double mu64 = smallest_generalized_eig(assemble_effective(build_mesh(seg, 1.0 / 64), eff1));
  double mu128 = smallest_generalized_eig(assemble_effective(build_mesh(seg, 1.0 / 128), eff1));
  double exact = pi * pi;
  CHECK(std::abs(mu64 - exact) <= 0.01);
  CHECK(std::abs(mu128 - exact) <= 0.30 * std::abs(mu64 - exact));

  // the safety margin stays strictly below the bottom
  DiscreteSystem s64 = assemble_effective(build_mesh(seg, 1.0 / 64), eff1);
  double cflat = estimate_c_flat(s64);
  CHECK(cflat < mu64);
  CHECK(cflat >= 0.9 * mu64);

  SymbolB b2 = gradient_symbol(2);
  EffectiveOperator eff2 =
      plain_effective(b2, Mat::Identity(2, 2), Mat::Zero(1, 1), Mat::Identity(1, 1), 0);
  double mu2 = smallest_generalized_eig(
      assemble_effective(build_mesh(Box{2, {0, 0}, {1, 1}}, 1.0 / 16), eff2));
  CHECK(std::abs(mu2 - 2 * exact) <= 0.04 * 2 * exact);
}

TEST_CASE("assembled forms are hermitian and coercive") {
  SmoothModel m = make_smooth_model();
  DomainMesh mesh = build_mesh(Box{2, {0, 0}, {0.5, 0.5}}, 1.0 / 32);
  DiscreteSystem sys = assemble_oscillating(mesh, m.coeffs, m.b, 0.5, m.lambda);

  double kscale = sparse_max_abs(sys.stiffness);
  CHECK(hermiticity_defect(sys.stiffness) <= 1e-12 * kscale);
  CHECK(hermiticity_defect(sys.mass_q0) <= 1e-13);
  CHECK(hermiticity_defect(sys.stiffness_full) <= 1e-12 * kscale);

  // mass_q0 is positive definite
  Mat M0 = Mat(sys.mass_q0);
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (M0 + M0.adjoint()));
  CHECK(es.eigenvalues().minCoeff() > 0);

  // gradient Gram matrix: identity-coefficient stiffness on the same mesh
  EffectiveOperator lap =
      plain_effective(m.b, Mat::Identity(2, 2), Mat::Zero(1, 1), Mat::Identity(1, 1), 0);
  DiscreteSystem gram = assemble_effective(mesh, lap);

  double c_star = 0.25 * min_eig_over_cell(m.coeffs.g);
  std::mt19937_64 rng(11);
  for (int t = 0; t < 50; ++t) {
    Vec u = random_complex(mesh.ndof, rng);
    double quad = (u.dot(sys.stiffness * u)).real();
    double grad2 = (u.dot(gram.stiffness * u)).real();
    CHECK(quad >= c_star * grad2 - 1e-8 * std::abs(quad));
  }
}

TEST_CASE("effective assembly on constant coefficients reproduces the oscillating matrices") {
  Lattice lat = make_cubic_lattice(2);
  SymbolB b = gradient_symbol(2);
  Mat gc(2, 2);
  gc << 2.0, cplx(0.3, 0.1), cplx(0.3, -0.1), 1.5;
  Mat a1c = cplx(0.2, 0.5) * Mat::Identity(1, 1);
  Mat a2c = cplx(-0.1, 0.3) * Mat::Identity(1, 1);
  Mat qc = -0.7 * Mat::Identity(1, 1);
  Mat q0c = 1.3 * Mat::Identity(1, 1);

  PeriodicField g = const_field(lat, gc, 16);
  std::vector<PeriodicField> a = {const_field(lat, a1c, 16), const_field(lat, a2c, 16)};
  PeriodicField Q = const_field(lat, qc, 16);
  PeriodicField Q0 = const_field(lat, q0c, 16);

  CellSolution cell = solve_cell(CellProblem{lat, b, g, a});
  CHECK(linf_spectral(cell.lambda) <= 1e-12);
  EffectiveOperator eff = assemble_effective(cell, g, b, a, Q, Q0, 4.0);

  DomainMesh mesh = build_mesh(Box{2, {0, 0}, {0.5, 0.5}}, 1.0 / 64);
  DiscreteSystem osc = assemble_oscillating(mesh, {g, a, Q, Q0}, b, 0.25, 4.0);
  DiscreteSystem hom = assemble_effective(mesh, eff);

  double scale = sparse_max_abs(osc.stiffness);
  CHECK(sparse_max_abs(SpC(osc.stiffness - hom.stiffness)) <= 1e-12 * scale);
  CHECK(sparse_max_abs(SpC(osc.mass_q0 - hom.mass_q0)) <= 1e-12);
  CHECK(sparse_max_abs(SpC(osc.mass_full - hom.mass_full)) <= 1e-15);
}

TEST_CASE("manufactured solution converges at second order in the mesh size") {
  SymbolB b = gradient_symbol(2);
  EffectiveOperator eff =
      plain_effective(b, Mat::Identity(2, 2), Mat::Zero(1, 1), Mat::Identity(1, 1), 0);
  cplx zeta(-1, 0);

  auto solve_at = [&](double h) {
    DomainMesh mesh = build_mesh(Box{2, {0, 0}, {1, 1}}, h);
    DiscreteSystem sys = assemble_effective(mesh, eff);
    Vec F(mesh.nodes), ustar(mesh.nodes);
    for (long node = 0; node < mesh.nodes; ++node) {
      double x[2];
      mesh.coords(node, x);
      double s = std::sin(pi * x[0]) * std::sin(pi * x[1]);
      ustar(node) = s;
      F(node) = (2 * pi * pi - zeta.real()) * s;
    }
    SolveResult res = solve_resolvent(sys, zeta, F);
    CHECK(res.residual <= 1e-10);
    CHECK(res.wall_s >= 0);
    return m_norm(sys.mass_full, Vec(res.u - ustar));
  };

  double e16 = solve_at(1.0 / 16);
  double e32 = solve_at(1.0 / 32);
  CHECK(e16 <= 5e-3);
  CHECK(e32 <= 0.40 * e16);
}

TEST_CASE("resolvent norm and gradient bounds below the spectrum") {
  SymbolB b = gradient_symbol(2);
  EffectiveOperator eff =
      plain_effective(b, Mat::Identity(2, 2), Mat::Zero(1, 1), Mat::Identity(1, 1), 0);
  DomainMesh mesh = build_mesh(Box{2, {0, 0}, {1, 1}}, 1.0 / 32);
  DiscreteSystem sys = assemble_effective(mesh, eff);

  std::mt19937_64 rng(23);
  Vec F = random_complex(mesh.nodes, rng);
  double fnorm = m_norm(sys.mass_full, F);

  double cmax = 0;
  for (double az : {1.0, 10.0, 100.0}) {
    cplx zeta(-az, 0);
    SolveResult res = solve_resolvent(sys, zeta, F);
    double unorm = m_norm(sys.mass_full, res.u);
    CHECK(unorm <= (1 + 1e-9) * fnorm / az);

    Vec x = restrict_to_dofs(mesh, 1, res.u);
    double grad = std::sqrt(std::abs((x.dot(sys.stiffness * x)).real()));
    cmax = std::max(cmax, grad * std::sqrt(az) / fnorm);
  }
  CHECK(cmax <= 1.5);  // sqrt(2) plus slack
}

TEST_CASE("resolvent is self-adjoint in the q0 pairing") {
  SmoothModel m = make_smooth_model();
  DomainMesh mesh = build_mesh(Box{2, {0, 0}, {0.5, 0.5}}, 1.0 / 32);
  DiscreteSystem sys = assemble_oscillating(mesh, m.coeffs, m.b, 0.5, m.lambda);

  std::mt19937_64 rng(31);
  Vec F = Vec::Zero(mesh.nodes), G = Vec::Zero(mesh.nodes);
  for (long node = 0; node < mesh.nodes; ++node)
    if (!mesh.is_boundary[node]) {
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      F(node) = cplx(u(rng), u(rng));
      G(node) = cplx(u(rng), u(rng));
    }

  cplx zeta(-2, 3);
  SolveResult rf = solve_resolvent(sys, zeta, F);
  SolveResult rg = solve_resolvent(sys, std::conj(zeta), G);

  // plain-L2 pairing: the load is projected with the plain mass
  cplx s1 = G.dot(sys.mass_full * rf.u);
  cplx s2 = rg.u.dot(sys.mass_full * F);
  CHECK(std::abs(s1 - s2) <= 1e-8 * std::abs(s1));
}

TEST_CASE("lambda shift enters the matrices linearly") {
  SmoothModel m = make_smooth_model();
  DomainMesh mesh = build_mesh(Box{2, {0, 0}, {0.5, 0.5}}, 1.0 / 32);
  DiscreteSystem s1 = assemble_oscillating(mesh, m.coeffs, m.b, 0.5, 1.0);
  DiscreteSystem s2 = assemble_oscillating(mesh, m.coeffs, m.b, 0.5, 3.5);

  SpC diff = SpC(s2.stiffness - s1.stiffness) - SpC(2.5 * s1.mass_q0);
  CHECK(sparse_max_abs(diff) <= 1e-12 * sparse_max_abs(s1.stiffness));
  CHECK(sparse_max_abs(SpC(s2.mass_q0 - s1.mass_q0)) == 0);
}

TEST_CASE("zeta admissibility checks") {
  SymbolB b = gradient_symbol(1);
  EffectiveOperator eff =
      plain_effective(b, Mat::Identity(1, 1), Mat::Zero(1, 1), Mat::Identity(1, 1), 0);
  DomainMesh mesh = build_mesh(Box{1, {0, 0}, {1, 1}}, 1.0 / 32);
  DiscreteSystem sys = assemble_effective(mesh, eff);
  Vec F = Vec::Ones(mesh.nodes);

  CHECK_THROWS_AS(solve_resolvent(sys, cplx(1, 0), F), ConfigError);
  CHECK_THROWS_AS(solve_resolvent(sys, cplx(0, 0), F), ConfigError);
  CHECK_THROWS_AS(solve_resolvent(sys, cplx(1, 0.05), F), ConfigError);
  CHECK_THROWS_AS(solve_resolvent(sys, cplx(-1, 0), Vec::Ones(3)), ConfigError);

  // sector edge is admissible, and real axis below the spectrum needs the flag
  CHECK_NOTHROW(solve_resolvent(sys, cplx(1, 0.5), F));
  CHECK_NOTHROW(solve_resolvent(sys, cplx(0.5, 0), F, true));
  CHECK_NOTHROW(solve_resolvent(sys, cplx(-3, 0), F));
}

TEST_CASE("boundary layer solve lifts the trace") {
  SmoothModel m = make_smooth_model();
  DomainMesh mesh = build_mesh(Box{2, {0, 0}, {0.5, 0.5}}, 1.0 / 32);
  DiscreteSystem sys = assemble_oscillating(mesh, m.coeffs, m.b, 0.5, m.lambda);
  cplx zeta(-2, 0);

  SolveResult zero = solve_boundary_layer(sys, zeta, Vec::Zero(mesh.nodes));
  CHECK(zero.u.norm() == 0);

  Vec data(mesh.nodes);
  for (long node = 0; node < mesh.nodes; ++node) {
    double x[2];
    mesh.coords(node, x);
    data(node) = cplx(std::cos(2 * pi * x[0]), 0.3 * std::sin(2 * pi * (x[0] + x[1])));
  }
  SolveResult res = solve_boundary_layer(sys, zeta, data);

  for (long node = 0; node < mesh.nodes; ++node)
    if (mesh.is_boundary[node]) CHECK(std::abs(res.u(node) - data(node)) == 0);

  Vec r_full = (sys.stiffness_full - zeta * sys.mass_q0_full) * res.u;
  Vec r = restrict_to_dofs(mesh, 1, r_full);
  Vec lift = Vec(res.u);
  for (long node = 0; node < mesh.nodes; ++node)
    if (!mesh.is_boundary[node]) lift(node) = 0;
  double drive = restrict_to_dofs(mesh, 1, Vec((sys.stiffness_full - zeta * sys.mass_q0_full) * lift)).norm();
  CHECK(r.norm() <= 1e-8 * drive);
}

TEST_CASE("a zeta at a discrete eigenvalue is reported") {
  SymbolB b = gradient_symbol(1);
  EffectiveOperator eff =
      plain_effective(b, Mat::Identity(1, 1), Mat::Zero(1, 1), Mat::Identity(1, 1), 0);
  double h = 0.25;
  DomainMesh mesh = build_mesh(Box{1, {0, 0}, {1, 1}}, h);
  DiscreteSystem sys = assemble_effective(mesh, eff);

  // exact lowest generalized eigenvalue of the P1 stiffness/mass pencil
  double c = std::cos(pi * h);
  double mu = 6.0 * (1.0 - c) / (h * h * (2.0 + c));
  CHECK(std::abs(smallest_generalized_eig(sys) - mu) <= 1e-8 * mu);

  Vec F = Vec::Ones(mesh.nodes);
  CHECK_THROWS_AS(solve_resolvent(sys, cplx(mu, 0), F, true), SolverError);
}
