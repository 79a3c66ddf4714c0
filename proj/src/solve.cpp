#include "homog/solve.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <chrono>
#include <cmath>
#include <functional>

namespace homog {

namespace {

using SpC = Eigen::SparseMatrix<cplx>;
using SpR = Eigen::SparseMatrix<double>;

bool nearly_real(const SpC& A) {
  double scale = 0, imax = 0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpC::InnerIterator it(A, k); it; ++it) {
      scale = std::max(scale, std::abs(it.value()));
      imax = std::max(imax, std::abs(it.value().imag()));
    }
  return imax <= 1e-14 * std::max(scale, 1.0);
}

SpR real_part(const SpC& A) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(A.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k)
    for (SpC::InnerIterator it(A, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value().real());
  SpR out(A.rows(), A.cols());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

void validate_zeta(cplx zeta, bool allow_real_axis) {
  if (allow_real_axis) return;
  double az = std::abs(zeta);
  if (zeta.imag() == 0 && zeta.real() >= 0)
    throw ConfigError("zeta on the nonnegative real axis requires a below-spectrum run");
  if (zeta.real() >= 0 && std::abs(zeta.imag()) < 0.1 * az)
    throw ConfigError("zeta too close to the positive real axis (need |Im| >= 0.1|zeta|)");
}

// shifted Hermitian-aware direct solve with iterative refinement
Vec solve_shifted(const DiscreteSystem& sys, cplx zeta, const Vec& rhs, double* out_res) {
  double bnorm = rhs.norm();
  if (bnorm == 0) {
    if (out_res) *out_res = 0;
    return Vec::Zero(rhs.size());
  }
  SpC A = sys.stiffness - zeta * sys.mass_q0;
  A.makeCompressed();
  bool zre = zeta.imag() == 0;

  std::function<Vec(const Vec&)> apply_inverse;
  Eigen::SimplicialLDLT<SpR> ldlt_r;
  Eigen::SimplicialLDLT<SpC> ldlt_c;
  Eigen::SparseLU<SpC> lu;
  bool ready = false;

  if (zre && nearly_real(A)) {
    SpR Ar = real_part(A);
    ldlt_r.compute(Ar);
    if (ldlt_r.info() == Eigen::Success) {
      double dmin = ldlt_r.vectorD().minCoeff();
      double dmax = ldlt_r.vectorD().cwiseAbs().maxCoeff();
      if (zeta.real() <= 0 && dmin < -1e-10 * dmax)
        throw SolverError("shifted form is not positive definite; lambda shift too small");
      apply_inverse = [&ldlt_r](const Vec& b) {
        Eigen::VectorXd xr = ldlt_r.solve(b.real());
        Eigen::VectorXd xi = ldlt_r.solve(b.imag());
        return Vec(xr.cast<cplx>() + cplx(0, 1) * xi.cast<cplx>());
      };
      ready = true;
    }
  } else if (zre) {
    ldlt_c.compute(A);
    if (ldlt_c.info() == Eigen::Success) {
      apply_inverse = [&ldlt_c](const Vec& b) { return Vec(ldlt_c.solve(b)); };
      ready = true;
    }
  }
  if (!ready) {
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success)
      throw SolverError("shifted system factorization failed (zeta at a discrete eigenvalue?)");
    apply_inverse = [&lu](const Vec& b) { return Vec(lu.solve(b)); };
  }

  Vec x = apply_inverse(rhs);
  double rel = 1;
  for (int it = 0; it < 5; ++it) {
    Vec r = rhs - A * x;
    rel = r.norm() / bnorm;
    if (rel <= 1e-10) break;
    x += apply_inverse(r);
  }
  if (!(rel <= 1e-10))
    throw SolverError("iterative refinement stalled; zeta is numerically at a discrete eigenvalue");
  if (out_res) *out_res = rel;
  return x;
}

}  // namespace

SolveResult solve_resolvent(const DiscreteSystem& sys, cplx zeta, const Vec& F_nodal,
                            bool allow_real_axis) {
  auto t0 = std::chrono::steady_clock::now();
  validate_zeta(zeta, allow_real_axis);
  if (F_nodal.size() != sys.mesh.nodes * sys.n)
    throw ConfigError("load vector has the wrong length");

  Vec rhs_full = sys.mass_full * F_nodal;
  Vec rhs = restrict_to_dofs(sys.mesh, sys.n, rhs_full);
  SolveResult res;
  res.zeta = zeta;
  res.epsilon = sys.epsilon;
  Vec x = solve_shifted(sys, zeta, rhs, &res.residual);
  res.u = scatter_to_full(sys.mesh, sys.n, x);
  res.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

SolveResult solve_boundary_layer(const DiscreteSystem& sys, cplx zeta, const Vec& boundary_data,
                                 bool allow_real_axis) {
  auto t0 = std::chrono::steady_clock::now();
  validate_zeta(zeta, allow_real_axis);
  if (boundary_data.size() != sys.mesh.nodes * sys.n)
    throw ConfigError("boundary trace has the wrong length");

  Vec lift = Vec::Zero(sys.mesh.nodes * sys.n);
  for (long node = 0; node < sys.mesh.nodes; ++node)
    if (sys.mesh.is_boundary[node])
      for (int c = 0; c < sys.n; ++c) lift(node * sys.n + c) = boundary_data(node * sys.n + c);

  SolveResult res;
  res.zeta = zeta;
  res.epsilon = sys.epsilon;
  if (lift.norm() == 0) {
    res.u = lift;
    res.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
  }
  Vec coupled = (sys.stiffness_full - zeta * sys.mass_q0_full) * lift;
  Vec rhs = -restrict_to_dofs(sys.mesh, sys.n, coupled);
  Vec x = solve_shifted(sys, zeta, rhs, &res.residual);
  res.u = scatter_to_full(sys.mesh, sys.n, x) + lift;
  res.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

double smallest_generalized_eig(const DiscreteSystem& sys) {
  const SpC& K = sys.stiffness;
  const SpC& M = sys.mass_q0;
  Eigen::SimplicialLDLT<SpC> ldlt(K);
  if (ldlt.info() != Eigen::Success)
    throw SolverError("stiffness factorization failed in the spectrum-bottom estimate");
  long dim = K.rows();
  Vec x = Vec::Ones(dim);
  double mu = 0, prev = -1;
  for (int it = 0; it < 500; ++it) {
    Vec mx = M * x;
    Vec y = ldlt.solve(mx);
    double ny = std::sqrt(std::abs((y.adjoint() * (M * y))(0, 0).real()));
    if (ny == 0) throw SolverError("spectrum-bottom iteration degenerated");
    y /= ny;
    mu = (y.adjoint() * (K * y))(0, 0).real();
    if (std::abs(mu - prev) <= 1e-10 * std::max(1.0, std::abs(mu))) break;
    prev = mu;
    x = y;
  }
  return mu;
}

double estimate_c_flat(const DiscreteSystem& sys) { return 0.95 * smallest_generalized_eig(sys); }

}  // namespace homog
