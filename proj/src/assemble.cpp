#include "homog/assemble.hpp"

#include <cmath>

namespace homog {

namespace {

// shape values and gradients of the multilinear element at the 2^d Gauss points
struct ShapeTable {
  int dim, nloc, nq;
  double w;
  std::vector<Eigen::VectorXd> phi;
  std::vector<Eigen::MatrixXd> dphi;
  std::vector<std::array<double, 2>> off;  // quad point offset within the element
};

ShapeTable make_shapes(int dim, double h) {
  ShapeTable t;
  t.dim = dim;
  t.nloc = 1 << dim;
  t.nq = 1 << dim;
  t.w = std::pow(h, dim) / t.nq;
  double gp[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  for (int q = 0; q < t.nq; ++q) {
    double xi[2] = {gp[q & 1], gp[(q >> 1) & 1]};
    t.off.push_back({h * xi[0], dim > 1 ? h * xi[1] : 0.0});
    Eigen::VectorXd ph(t.nloc);
    Eigen::MatrixXd dp(t.nloc, dim);
    for (int p = 0; p < t.nloc; ++p) {
      double val = 1;
      for (int a = 0; a < dim; ++a) {
        int bit = (p >> a) & 1;
        val *= bit ? xi[a] : (1 - xi[a]);
      }
      ph(p) = val;
      for (int a = 0; a < dim; ++a) {
        double der = 1;
        for (int c = 0; c < dim; ++c) {
          int bit = (p >> c) & 1;
          if (c == a)
            der *= (bit ? 1.0 : -1.0) / h;
          else
            der *= bit ? xi[c] : (1 - xi[c]);
        }
        dp(p, a) = der;
      }
    }
    t.phi.push_back(ph);
    t.dphi.push_back(dp);
  }
  return t;
}

// Providers return coefficient matrices at a physical point.
struct OscProvider {
  const OscillatingCoeffs* c;
  double eps, lambda;
  bool constant = false;
  Mat g(const double* x) const { return oscillate(c->g, eps, x); }
  Mat F(int j, const double* x) const {
    if (c->a.empty()) return Mat::Zero(c->Q.rows, c->Q.cols);
    return oscillate(c->a[j], eps, x);
  }
  Mat Z(const double* x) const {
    return oscillate(c->Q, eps, x) + lambda * oscillate(c->Q0, eps, x);
  }
  Mat Z0(const double* x) const { return oscillate(c->Q0, eps, x); }
};

struct EffProvider {
  Mat gm;
  std::vector<Mat> Fm;
  Mat Zm, Z0m;
  bool constant = true;
  Mat g(const double*) const { return gm; }
  Mat F(int j, const double*) const { return Fm[j]; }
  Mat Z(const double*) const { return Zm; }
  Mat Z0(const double*) const { return Z0m; }
};

template <class Prov>
void local_blocks(const ShapeTable& tab, const SymbolB& sym, const Prov& prov, double ex0,
                  double ex1, Mat& Kloc, Mat& M0loc) {
  int d = tab.dim, n = sym.n, nloc = tab.nloc;
  Kloc.setZero();
  M0loc.setZero();
  for (int q = 0; q < tab.nq; ++q) {
    double x[2] = {ex0 + tab.off[q][0], ex1 + tab.off[q][1]};
    Mat gx = prov.g(x);
    Mat Zx = prov.Z(x);
    Mat Z0x = prov.Z0(x);
    std::vector<Mat> Fx(d);
    for (int j = 0; j < d; ++j) Fx[j] = prov.F(j, x);
    std::vector<Mat> C(d * d);  // b_j^H g b_l
    for (int j = 0; j < d; ++j)
      for (int l = 0; l < d; ++l) C[j * d + l] = sym.b[j].adjoint() * gx * sym.b[l];

    const Eigen::VectorXd& ph = tab.phi[q];
    const Eigen::MatrixXd& dp = tab.dphi[q];
    for (int p = 0; p < nloc; ++p) {
      for (int qq = 0; qq < nloc; ++qq) {
        Mat blk = Mat::Zero(n, n);
        for (int j = 0; j < d; ++j) {
          for (int l = 0; l < d; ++l) blk += dp(p, j) * dp(qq, l) * C[j * d + l];
          blk += cplx(0, -1) * ph(p) * dp(qq, j) * Fx[j];
          blk += cplx(0, 1) * dp(p, j) * ph(qq) * Fx[j].adjoint();
        }
        blk += ph(p) * ph(qq) * Zx;
        Kloc.block(p * n, qq * n, n, n) += tab.w * blk;
        M0loc.block(p * n, qq * n, n, n) += tab.w * ph(p) * ph(qq) * Z0x;
      }
    }
  }
}

template <class Prov>
void assemble_full(const DomainMesh& mesh, const SymbolB& sym, const Prov& prov,
                   Eigen::SparseMatrix<cplx>& K_full, Eigen::SparseMatrix<cplx>& M0_full,
                   Eigen::SparseMatrix<cplx>& M_full) {
  int d = mesh.dim, n = sym.n;
  ShapeTable tab = make_shapes(d, mesh.h);
  int nloc = tab.nloc;
  long ldofs = static_cast<long>(nloc) * n;
  long dofs = mesh.nodes * n;
  int ne1 = mesh.nn[0] - 1;
  int ne2 = d > 1 ? mesh.nn[1] - 1 : 1;
  long nelem = static_cast<long>(ne1) * ne2;

  Mat Kloc(ldofs, ldofs), M0loc(ldofs, ldofs);
  bool precomputed = false;

  // plain mass has a constant local block
  Mat Mloc = Mat::Zero(ldofs, ldofs);
  for (int q = 0; q < tab.nq; ++q)
    for (int p = 0; p < nloc; ++p)
      for (int qq = 0; qq < nloc; ++qq)
        Mloc.block(p * n, qq * n, n, n) +=
            tab.w * tab.phi[q](p) * tab.phi[q](qq) * Mat::Identity(n, n);

  std::vector<Eigen::Triplet<cplx>> tK, tM0, tM;
  tK.reserve(nelem * ldofs * ldofs);
  tM0.reserve(nelem * ldofs * ldofs);
  tM.reserve(nelem * ldofs * ldofs);

  std::vector<long> loc_nodes(nloc);
  for (int e2 = 0; e2 < ne2; ++e2) {
    for (int e1 = 0; e1 < ne1; ++e1) {
      double ex0 = mesh.box.lo[0] + mesh.h * e1;
      double ex1 = d > 1 ? mesh.box.lo[1] + mesh.h * e2 : 0.0;
      if (!prov.constant || !precomputed) {
        local_blocks(tab, sym, prov, ex0, ex1, Kloc, M0loc);
        precomputed = true;
      }
      for (int p = 0; p < nloc; ++p) {
        int i1 = e1 + (p & 1);
        int i2 = d > 1 ? e2 + ((p >> 1) & 1) : 0;
        loc_nodes[p] = mesh.index(i1, i2);
      }
      for (int p = 0; p < nloc; ++p)
        for (int qq = 0; qq < nloc; ++qq)
          for (int r = 0; r < n; ++r)
            for (int s = 0; s < n; ++s) {
              long row = loc_nodes[p] * n + r;
              long col = loc_nodes[qq] * n + s;
              cplx kv = Kloc(p * n + r, qq * n + s);
              cplx m0v = M0loc(p * n + r, qq * n + s);
              cplx mv = Mloc(p * n + r, qq * n + s);
              if (kv != cplx(0, 0)) tK.emplace_back(row, col, kv);
              if (m0v != cplx(0, 0)) tM0.emplace_back(row, col, m0v);
              if (mv != cplx(0, 0)) tM.emplace_back(row, col, mv);
            }
    }
  }
  K_full.resize(dofs, dofs);
  K_full.setFromTriplets(tK.begin(), tK.end());
  tK.clear();
  tK.shrink_to_fit();
  M0_full.resize(dofs, dofs);
  M0_full.setFromTriplets(tM0.begin(), tM0.end());
  tM0.clear();
  tM0.shrink_to_fit();
  M_full.resize(dofs, dofs);
  M_full.setFromTriplets(tM.begin(), tM.end());
}

Eigen::SparseMatrix<cplx> restrict_mat(const Eigen::SparseMatrix<cplx>& A, const DomainMesh& mesh,
                                       int n) {
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(A.nonZeros());
  for (int k = 0; k < A.outerSize(); ++k)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(A, k); it; ++it) {
      long rn = it.row() / n, rc = it.row() % n;
      long cn = it.col() / n, cc = it.col() % n;
      long rd = mesh.dof_of[rn], cd = mesh.dof_of[cn];
      if (rd < 0 || cd < 0) continue;
      trip.emplace_back(rd * n + rc, cd * n + cc, it.value());
    }
  Eigen::SparseMatrix<cplx> out(mesh.ndof * n, mesh.ndof * n);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

void check_shapes(const DomainMesh& mesh, const OscillatingCoeffs& c, const SymbolB& b) {
  if (c.g.rows != b.m || c.g.cols != b.m) throw ConfigError("coefficient g must be m x m");
  if (!c.a.empty() && static_cast<int>(c.a.size()) != b.dim)
    throw ConfigError("need one a_j per dimension");
  for (const auto& aj : c.a)
    if (aj.rows != b.n || aj.cols != b.n) throw ConfigError("coefficient a_j must be n x n");
  if (c.Q.rows != b.n || c.Q.cols != b.n) throw ConfigError("coefficient Q must be n x n");
  if (c.Q0.rows != b.n || c.Q0.cols != b.n) throw ConfigError("coefficient Q0 must be n x n");
  if (mesh.dim != b.dim) throw ConfigError("mesh and symbol dimension mismatch");
}

}  // namespace

DiscreteSystem assemble_oscillating(const DomainMesh& mesh, const OscillatingCoeffs& coeffs,
                                    const SymbolB& b, double epsilon, double lambda_shift) {
  check_shapes(mesh, coeffs, b);
  if (epsilon <= 0) throw ConfigError("epsilon must be positive");
  if (mesh.h > epsilon / 16.0 + 1e-12) throw ConfigError("mesh under-resolves epsilon: need h <= eps/16");
  double q = epsilon / mesh.h;
  if (std::abs(q - std::lround(q)) > 1e-9) throw ConfigError("epsilon must be commensurate with the mesh");

  DiscreteSystem sys;
  sys.kind = DiscreteSystem::Kind::Oscillating;
  sys.mesh = mesh;
  sys.b = b;
  sys.n = b.n;
  sys.epsilon = epsilon;
  sys.lambda = lambda_shift;
  OscProvider prov{&coeffs, epsilon, lambda_shift};
  assemble_full(mesh, b, prov, sys.stiffness_full, sys.mass_q0_full, sys.mass_full);
  sys.stiffness = restrict_mat(sys.stiffness_full, mesh, b.n);
  sys.mass_q0 = restrict_mat(sys.mass_q0_full, mesh, b.n);
  return sys;
}

DiscreteSystem assemble_effective(const DomainMesh& mesh, const EffectiveOperator& eff) {
  if (mesh.dim != eff.b.dim) throw ConfigError("mesh and symbol dimension mismatch");
  DiscreteSystem sys;
  sys.kind = DiscreteSystem::Kind::Effective;
  sys.mesh = mesh;
  sys.b = eff.b;
  sys.n = eff.b.n;
  sys.epsilon = 0;
  sys.lambda = eff.lambda_shift;

  EffProvider prov;
  prov.gm = eff.g0;
  for (int j = 0; j < eff.b.dim; ++j)
    prov.Fm.push_back(eff.a_mean[j] / 2.0 - eff.V.adjoint() * eff.b.b[j]);
  prov.Zm = eff.Q_mean - eff.W + eff.lambda_shift * eff.Q0_mean;
  prov.Z0m = eff.Q0_mean;

  assemble_full(mesh, eff.b, prov, sys.stiffness_full, sys.mass_q0_full, sys.mass_full);
  sys.stiffness = restrict_mat(sys.stiffness_full, mesh, sys.n);
  sys.mass_q0 = restrict_mat(sys.mass_q0_full, mesh, sys.n);
  return sys;
}

Vec restrict_to_dofs(const DomainMesh& mesh, int n, const Vec& full) {
  Vec out(mesh.ndof * n);
  for (long d = 0; d < mesh.ndof; ++d)
    for (int c = 0; c < n; ++c) out(d * n + c) = full(mesh.node_of[d] * n + c);
  return out;
}

Vec scatter_to_full(const DomainMesh& mesh, int n, const Vec& dofs) {
  Vec out = Vec::Zero(mesh.nodes * n);
  for (long d = 0; d < mesh.ndof; ++d)
    for (int c = 0; c < n; ++c) out(mesh.node_of[d] * n + c) = dofs(d * n + c);
  return out;
}

}  // namespace homog
