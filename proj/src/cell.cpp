#include "homog/cell.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>

#include "homog/fft.hpp"

namespace homog {

namespace {

Eigen::VectorXd freq_xi(const PeriodicField& f, long t) {
  Eigen::VectorXd xi(f.dim);
  long i1 = t % f.n[0];
  long i2 = (t / f.n[0]) % f.n[1];
  long i3 = t / (static_cast<long>(f.n[0]) * f.n[1]);
  int idx[3] = {static_cast<int>(i1), static_cast<int>(i2), static_cast<int>(i3)};
  for (int a = 0; a < f.dim; ++a) xi(a) = 2.0 * pi * freq_of(idx[a], f.n[a]);
  return xi;
}

std::array<int, 3> grid_of(const PeriodicField& f) { return {f.n[0], f.n[1], f.n[2]}; }

// Matrix-free y = P0 b(D)^* g b(D) x on nodal vectors (node-major, nn comps).
struct SpectralOp {
  const PeriodicField& g;
  const SymbolB& sym;
  long total;
  int nn, m;
  Mat gbar;          // cell mean of g
  std::vector<Mat> b_at;  // b(xi_k) per frequency index

  SpectralOp(const PeriodicField& gf, const SymbolB& s)
      : g(gf), sym(s), total(gf.total()), nn(s.n), m(s.m) {
    gbar = cell_mean(gf);
    b_at.resize(total);
    for (long t = 0; t < total; ++t) b_at[t] = sym.at(freq_xi(gf, t));
  }

  Vec apply(const Vec& x) const {
    std::vector<std::vector<cplx>> comp(nn, std::vector<cplx>(total));
    for (long i = 0; i < total; ++i)
      for (int c = 0; c < nn; ++c) comp[c][i] = x(i * nn + c);
    for (int c = 0; c < nn; ++c) fft_forward(g.dim, grid_of(g), comp[c]);

    std::vector<std::vector<cplx>> w(m, std::vector<cplx>(total));
    for (long t = 0; t < total; ++t) {
      const Mat& bt = b_at[t];
      for (int r = 0; r < m; ++r) {
        cplx acc = 0;
        for (int c = 0; c < nn; ++c) acc += bt(r, c) * comp[c][t];
        w[r][t] = acc;
      }
    }
    for (int r = 0; r < m; ++r) fft_inverse(g.dim, grid_of(g), w[r]);

    std::vector<cplx> z(m);
    for (long i = 0; i < total; ++i) {
      const Mat& gi = g.v[i];
      for (int r = 0; r < m; ++r) {
        cplx acc = 0;
        for (int c = 0; c < m; ++c) acc += gi(r, c) * w[c][i];
        z[r] = acc;
      }
      for (int r = 0; r < m; ++r) w[r][i] = z[r];
    }
    for (int r = 0; r < m; ++r) fft_forward(g.dim, grid_of(g), w[r]);

    Vec y(total * nn);
    std::vector<std::vector<cplx>> out(nn, std::vector<cplx>(total));
    for (long t = 0; t < total; ++t) {
      const Mat& bt = b_at[t];
      for (int c = 0; c < nn; ++c) {
        cplx acc = 0;
        if (t != 0) {
          for (int r = 0; r < m; ++r) acc += std::conj(bt(r, c)) * w[r][t];
        }
        out[c][t] = acc;
      }
    }
    for (int c = 0; c < nn; ++c) fft_inverse(g.dim, grid_of(g), out[c]);
    for (long i = 0; i < total; ++i)
      for (int c = 0; c < nn; ++c) y(i * nn + c) = out[c][i];
    return y;
  }

  // z = M^{-1} r with the constant-coefficient symbol b(xi)^* gbar b(xi)
  Vec precondition(const Vec& r) const {
    std::vector<std::vector<cplx>> comp(nn, std::vector<cplx>(total));
    for (long i = 0; i < total; ++i)
      for (int c = 0; c < nn; ++c) comp[c][i] = r(i * nn + c);
    for (int c = 0; c < nn; ++c) fft_forward(g.dim, grid_of(g), comp[c]);
    for (long t = 0; t < total; ++t) {
      if (t == 0) {
        for (int c = 0; c < nn; ++c) comp[c][t] = 0;
        continue;
      }
      const Mat& bt = b_at[t];
      Mat s = bt.adjoint() * gbar * bt;
      Vec rhs(nn);
      for (int c = 0; c < nn; ++c) rhs(c) = comp[c][t];
      Vec sol = s.ldlt().solve(rhs);
      for (int c = 0; c < nn; ++c) comp[c][t] = sol(c);
    }
    for (int c = 0; c < nn; ++c) fft_inverse(g.dim, grid_of(g), comp[c]);
    Vec z(total * nn);
    for (long i = 0; i < total; ++i)
      for (int c = 0; c < nn; ++c) z(i * nn + c) = comp[c][i];
    return z;
  }
};

Vec project_mean_zero(Vec x, long total, int nn) {
  for (int c = 0; c < nn; ++c) {
    cplx mean = 0;
    for (long i = 0; i < total; ++i) mean += x(i * nn + c);
    mean /= static_cast<double>(total);
    for (long i = 0; i < total; ++i) x(i * nn + c) -= mean;
  }
  return x;
}

// Dense Galerkin solve in Fourier coordinates; exact mirror of SpectralOp.
Vec dense_solve(const SpectralOp& op, const Vec& rhs) {
  long total = op.total;
  int nn = op.nn;
  long dofs = (total - 1) * nn;
  // Fourier coefficients of g, entry by entry
  std::vector<Mat> ghat(total, Mat(op.m, op.m));
  {
    std::vector<cplx> buf(total);
    for (int r = 0; r < op.m; ++r)
      for (int c = 0; c < op.m; ++c) {
        for (long i = 0; i < total; ++i) buf[i] = op.g.v[i](r, c);
        fft_forward(op.g.dim, grid_of(op.g), buf);
        for (long t = 0; t < total; ++t) ghat[t](r, c) = buf[t];
      }
  }
  auto wrap_diff = [&](long ta, long tb) {
    // frequency difference (k_a - k_b) mod grid, as a flat index
    long out = 0, mul = 1;
    long ra = ta, rb = tb;
    for (int axis = 0; axis < op.g.dim; ++axis) {
      int na = op.g.n[axis];
      long ia = ra % na, ib = rb % na;
      ra /= na;
      rb /= na;
      long d = (ia - ib) % na;
      if (d < 0) d += na;
      out += d * mul;
      mul *= na;
    }
    return out;
  };
  Mat A = Mat::Zero(dofs, dofs);
  Vec b(dofs);
  for (long tr = 1; tr < total; ++tr) {
    for (int r = 0; r < nn; ++r) b((tr - 1) * nn + r) = 0;
    for (long tc = 1; tc < total; ++tc) {
      Mat block = op.b_at[tr].adjoint() * ghat[wrap_diff(tr, tc)] * op.b_at[tc];
      for (int r = 0; r < nn; ++r)
        for (int c = 0; c < nn; ++c) A((tr - 1) * nn + r, (tc - 1) * nn + c) = block(r, c);
    }
  }
  // rhs into Fourier coordinates
  std::vector<std::vector<cplx>> comp(nn, std::vector<cplx>(total));
  for (long i = 0; i < total; ++i)
    for (int c = 0; c < nn; ++c) comp[c][i] = rhs(i * nn + c);
  for (int c = 0; c < nn; ++c) fft_forward(op.g.dim, grid_of(op.g), comp[c]);
  for (long t = 1; t < total; ++t)
    for (int c = 0; c < nn; ++c) b((t - 1) * nn + c) = comp[c][t];

  Vec sol = A.partialPivLu().solve(b);

  for (int c = 0; c < nn; ++c) comp[c][0] = 0;
  for (long t = 1; t < total; ++t)
    for (int c = 0; c < nn; ++c) comp[c][t] = sol((t - 1) * nn + c);
  for (int c = 0; c < nn; ++c) fft_inverse(op.g.dim, grid_of(op.g), comp[c]);
  Vec x(total * nn);
  for (long i = 0; i < total; ++i)
    for (int c = 0; c < nn; ++c) x(i * nn + c) = comp[c][i];
  return x;
}

// Preconditioned CG for the Hermitian positive definite cell operator.
Vec pcg_solve(const SpectralOp& op, const Vec& rhs, double tol, double* rel_res) {
  double bnorm = rhs.norm();
  if (bnorm < 1e-280) {
    if (rel_res) *rel_res = 0;
    return Vec::Zero(rhs.size());
  }
  Vec x = Vec::Zero(rhs.size());
  Vec r = rhs;
  Vec z = op.precondition(r);
  Vec p = z;
  cplx rz = r.dot(z);
  const int maxit = 600;
  for (int it = 0; it < maxit; ++it) {
    Vec q = op.apply(p);
    cplx pq = p.dot(q);
    if (std::abs(pq) == 0) break;
    cplx alpha = rz / pq;
    x += alpha * p;
    r -= alpha * q;
    double rn = r.norm() / bnorm;
    if (rn < tol) {
      if (rel_res) *rel_res = rn;
      return project_mean_zero(std::move(x), op.total, op.nn);
    }
    z = op.precondition(r);
    cplx rz_new = r.dot(z);
    cplx beta = rz_new / rz;
    rz = rz_new;
    p = z + beta * p;
  }
  // stagnation: dense fallback when the system is small enough
  if ((op.total - 1) * op.nn <= 4200) {
    Vec sol = dense_solve(op, rhs);
    if (rel_res) *rel_res = (op.apply(sol) - rhs).norm() / bnorm;
    return project_mean_zero(std::move(sol), op.total, op.nn);
  }
  throw SolverError("cell solve: CG stagnated and problem too large for dense fallback");
}

PeriodicField field_like(const PeriodicField& ref, int rows, int cols) {
  PeriodicField f;
  f.dim = ref.dim;
  f.n = ref.n;
  f.rows = rows;
  f.cols = cols;
  f.v.assign(ref.total(), Mat::Zero(rows, cols));
  return f;
}

void check_spectral_inputs(const PeriodicField& g, const SymbolB& sym) {
  if (g.rows != sym.m || g.cols != sym.m) throw ConfigError("cell solve: g must be m x m");
  if (g.staggered) throw ConfigError("cell solve: spectral backend needs nodal samples");
  if (!is_hermitian_field(g, 1e-10 * std::max(1.0, linf_spectral(g))))
    throw ConfigError("cell solve: g is not Hermitian");
}

// ---------------------------------------------------------------------------
// FEM backend: periodic multilinear elements, element-constant coefficients.
// Exact for coefficients that are constant on grid cells (grid-aligned jumps).

struct FemCell {
  int dim;
  int N;            // nodes = elements per axis
  int nn;           // solution components
  const SymbolB& sym;
  const PeriodicField& g;
  double h;
  long nodes;
  Eigen::SparseMatrix<cplx> K;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<cplx>> ldlt;

  long node_index(int i1, int i2) const {
    return static_cast<long>(i2) * N + i1;
  }

  FemCell(const PeriodicField& gf, const SymbolB& s)
      : dim(gf.dim), N(gf.n[0]), nn(s.n), sym(s), g(gf), h(1.0 / gf.n[0]) {
    if (dim > 2) throw ConfigError("fem cell backend supports dim <= 2");
    if (dim == 2 && gf.n[1] != N) throw ConfigError("fem cell backend needs a square grid");
    nodes = 1;
    for (int a = 0; a < dim; ++a) nodes *= N;
    assemble();
  }

  // local gradient integrals int_e d_j phi_p d_l phi_q dx (exact for Q1)
  // and int_e d_j phi_p dx, int_e phi_p dx
  void local_tables(std::vector<Eigen::MatrixXd>& gradgrad, Eigen::MatrixXd& gradint) const {
    int nloc = 1 << dim;
    // 2-point Gauss per axis on [0,h]^dim
    std::vector<double> gp = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
    gradgrad.assign(dim * dim, Eigen::MatrixXd::Zero(nloc, nloc));
    gradint = Eigen::MatrixXd::Zero(nloc, dim);
    int nq = 1;
    for (int a = 0; a < dim; ++a) nq *= 2;
    for (int q = 0; q < nq; ++q) {
      double xi[2] = {gp[q % 2], gp[(q / 2) % 2]};
      double w = std::pow(h, dim) / nq;
      // shape functions and gradients at the quadrature point
      Eigen::VectorXd phi(nloc);
      Eigen::MatrixXd dphi(nloc, dim);
      for (int p = 0; p < nloc; ++p) {
        double val = 1;
        for (int a = 0; a < dim; ++a) {
          int bit = (p >> a) & 1;
          val *= bit ? xi[a] : (1 - xi[a]);
        }
        phi(p) = val;
        for (int a = 0; a < dim; ++a) {
          double der = 1;
          for (int c = 0; c < dim; ++c) {
            int bit = (p >> c) & 1;
            if (c == a) {
              der *= (bit ? 1.0 : -1.0) / h;
            } else {
              der *= bit ? xi[c] : (1 - xi[c]);
            }
          }
          dphi(p, a) = der;
        }
      }
      for (int j = 0; j < dim; ++j) {
        for (int l = 0; l < dim; ++l)
          gradgrad[j * dim + l] += w * (dphi.col(j) * dphi.col(l).transpose());
        gradint.col(j) += w * dphi.col(j);
      }
    }
  }

  void assemble() {
    int nloc = 1 << dim;
    std::vector<Eigen::MatrixXd> gradgrad;
    Eigen::MatrixXd gradint;
    local_tables(gradgrad, gradint);

    std::vector<Eigen::Triplet<cplx>> trip;
    long ne = nodes;  // one element per node (periodic)
    trip.reserve(ne * nloc * nloc * nn * nn);
    int n2 = dim > 1 ? N : 1;
    for (int e2 = 0; e2 < n2; ++e2) {
      for (int e1 = 0; e1 < N; ++e1) {
        const Mat& ge = g.v[g.index(e1, dim > 1 ? e2 : 0, 0)];
        long loc_nodes[4];
        for (int p = 0; p < nloc; ++p) {
          int i1 = (e1 + (p & 1)) % N;
          int i2 = dim > 1 ? (e2 + ((p >> 1) & 1)) % N : 0;
          loc_nodes[p] = node_index(i1, i2);
        }
        for (int p = 0; p < nloc; ++p) {
          for (int q = 0; q < nloc; ++q) {
            // sum_{j,l} (b_j^H g b_l) * int d_l phi_q d_j phi_p
            Mat blk = Mat::Zero(nn, nn);
            for (int j = 0; j < dim; ++j)
              for (int l = 0; l < dim; ++l)
                blk += gradgrad[j * dim + l](p, q) * (sym.b[j].adjoint() * ge * sym.b[l]);
            for (int r = 0; r < nn; ++r)
              for (int c = 0; c < nn; ++c) {
                long row = loc_nodes[p] * nn + r;
                long col = loc_nodes[q] * nn + c;
                trip.emplace_back(row, col, blk(r, c));
              }
          }
        }
      }
    }
    // pin node 0 components to remove the constant kernel
    long dofs = nodes * nn;
    std::vector<Eigen::Triplet<cplx>> kept;
    kept.reserve(trip.size() + nn);
    for (const auto& t : trip) {
      bool pinned = t.row() < nn || t.col() < nn;
      if (!pinned) kept.push_back(t);
    }
    for (int c = 0; c < nn; ++c) kept.emplace_back(c, c, cplx(1, 0));
    K.resize(dofs, dofs);
    K.setFromTriplets(kept.begin(), kept.end());
    ldlt.compute(K);
    if (ldlt.info() != Eigen::Success) throw SolverError("fem cell backend: factorization failed");
  }

  Vec solve(const Vec& rhs, double* rel_res) const {
    Vec b = rhs;
    for (int c = 0; c < nn; ++c) b(c) = 0;
    Vec x = ldlt.solve(b);
    double bn = b.norm();
    if (rel_res) *rel_res = bn > 0 ? (K * x - b).norm() / bn : 0.0;
    return project_mean_zero(std::move(x), nodes, nn);
  }

  // rhs for the Lambda column: -(g e_col, b(D) test)
  Vec rhs_lambda(int col) const {
    int nloc = 1 << dim;
    std::vector<Eigen::MatrixXd> gradgrad;
    Eigen::MatrixXd gradint;
    local_tables(gradgrad, gradint);
    Vec b = Vec::Zero(nodes * nn);
    int n2 = dim > 1 ? N : 1;
    for (int e2 = 0; e2 < n2; ++e2) {
      for (int e1 = 0; e1 < N; ++e1) {
        const Mat& ge = g.v[g.index(e1, dim > 1 ? e2 : 0, 0)];
        for (int p = 0; p < nloc; ++p) {
          int i1 = (e1 + (p & 1)) % N;
          int i2 = dim > 1 ? (e2 + ((p >> 1) & 1)) % N : 0;
          long node = node_index(i1, i2);
          for (int j = 0; j < dim; ++j) {
            // (b(D)phi_p e_r)^H g e_col with b(D)phi = -i d_j phi b_j
            Vec contrib = cplx(0, 1) * (sym.b[j].adjoint() * ge.col(col)) * gradint(p, j);
            for (int r = 0; r < nn; ++r) b(node * nn + r) -= contrib(r);
          }
        }
      }
    }
    return b;
  }

  // rhs for the Lambda~ column: -sum_j (a_j^* e_col, D_j test)
  Vec rhs_lambda_tilde(const std::vector<PeriodicField>& a, int col) const {
    int nloc = 1 << dim;
    std::vector<Eigen::MatrixXd> gradgrad;
    Eigen::MatrixXd gradint;
    local_tables(gradgrad, gradint);
    Vec b = Vec::Zero(nodes * nn);
    int n2 = dim > 1 ? N : 1;
    for (int e2 = 0; e2 < n2; ++e2) {
      for (int e1 = 0; e1 < N; ++e1) {
        for (int p = 0; p < nloc; ++p) {
          int i1 = (e1 + (p & 1)) % N;
          int i2 = dim > 1 ? (e2 + ((p >> 1) & 1)) % N : 0;
          long node = node_index(i1, i2);
          for (int j = 0; j < dim; ++j) {
            const Mat& aj = a[j].v[a[j].index(e1, dim > 1 ? e2 : 0, 0)];
            // (D_j phi_p e_r)^H a_j^H e_col = +i d_j phi_p (a_j^H e_col)_r
            Vec contrib = cplx(0, 1) * (aj.adjoint().col(col)) * gradint(p, j);
            for (int r = 0; r < nn; ++r) b(node * nn + r) -= contrib(r);
          }
        }
      }
    }
    return b;
  }

  // element-center value of b(D)u for a nodal solution column
  void bD_at_centers(const Vec& u, PeriodicField& out, int col) const {
    int nloc = 1 << dim;
    int n2 = dim > 1 ? N : 1;
    for (int e2 = 0; e2 < n2; ++e2) {
      for (int e1 = 0; e1 < N; ++e1) {
        Vec grad[2];
        for (int j = 0; j < dim; ++j) grad[j] = Vec::Zero(nn);
        for (int p = 0; p < nloc; ++p) {
          int i1 = (e1 + (p & 1)) % N;
          int i2 = dim > 1 ? (e2 + ((p >> 1) & 1)) % N : 0;
          long node = node_index(i1, i2);
          for (int j = 0; j < dim; ++j) {
            // d_j phi_p at the element center
            double der = ((p >> j) & 1) ? 1.0 / h : -1.0 / h;
            der *= std::pow(0.5, dim - 1);
            for (int r = 0; r < nn; ++r) grad[j](r) += der * u(node * nn + r);
          }
        }
        Vec bd = Vec::Zero(sym.m);
        for (int j = 0; j < dim; ++j) bd += cplx(0, -1) * (sym.b[j] * grad[j]);
        long e = g.index(e1, dim > 1 ? e2 : 0, 0);
        for (int r = 0; r < sym.m; ++r) out.v[e](r, col) = bd(r);
      }
    }
  }
};

bool wants_fem_backend(const CellProblem& p) {
  if (p.g.from_piecewise) return true;
  for (const auto& aj : p.a)
    if (aj.from_piecewise) return true;
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------

PeriodicField spectral_Dj(const PeriodicField& u, int j) {
  if (u.staggered) throw ConfigError("spectral_Dj: needs nodal samples");
  PeriodicField out = field_like(u, u.rows, u.cols);
  std::vector<cplx> buf(u.total());
  for (int r = 0; r < u.rows; ++r) {
    for (int c = 0; c < u.cols; ++c) {
      for (long i = 0; i < u.total(); ++i) buf[i] = u.v[i](r, c);
      fft_forward(u.dim, grid_of(u), buf);
      for (long t = 0; t < u.total(); ++t) {
        Eigen::VectorXd xi = freq_xi(u, t);
        buf[t] *= xi(j);  // D_j = -i d_j multiplies e^{i xi.x} by xi_j
      }
      fft_inverse(u.dim, grid_of(u), buf);
      for (long i = 0; i < u.total(); ++i) out.v[i](r, c) = buf[i];
    }
  }
  return out;
}

PeriodicField apply_bD(const SymbolB& sym, const PeriodicField& u) {
  if (u.rows != sym.n) throw ConfigError("apply_bD: field must have n rows");
  PeriodicField out = field_like(u, sym.m, u.cols);
  for (int j = 0; j < sym.dim; ++j) {
    PeriodicField dj = spectral_Dj(u, j);
    for (long i = 0; i < u.total(); ++i) out.v[i] += sym.b[j] * dj.v[i];
  }
  return out;
}

PeriodicField solve_lambda(const PeriodicField& g, const SymbolB& sym, double* residual) {
  if (g.from_piecewise) {
    FemCell fem(g, sym);
    PeriodicField lambda = field_like(g, sym.n, sym.m);
    double worst = 0;
    for (int col = 0; col < sym.m; ++col) {
      double rr = 0;
      Vec u = fem.solve(fem.rhs_lambda(col), &rr);
      worst = std::max(worst, rr);
      for (long i = 0; i < lambda.total(); ++i)
        for (int r = 0; r < sym.n; ++r) lambda.v[i](r, col) = u(i * sym.n + r);
    }
    if (residual) *residual = worst;
    return lambda;
  }
  check_spectral_inputs(g, sym);
  SpectralOp op(g, sym);
  PeriodicField lambda = field_like(g, sym.n, sym.m);
  double worst = 0;
  for (int col = 0; col < sym.m; ++col) {
    // rhs = -b(D)^* (g e_col)
    Vec e = Vec::Zero(g.total() * sym.n);
    std::vector<std::vector<cplx>> w(sym.m, std::vector<cplx>(g.total()));
    for (long i = 0; i < g.total(); ++i)
      for (int r = 0; r < sym.m; ++r) w[r][i] = g.v[i](r, col);
    for (int r = 0; r < sym.m; ++r) fft_forward(g.dim, grid_of(g), w[r]);
    std::vector<std::vector<cplx>> rr(sym.n, std::vector<cplx>(g.total()));
    for (long t = 0; t < g.total(); ++t) {
      for (int c = 0; c < sym.n; ++c) {
        cplx acc = 0;
        if (t != 0)
          for (int r = 0; r < sym.m; ++r) acc += std::conj(op.b_at[t](r, c)) * w[r][t];
        rr[c][t] = -acc;
      }
    }
    for (int c = 0; c < sym.n; ++c) fft_inverse(g.dim, grid_of(g), rr[c]);
    for (long i = 0; i < g.total(); ++i)
      for (int c = 0; c < sym.n; ++c) e(i * sym.n + c) = rr[c][i];

    double res = 0;
    Vec u = pcg_solve(op, e, 1e-12, &res);
    worst = std::max(worst, res);
    for (long i = 0; i < g.total(); ++i)
      for (int r = 0; r < sym.n; ++r) lambda.v[i](r, col) = u(i * sym.n + r);
  }
  if (residual) *residual = worst;
  return lambda;
}

PeriodicField solve_lambda_tilde(const PeriodicField& g, const SymbolB& sym,
                                 const std::vector<PeriodicField>& a, double* residual) {
  if (a.empty()) {
    if (residual) *residual = 0;
    return field_like(g, sym.n, sym.n);
  }
  if (static_cast<int>(a.size()) != sym.dim)
    throw ConfigError("solve_lambda_tilde: need one a_j per dimension");
  if (g.from_piecewise || a[0].from_piecewise) {
    FemCell fem(g, sym);
    PeriodicField lt = field_like(g, sym.n, sym.n);
    double worst = 0;
    for (int col = 0; col < sym.n; ++col) {
      double rr = 0;
      Vec u = fem.solve(fem.rhs_lambda_tilde(a, col), &rr);
      worst = std::max(worst, rr);
      for (long i = 0; i < lt.total(); ++i)
        for (int r = 0; r < sym.n; ++r) lt.v[i](r, col) = u(i * sym.n + r);
    }
    if (residual) *residual = worst;
    return lt;
  }
  check_spectral_inputs(g, sym);
  SpectralOp op(g, sym);
  PeriodicField lt = field_like(g, sym.n, sym.n);
  double worst = 0;
  for (int col = 0; col < sym.n; ++col) {
    // rhs = -sum_j D_j (a_j^* e_col)
    PeriodicField h = field_like(g, sym.n, 1);
    for (long i = 0; i < g.total(); ++i) h.v[i] = Mat::Zero(sym.n, 1);
    Vec rhs = Vec::Zero(g.total() * sym.n);
    for (int j = 0; j < sym.dim; ++j) {
      PeriodicField hj = field_like(g, sym.n, 1);
      for (long i = 0; i < g.total(); ++i) hj.v[i] = a[j].v[i].adjoint().col(col);
      PeriodicField dj = spectral_Dj(hj, j);
      for (long i = 0; i < g.total(); ++i)
        for (int r = 0; r < sym.n; ++r) rhs(i * sym.n + r) -= dj.v[i](r, 0);
    }
    rhs = project_mean_zero(std::move(rhs), g.total(), sym.n);
    double res = 0;
    Vec u = pcg_solve(op, rhs, 1e-12, &res);
    worst = std::max(worst, res);
    for (long i = 0; i < g.total(); ++i)
      for (int r = 0; r < sym.n; ++r) lt.v[i](r, col) = u(i * sym.n + r);
  }
  if (residual) *residual = worst;
  return lt;
}

PeriodicField assemble_g_tilde(const PeriodicField& g, const PeriodicField& b_lambda) {
  PeriodicField gt = field_like(g, g.rows, g.cols);
  gt.staggered = b_lambda.staggered;
  gt.from_piecewise = g.from_piecewise || b_lambda.from_piecewise;
  Mat eye = Mat::Identity(g.rows, g.cols);
  for (long i = 0; i < g.total(); ++i) gt.v[i] = g.v[i] * (b_lambda.v[i] + eye);
  return gt;
}

PeriodicField assemble_g_tilde(const PeriodicField& g, const PeriodicField& lambda,
                               const SymbolB& b) {
  return assemble_g_tilde(g, apply_bD(b, lambda));
}

Mat effective_matrix(const PeriodicField& g_tilde) { return cell_mean(g_tilde); }

Mat compute_V(const PeriodicField& g, const PeriodicField& b_lambda,
              const PeriodicField& b_lambda_tilde) {
  Mat acc = Mat::Zero(b_lambda.cols, b_lambda_tilde.cols);
  for (long i = 0; i < g.total(); ++i)
    acc += b_lambda.v[i].adjoint() * g.v[i] * b_lambda_tilde.v[i];
  return acc / static_cast<double>(g.total());
}

Mat compute_W(const PeriodicField& g, const PeriodicField& b_lambda_tilde) {
  Mat acc = Mat::Zero(b_lambda_tilde.cols, b_lambda_tilde.cols);
  for (long i = 0; i < g.total(); ++i)
    acc += b_lambda_tilde.v[i].adjoint() * g.v[i] * b_lambda_tilde.v[i];
  return acc / static_cast<double>(g.total());
}

CellSolution solve_cell(const CellProblem& p) {
  CellSolution out;
  bool fem = wants_fem_backend(p);
  out.backend = fem ? "fem" : "spectral";
  out.lambda = solve_lambda(p.g, p.b, &out.residual_lambda);
  out.lambda_tilde = solve_lambda_tilde(p.g, p.b, p.a, &out.residual_lambda_tilde);

  if (fem) {
    FemCell f(p.g, p.b);
    out.b_lambda = field_like(p.g, p.b.m, p.b.m);
    out.b_lambda.staggered = true;
    out.b_lambda.from_piecewise = true;
    for (int col = 0; col < p.b.m; ++col) {
      Vec u(p.g.total() * p.b.n);
      for (long i = 0; i < p.g.total(); ++i)
        for (int r = 0; r < p.b.n; ++r) u(i * p.b.n + r) = out.lambda.v[i](r, col);
      f.bD_at_centers(u, out.b_lambda, col);
    }
    out.b_lambda_tilde = field_like(p.g, p.b.m, p.b.n);
    out.b_lambda_tilde.staggered = true;
    out.b_lambda_tilde.from_piecewise = true;
    for (int col = 0; col < p.b.n; ++col) {
      Vec u(p.g.total() * p.b.n);
      for (long i = 0; i < p.g.total(); ++i)
        for (int r = 0; r < p.b.n; ++r) u(i * p.b.n + r) = out.lambda_tilde.v[i](r, col);
      f.bD_at_centers(u, out.b_lambda_tilde, col);
    }
  } else {
    out.b_lambda = apply_bD(p.b, out.lambda);
    out.b_lambda_tilde = apply_bD(p.b, out.lambda_tilde);
  }

  out.g_tilde = assemble_g_tilde(p.g, out.b_lambda);
  out.g0 = effective_matrix(out.g_tilde);
  out.V = compute_V(p.g, out.b_lambda, out.b_lambda_tilde);
  out.W = compute_W(p.g, out.b_lambda_tilde);
  return out;
}

}  // namespace homog
