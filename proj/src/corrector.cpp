#include "homog/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace homog {

namespace {

// C^2 smoothstep on [0, 1]
double sstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (t * (6 * t - 15) + 10);
}

// second-order difference along one axis, one-sided at the grid edges
Vec diff_axis(const Vec& v, int dim, const long* nn, double h, int n, int axis) {
  long n0 = nn[0], n1 = dim > 1 ? nn[1] : 1;
  long na = axis == 0 ? n0 : n1;
  if (na < 3) throw ConfigError("grid too small for second-order differences");
  long step = axis == 0 ? 1 : n0;
  Vec out(v.size());
  for (long i2 = 0; i2 < n1; ++i2)
    for (long i1 = 0; i1 < n0; ++i1) {
      long node = i2 * n0 + i1;
      long ia = axis == 0 ? i1 : i2;
      for (int c = 0; c < n; ++c) {
        long k = node * n + c;
        long sn = step * n;
        if (ia == 0)
          out(k) = (-3.0 * v(k) + 4.0 * v(k + sn) - v(k + 2 * sn)) / (2 * h);
        else if (ia == na - 1)
          out(k) = (3.0 * v(k) - 4.0 * v(k - sn) + v(k - 2 * sn)) / (2 * h);
        else
          out(k) = (v(k + sn) - v(k - sn)) / (2 * h);
      }
    }
  return out;
}

double sq_sum(const Vec& v) { return v.squaredNorm(); }

struct FoldTable {
  std::vector<long> idx;
  std::vector<double> sgn;
  std::vector<double> chi;
};

FoldTable make_fold(long ext_na, long mc, long src_na, double lo, double hi, double h,
                    double margin) {
  FoldTable t;
  t.idx.resize(ext_na);
  t.sgn.resize(ext_na);
  t.chi.resize(ext_na);
  long Na = src_na - 1;          // cells in the source grid
  long P = 2 * Na;
  double extent = hi - lo;
  double layer1 = std::min(extent, margin / 2);
  double ramp = margin - layer1;
  for (long i = 0; i < ext_na; ++i) {
    long k = i - mc;
    long m = ((k % P) + P) % P;
    double s = 1;
    if (m > Na) {
      m = P - m;
      s = -1;
    }
    t.idx[i] = m;
    t.sgn[i] = s;
    double x = lo - mc * h + i * h;
    double d = std::max({0.0, lo - x, x - hi});
    if (d <= layer1)
      t.chi[i] = 1;
    else
      t.chi[i] = 1 - sstep((d - layer1) / ramp);
  }
  return t;
}

}  // namespace

double grid_l2(const Vec& v, int dim, const long* nn, double h, int n) {
  (void)nn;
  (void)n;
  return std::sqrt(std::pow(h, dim) * sq_sum(v));
}

double grid_h1(const Vec& v, int dim, const long* nn, double h, int n) {
  double acc = sq_sum(v);
  for (int a = 0; a < dim; ++a) acc += sq_sum(diff_axis(v, dim, nn, h, n, a));
  return std::sqrt(std::pow(h, dim) * acc);
}

double grid_h2(const Vec& v, int dim, const long* nn, double h, int n) {
  double acc = sq_sum(v);
  for (int a = 0; a < dim; ++a) {
    Vec da = diff_axis(v, dim, nn, h, n, a);
    acc += sq_sum(da);
    for (int b = 0; b < dim; ++b) acc += sq_sum(diff_axis(da, dim, nn, h, n, b));
  }
  return std::sqrt(std::pow(h, dim) * acc);
}

ExtendedFunction extend(const DomainMesh& mesh, const Vec& u0, int n, double epsilon) {
  if (u0.size() != mesh.nodes * n) throw ConfigError("extension input has the wrong length");
  if (epsilon <= 0) throw ConfigError("epsilon must be positive");
  int dim = mesh.dim;
  double h = mesh.h;
  double r1 = std::sqrt(static_cast<double>(dim)) / 2;
  double need = 2 * r1 + 1;
  long mc = static_cast<long>(std::ceil(need / h - 1e-9));
  while (mc * h < need - 1e-12) ++mc;
  double margin = mc * h;
  if (epsilon * r1 > margin + 1e-12)
    throw ConfigError("extension margin too small for the requested epsilon");

  ExtendedFunction ef;
  ef.dim = dim;
  ef.n = n;
  ef.h = h;
  ef.domain = mesh.box;
  ef.margin = margin;
  ef.rule = "odd-reflection";
  ef.box.dim = dim;
  for (int a = 0; a < dim; ++a) {
    ef.box.lo[a] = mesh.box.lo[a] - margin;
    ef.box.hi[a] = mesh.box.hi[a] + margin;
    ef.nn[a] = mesh.nn[a] + 2 * mc;
    ef.off[a] = mc;
  }
  if (dim == 1) {
    ef.nn[1] = 1;
    ef.off[1] = 0;
  }
  ef.nodes = ef.nn[0] * ef.nn[1];
  ef.v = Vec::Zero(ef.nodes * n);

  FoldTable f1 = make_fold(ef.nn[0], mc, mesh.nn[0], mesh.box.lo[0], mesh.box.hi[0], h, margin);
  FoldTable f2;
  if (dim > 1)
    f2 = make_fold(ef.nn[1], mc, mesh.nn[1], mesh.box.lo[1], mesh.box.hi[1], h, margin);

  for (long i2 = 0; i2 < ef.nn[1]; ++i2) {
    double w2 = dim > 1 ? f2.sgn[i2] * f2.chi[i2] : 1.0;
    long s2 = dim > 1 ? f2.idx[i2] : 0;
    for (long i1 = 0; i1 < ef.nn[0]; ++i1) {
      double w = w2 * f1.sgn[i1] * f1.chi[i1];
      if (w == 0) continue;
      long src = mesh.index(static_cast<int>(f1.idx[i1]), static_cast<int>(s2));
      long dst = ef.index(i1, i2);
      for (int c = 0; c < n; ++c) ef.v(dst * n + c) = w * u0(src * n + c);
    }
  }

  long src_nn[2] = {mesh.nn[0], dim > 1 ? mesh.nn[1] : 1};
  double denom = grid_h2(u0, dim, src_nn, h, n);
  ef.c_ext = denom > 1e-300 ? grid_h2(ef.v, dim, ef.nn.data(), h, n) / denom : 0;
  return ef;
}

void smooth_extended(ExtendedFunction& f, double epsilon) {
  long W = std::lround(epsilon / f.h);
  if (std::abs(W * f.h - epsilon) > 1e-9 * epsilon)
    throw ConfigError("epsilon must be commensurate with the mesh for smoothing");
  if (W < 2 || W % 2 != 0)
    throw ConfigError("smoothing needs an even window of at least two cells");
  long H = W / 2;
  int n = f.n;

  for (int axis = 0; axis < f.dim; ++axis) {
    long na = axis == 0 ? f.nn[0] : f.nn[1];
    long nb = axis == 0 ? f.nn[1] : f.nn[0];
    long step = axis == 0 ? 1 : f.nn[0];
    long bstep = axis == 0 ? f.nn[0] : 1;
    std::vector<cplx> line(na);
    for (long b = 0; b < nb; ++b)
      for (int c = 0; c < n; ++c) {
        for (long i = 0; i < na; ++i) line[i] = f.v((b * bstep + i * step) * n + c);
        for (long i = 0; i < na; ++i) {
          cplx acc(0, 0);
          long lo = i - H, hi = i + H;
          if (lo >= 0) acc += 0.5 * line[lo];
          if (hi < na) acc += 0.5 * line[hi];
          long from = std::max(lo + 1, long(0)), to = std::min(hi - 1, na - 1);
          for (long k = from; k <= to; ++k) acc += line[k];
          f.v((b * bstep + i * step) * n + c) = acc / static_cast<double>(W);
        }
      }
  }
}

ExtendedFunction apply_bD_extended(const ExtendedFunction& u, const SymbolB& b) {
  if (u.n != b.n) throw ConfigError("symbol and extended function dimensions mismatch");
  ExtendedFunction out = u;
  out.n = b.m;
  out.v = Vec::Zero(u.nodes * b.m);
  for (int j = 0; j < b.dim; ++j) {
    Vec dj = diff_axis(u.v, u.dim, u.nn.data(), u.h, u.n, j);
    for (long node = 0; node < u.nodes; ++node)
      for (int r = 0; r < b.m; ++r) {
        cplx acc(0, 0);
        for (int s = 0; s < b.n; ++s) acc += b.b[j](r, s) * dj(node * u.n + s);
        out.v(node * b.m + r) += cplx(0, -1) * acc;
      }
  }
  return out;
}

namespace {

// shared final stage: K(x) = eps (Lambda^eps w(x) + Lt^eps s(x)) on the O grid
Vec corrector_combine(const DomainMesh& mesh, const CellSolution& cell, double eps, int n, int m,
                      const std::function<void(long, Vec&, Vec&)>& gather) {
  Vec K = Vec::Zero(mesh.nodes * n);
  Vec w(m), s(n);
  double x[2] = {0, 0};
  for (long node = 0; node < mesh.nodes; ++node) {
    mesh.coords(node, x);
    gather(node, w, s);
    Mat lam = oscillate(cell.lambda, eps, x);
    Mat lt = oscillate(cell.lambda_tilde, eps, x);
    Vec val = eps * (lam * w + lt * s);
    for (int c = 0; c < n; ++c) K(node * n + c) = val(c);
  }
  return K;
}

Vec grid_bD(const DomainMesh& mesh, const Vec& u0, const SymbolB& b) {
  long nn[2] = {mesh.nn[0], mesh.dim > 1 ? mesh.nn[1] : 1};
  Vec out = Vec::Zero(mesh.nodes * b.m);
  for (int j = 0; j < b.dim; ++j) {
    Vec dj = diff_axis(u0, mesh.dim, nn, mesh.h, b.n, j);
    for (long node = 0; node < mesh.nodes; ++node)
      for (int r = 0; r < b.m; ++r) {
        cplx acc(0, 0);
        for (int s = 0; s < b.n; ++s) acc += b.b[j](r, s) * dj(node * b.n + s);
        out(node * b.m + r) += cplx(0, -1) * acc;
      }
  }
  return out;
}

}  // namespace

CorrectorOutput first_order_approx(const DomainMesh& mesh, const Vec& u0, const SymbolB& b,
                                   const CellSolution& cell, double epsilon) {
  ExtendedFunction ext = extend(mesh, u0, b.n, epsilon);
  ExtendedFunction bd = apply_bD_extended(ext, b);
  smooth_extended(bd, epsilon);
  smooth_extended(ext, epsilon);

  CorrectorOutput out;
  out.smoothing = true;
  out.c_ext = ext.c_ext;
  auto gather = [&](long node, Vec& w, Vec& s) {
    long i1 = node % mesh.nn[0], i2 = node / mesh.nn[0];
    long enode = ext.index(i1 + ext.off[0], mesh.dim > 1 ? i2 + ext.off[1] : 0);
    for (int r = 0; r < b.m; ++r) w(r) = bd.v(enode * b.m + r);
    for (int c = 0; c < b.n; ++c) s(c) = ext.v(enode * b.n + c);
  };
  out.K_term = corrector_combine(mesh, cell, epsilon, b.n, b.m, gather);
  out.v_eps = u0 + out.K_term;
  return out;
}

CorrectorOutput corrector_no_smoothing(const DomainMesh& mesh, const Vec& u0, const SymbolB& b,
                                       const CellSolution& cell, double epsilon) {
  if (u0.size() != mesh.nodes * b.n) throw ConfigError("corrector input has the wrong length");
  Vec bd = grid_bD(mesh, u0, b);
  CorrectorOutput out;
  out.smoothing = false;
  auto gather = [&](long node, Vec& w, Vec& s) {
    for (int r = 0; r < b.m; ++r) w(r) = bd(node * b.m + r);
    for (int c = 0; c < b.n; ++c) s(c) = u0(node * b.n + c);
  };
  out.K_term = corrector_combine(mesh, cell, epsilon, b.n, b.m, gather);
  out.v_eps = u0 + out.K_term;
  return out;
}

Vec flux_approx(const DomainMesh& mesh, const Vec& u0, const SymbolB& b, const PeriodicField& g,
                const CellSolution& cell, double epsilon, bool smoothing) {
  if (u0.size() != mesh.nodes * b.n) throw ConfigError("flux input has the wrong length");
  Vec flux = Vec::Zero(mesh.nodes * b.m);
  double x[2] = {0, 0};

  auto combine = [&](long node, const Vec& w, const Vec& s) {
    mesh.coords(node, x);
    Mat gt = oscillate(cell.g_tilde, epsilon, x);
    Mat ge = oscillate(g, epsilon, x);
    Mat blt = oscillate(cell.b_lambda_tilde, epsilon, x);
    Vec val = gt * w + ge * (blt * s);
    for (int r = 0; r < b.m; ++r) flux(node * b.m + r) = val(r);
  };

  if (smoothing) {
    ExtendedFunction ext = extend(mesh, u0, b.n, epsilon);
    ExtendedFunction bd = apply_bD_extended(ext, b);
    smooth_extended(bd, epsilon);
    smooth_extended(ext, epsilon);
    Vec w(b.m), s(b.n);
    for (long node = 0; node < mesh.nodes; ++node) {
      long i1 = node % mesh.nn[0], i2 = node / mesh.nn[0];
      long enode = ext.index(i1 + ext.off[0], mesh.dim > 1 ? i2 + ext.off[1] : 0);
      for (int r = 0; r < b.m; ++r) w(r) = bd.v(enode * b.m + r);
      for (int c = 0; c < b.n; ++c) s(c) = ext.v(enode * b.n + c);
      combine(node, w, s);
    }
  } else {
    Vec bd = grid_bD(mesh, u0, b);
    Vec w(b.m), s(b.n);
    for (long node = 0; node < mesh.nodes; ++node) {
      for (int r = 0; r < b.m; ++r) w(r) = bd(node * b.m + r);
      for (int c = 0; c < b.n; ++c) s(c) = u0(node * b.n + c);
      combine(node, w, s);
    }
  }
  return flux;
}

CorrectorOutput boundary_corrector_trace(const DomainMesh& mesh, const Vec& u0, const SymbolB& b,
                                         const CellSolution& cell, double epsilon) {
  if (epsilon / 2 < 4 * mesh.h - 1e-12)
    throw ConfigError("boundary strip thinner than four mesh layers");
  CorrectorOutput out = first_order_approx(mesh, u0, b, cell, epsilon);

  out.theta = Vec::Zero(mesh.nodes);
  double x[2] = {0, 0};
  for (long node = 0; node < mesh.nodes; ++node) {
    mesh.coords(node, x);
    double d = 1e300;
    for (int a = 0; a < mesh.dim; ++a)
      d = std::min({d, x[a] - mesh.box.lo[a], mesh.box.hi[a] - x[a]});
    d = std::max(d, 0.0);
    out.theta(node) = 1 - sstep(2 * d / epsilon);
  }

  out.w_trace = Vec::Zero(mesh.nodes * b.n);
  for (long node = 0; node < mesh.nodes; ++node)
    for (int c = 0; c < b.n; ++c)
      out.w_trace(node * b.n + c) = out.theta(node) * out.K_term(node * b.n + c);

  long nn[2] = {mesh.nn[0], mesh.dim > 1 ? mesh.nn[1] : 1};
  double gmax = 0;
  std::vector<Vec> dth;
  for (int a = 0; a < mesh.dim; ++a)
    dth.push_back(diff_axis(out.theta, mesh.dim, nn, mesh.h, 1, a));
  for (long node = 0; node < mesh.nodes; ++node) {
    double g2 = 0;
    for (int a = 0; a < mesh.dim; ++a) g2 += std::norm(dth[a](node));
    gmax = std::max(gmax, g2);
  }
  out.mu = epsilon * std::sqrt(gmax);
  return out;
}

}  // namespace homog
