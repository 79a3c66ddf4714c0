#include "homog/verify.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>

#include "homog/periodic_field.hpp"

namespace homog {

double c_phi(double phi) {
  if (!(phi > 0.0) || !(phi < 2.0 * pi))
    throw ConfigError("phi must lie strictly between 0 and 2 pi");
  if (phi < 0.5 * pi || phi > 1.5 * pi) return 1.0 / std::abs(std::sin(phi));
  return 1.0;
}

double rho_flat(cplx zeta, double c_flat) {
  cplx w = zeta - c_flat;
  if (w.imag() == 0.0 && w.real() >= 0.0)
    throw ConfigError("zeta lies on the ray [c_flat, inf)");
  double psi = std::arg(w);
  if (psi < 0) psi += 2.0 * pi;
  double c = c_phi(psi);
  double r = std::abs(w);
  return r < 1.0 ? c * c / (r * r) : c * c;
}

double estimate_c_flat(const DiscreteSystem& eff, const std::vector<const DiscreteSystem*>& osc) {
  double bottom = smallest_generalized_eig(eff);
  for (const DiscreteSystem* s : osc) bottom = std::min(bottom, smallest_generalized_eig(*s));
  return std::max(0.0, 0.95 * bottom);
}

namespace {

constexpr double kGauss = 0.28867513459481288225;  // 1 / (2 sqrt(3))

// exact integrals of |v|^2 and |grad v|^2 for the multilinear interpolant
void quad_core(const DomainMesh& mesh, const Vec& v, int k, bool interior_only, double& l2sq,
               double& h1sq) {
  if (v.size() != mesh.nodes * k) throw ConfigError("quadrature field has the wrong length");
  l2sq = 0;
  h1sq = 0;
  const double gp[2] = {0.5 - kGauss, 0.5 + kGauss};
  if (mesh.dim == 1) {
    const double w = mesh.h / 2;
    for (int i = 0; i + 1 < mesh.nn[0]; ++i) {
      if (interior_only && !(mesh.in_interior_sub(i) && mesh.in_interior_sub(i + 1))) continue;
      for (int c = 0; c < k; ++c) {
        cplx a = v(static_cast<long>(i) * k + c), d = v(static_cast<long>(i + 1) * k + c);
        for (double t : gp) l2sq += w * std::norm((1 - t) * a + t * d);
        h1sq += mesh.h * std::norm((d - a) / mesh.h);
      }
    }
    return;
  }
  const double w = mesh.h * mesh.h / 4;
  for (int i2 = 0; i2 + 1 < mesh.nn[1]; ++i2)
    for (int i1 = 0; i1 + 1 < mesh.nn[0]; ++i1) {
      long n00 = mesh.index(i1, i2), n10 = mesh.index(i1 + 1, i2);
      long n01 = mesh.index(i1, i2 + 1), n11 = mesh.index(i1 + 1, i2 + 1);
      if (interior_only &&
          !(mesh.in_interior_sub(n00) && mesh.in_interior_sub(n10) && mesh.in_interior_sub(n01) &&
            mesh.in_interior_sub(n11)))
        continue;
      for (int c = 0; c < k; ++c) {
        cplx v00 = v(n00 * k + c), v10 = v(n10 * k + c);
        cplx v01 = v(n01 * k + c), v11 = v(n11 * k + c);
        for (double t1 : gp)
          for (double t2 : gp) {
            cplx val = (1 - t1) * (1 - t2) * v00 + t1 * (1 - t2) * v10 + (1 - t1) * t2 * v01 +
                       t1 * t2 * v11;
            cplx d1 = ((1 - t2) * (v10 - v00) + t2 * (v11 - v01)) / mesh.h;
            cplx d2 = ((1 - t1) * (v01 - v00) + t1 * (v11 - v10)) / mesh.h;
            l2sq += w * std::norm(val);
            h1sq += w * (std::norm(d1) + std::norm(d2));
          }
      }
    }
}

// second-order partial derivative on the domain grid, one-sided at the edges
Vec diff_axis_mesh(const DomainMesh& mesh, const Vec& u, int k, int axis) {
  const long na = mesh.nn[axis];
  if (na < 3) throw ConfigError("differencing needs at least three nodes per axis");
  Vec out(u.size());
  const long n1 = mesh.nn[0];
  const long stride = (axis == 0) ? 1 : n1;
  const long nother = mesh.nodes / na;
  const double two_h = 2 * mesh.h;
  for (long o = 0; o < nother; ++o) {
    const long base = (axis == 0) ? o * n1 : o;
    for (long i = 0; i < na; ++i) {
      long node = base + i * stride;
      for (int c = 0; c < k; ++c) {
        cplx d;
        if (i == 0)
          d = (-3.0 * u(node * k + c) + 4.0 * u((node + stride) * k + c) -
               u((node + 2 * stride) * k + c)) /
              two_h;
        else if (i == na - 1)
          d = (3.0 * u(node * k + c) - 4.0 * u((node - stride) * k + c) +
               u((node - 2 * stride) * k + c)) /
              two_h;
        else
          d = (u((node + stride) * k + c) - u((node - stride) * k + c)) / two_h;
        out(node * k + c) = d;
      }
    }
  }
  return out;
}

std::string point_tag(double eps, cplx zeta) {
  char buf[96];
  std::snprintf(buf, sizeof buf, " (eps=%g, zeta=%g%+gi)", eps, zeta.real(), zeta.imag());
  return buf;
}

}  // namespace

double quad_l2(const DomainMesh& mesh, const Vec& v, int k, bool interior_only) {
  double l2sq, h1sq;
  quad_core(mesh, v, k, interior_only, l2sq, h1sq);
  return std::sqrt(l2sq);
}

double quad_h1(const DomainMesh& mesh, const Vec& v, int k, bool interior_only) {
  double l2sq, h1sq;
  quad_core(mesh, v, k, interior_only, l2sq, h1sq);
  return std::sqrt(l2sq + h1sq);
}

Vec grid_bD_domain(const DomainMesh& mesh, const Vec& u, const SymbolB& b) {
  if (u.size() != mesh.nodes * b.n) throw ConfigError("b(D) input has the wrong length");
  Vec out = Vec::Zero(mesh.nodes * b.m);
  const cplx mi(0, -1);
  for (int j = 0; j < b.dim; ++j) {
    Vec dj = diff_axis_mesh(mesh, u, b.n, j);
    for (long node = 0; node < mesh.nodes; ++node)
      for (int r = 0; r < b.m; ++r) {
        cplx acc = 0;
        for (int s = 0; s < b.n; ++s) acc += b.b[j](r, s) * dj(node * b.n + s);
        out(node * b.m + r) += mi * acc;
      }
  }
  return out;
}

Vec flux_of(const DomainMesh& mesh, const Vec& u, const SymbolB& b, const PeriodicField& g,
            double epsilon) {
  Vec bd = grid_bD_domain(mesh, u, b);
  Vec out(mesh.nodes * b.m);
  double x[2] = {0, 0};
  for (long node = 0; node < mesh.nodes; ++node) {
    mesh.coords(node, x);
    out.segment(node * b.m, b.m) = oscillate(g, epsilon, x) * bd.segment(node * b.m, b.m);
  }
  return out;
}

ErrorRow error_norms(const DomainMesh& mesh, const SolveResult& u_eps, const SolveResult& u0,
                     const ApproxBundle& approx) {
  if (!approx.smooth || !approx.plain || !approx.flux || !approx.flux_eps)
    throw ConfigError("error norms need both correctors and both fluxes");
  const long nodes = mesh.nodes;
  if (u_eps.u.size() == 0 || u_eps.u.size() % nodes != 0 || u0.u.size() != u_eps.u.size() ||
      approx.smooth->v_eps.size() != u_eps.u.size() ||
      approx.plain->v_eps.size() != u_eps.u.size() ||
      approx.flux->size() != approx.flux_eps->size() || approx.flux->size() % nodes != 0 ||
      (approx.w && approx.w->u.size() != u_eps.u.size()))
    throw ConfigError("error norms need fields on a single mesh");
  if (u_eps.zeta != u0.zeta)
    throw ConfigError("oscillating and effective solutions use different zeta");
  const int n = static_cast<int>(u_eps.u.size() / nodes);
  const int m = static_cast<int>(approx.flux->size() / nodes);

  ErrorRow row;
  row.epsilon = u_eps.epsilon;
  row.zeta = u_eps.zeta;
  double a = std::arg(row.zeta);
  row.phi = a < 0 ? a + 2 * pi : a;

  Vec diff = u_eps.u - u0.u;
  row.err_l2 = quad_l2(mesh, diff, n);
  row.err_h1_plain = quad_h1(mesh, diff, n);
  row.err_h1_corr = quad_h1(mesh, u_eps.u - approx.smooth->v_eps, n);
  row.err_h1_corr_nosmooth = quad_h1(mesh, u_eps.u - approx.plain->v_eps, n);
  const Vec& v_bl = approx.prefer_smooth ? approx.smooth->v_eps : approx.plain->v_eps;
  if (approx.w)
    row.err_h1_bl = quad_h1(mesh, u_eps.u - v_bl + approx.w->u, n);
  else
    row.err_h1_bl = quad_h1(mesh, u_eps.u - v_bl, n);
  row.err_h1_interior = quad_h1(mesh, u_eps.u - v_bl, n, true);
  row.err_flux = quad_l2(mesh, *approx.flux_eps - *approx.flux, m);
  return row;
}

Vec sweep_load(const DomainMesh& mesh, int n, std::uint64_t seed) {
  // coefficients depend on (dim, n, seed) only, so every mesh samples the
  // same continuum function
  std::mt19937_64 rng(seed);
  auto u01 = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  const int kmax = 3;
  const int nmodes = mesh.dim == 1 ? kmax : kmax * kmax;
  std::vector<cplx> coef(static_cast<size_t>(n) * nmodes);
  for (size_t i = 0; i < coef.size(); ++i)
    coef[i] = cplx(2 * u01() - 1, 2 * u01() - 1);

  double len[2] = {mesh.box.hi[0] - mesh.box.lo[0], mesh.box.hi[1] - mesh.box.lo[1]};
  Vec out = Vec::Zero(mesh.nodes * n);
  double x[2] = {0, 0};
  for (long node = 0; node < mesh.nodes; ++node) {
    mesh.coords(node, x);
    double t1 = (x[0] - mesh.box.lo[0]) / len[0];
    double t2 = mesh.dim > 1 ? (x[1] - mesh.box.lo[1]) / len[1] : 0;
    for (int c = 0; c < n; ++c) {
      cplx acc = 0;
      int mode = 0;
      for (int k1 = 1; k1 <= kmax; ++k1) {
        if (mesh.dim == 1) {
          acc += coef[c * nmodes + mode++] * std::sin(k1 * pi * t1);
        } else {
          for (int k2 = 1; k2 <= kmax; ++k2)
            acc += coef[c * nmodes + mode++] * std::sin(k1 * pi * t1) * std::sin(k2 * pi * t2);
        }
      }
      out(node * n + c) = acc;
    }
  }
  return out;
}

namespace {

ErrorRow run_point(const SweepProblem& prob, const CellSolution& cell,
                   const EffectiveOperator& eff, double lambda, double eps, cplx zeta,
                   const SweepToggles& tog) {
  auto t0 = std::chrono::steady_clock::now();
  double h = eps / prob.refine;
  double delta = tog.interior_delta;
  if (delta < 0) {
    double edge = prob.domain.hi[0] - prob.domain.lo[0];
    for (int a = 1; a < prob.domain.dim; ++a)
      edge = std::min(edge, prob.domain.hi[a] - prob.domain.lo[a]);
    delta = edge / 4;
  }
  DomainMesh mesh = build_mesh(prob.domain, h, delta);
  OscillatingCoeffs oc{prob.g, prob.a, prob.Q, prob.Q0};
  DiscreteSystem osc = assemble_oscillating(mesh, oc, prob.b, eps, lambda);
  DiscreteSystem effsys = assemble_effective(mesh, eff);

  const int n = prob.b.n;
  Vec F = sweep_load(mesh, n, prob.seed);
  SolveResult u_eps = solve_resolvent(osc, zeta, F, tog.allow_real_axis);
  SolveResult u0 = solve_resolvent(effsys, zeta, F, tog.allow_real_axis);

  CorrectorOutput corr_s, corr_ns;
  Vec fx;
  std::optional<SolveResult> w;
  if (tog.corrector) {
    corr_s = first_order_approx(mesh, u0.u, prob.b, cell, eps);
    corr_ns = corrector_no_smoothing(mesh, u0.u, prob.b, cell, eps);
    fx = flux_approx(mesh, u0.u, prob.b, prob.g, cell, eps, tog.smoothing);
    if (tog.boundary_layer) {
      CorrectorOutput tr = boundary_corrector_trace(mesh, u0.u, prob.b, cell, eps);
      w = solve_boundary_layer(osc, zeta, tr.w_trace, tog.allow_real_axis);
    }
  } else {
    // negative control: the approximation degenerates to u0 with its
    // homogenized flux, and there is no boundary layer to correct
    corr_s.v_eps = u0.u;
    corr_s.K_term = Vec::Zero(u0.u.size());
    corr_ns = corr_s;
    corr_ns.smoothing = false;
    Vec bDu0 = grid_bD_domain(mesh, u0.u, prob.b);
    fx = Vec::Zero(mesh.nodes * prob.b.m);
    for (long node = 0; node < mesh.nodes; ++node)
      fx.segment(node * prob.b.m, prob.b.m) =
          eff.g0 * bDu0.segment(node * prob.b.m, prob.b.m);
  }
  Vec fe = flux_of(mesh, u_eps.u, prob.b, prob.g, eps);
  ApproxBundle ab;
  ab.smooth = &corr_s;
  ab.plain = &corr_ns;
  ab.flux = &fx;
  ab.flux_eps = &fe;
  ab.w = w ? &*w : nullptr;
  ab.prefer_smooth = tog.smoothing;
  ErrorRow row = error_norms(mesh, u_eps, u0, ab);
  row.epsilon = eps;  // the effective solve reports epsilon 0

  double gap = 0;
  for (int i = 0; i < tog.gap_samples; ++i) {
    std::uint64_t sub = prob.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1);
    Vec Fi = sweep_load(mesh, n, sub);
    SolveResult ue = solve_resolvent(osc, zeta, Fi, tog.allow_real_axis);
    SolveResult u0i = solve_resolvent(effsys, zeta, Fi, tog.allow_real_axis);
    double den = quad_l2(mesh, Fi, n);
    if (den > 0) gap = std::max(gap, quad_l2(mesh, ue.u - u0i.u, n) / den);
  }
  row.gap_l2 = gap;
  row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

}  // namespace

SweepResult run_sweep(const SweepProblem& prob, const std::vector<double>& eps_grid,
                      const std::vector<cplx>& zeta_grid, const SweepToggles& tog) {
  SweepResult res;
  res.lambda = prob.lambda >= 0 ? prob.lambda : 0;
  if (eps_grid.empty() || zeta_grid.empty()) return res;

  CellProblem cp{prob.lat, prob.b, prob.g, prob.a};
  CellSolution cell = solve_cell(cp);
  double lambda = prob.lambda >= 0
                      ? prob.lambda
                      : choose_lambda_shift(prob.g, prob.b, prob.a, prob.Q, prob.Q0, prob.lat);
  res.lambda = lambda;
  EffectiveOperator eff =
      assemble_effective(cell, prob.g, prob.b, prob.a, prob.Q, prob.Q0, lambda);

  struct Point {
    double eps;
    cplx zeta;
  };
  std::vector<Point> pts;
  for (double eps : eps_grid)
    for (cplx zeta : zeta_grid) pts.push_back({eps, zeta});
  res.rows.resize(pts.size());

  auto worker = [&](size_t i) {
    try {
      return run_point(prob, cell, eff, lambda, pts[i].eps, pts[i].zeta, tog);
    } catch (const ConfigError& e) {
      throw ConfigError(e.what() + point_tag(pts[i].eps, pts[i].zeta));
    } catch (const SolverError& e) {
      throw SolverError(e.what() + point_tag(pts[i].eps, pts[i].zeta));
    }
  };

  const size_t stride = static_cast<size_t>(std::max(1, tog.max_workers));
  for (size_t lo = 0; lo < pts.size(); lo += stride) {
    size_t hi = std::min(pts.size(), lo + stride);
    std::vector<std::future<ErrorRow>> fut;
    for (size_t i = lo; i < hi; ++i)
      fut.push_back(std::async(std::launch::async, worker, i));
    for (size_t i = lo; i < hi; ++i) res.rows[i] = fut[i - lo].get();
  }
  return res;
}

namespace {

struct ColumnSpec {
  const char* name;
  double ErrorRow::*field;
  double zeta_power;
};

constexpr ColumnSpec kColumns[] = {
    {"err_l2", &ErrorRow::err_l2, 0.5},
    {"err_h1_plain", &ErrorRow::err_h1_plain, 0.0},
    {"err_h1_corr", &ErrorRow::err_h1_corr, 0.25},
    {"err_h1_corr_nosmooth", &ErrorRow::err_h1_corr_nosmooth, 0.25},
    {"err_h1_bl", &ErrorRow::err_h1_bl, 0.0},
    {"err_h1_interior", &ErrorRow::err_h1_interior, 0.0},
    {"err_flux", &ErrorRow::err_flux, 0.0},
    {"gap_l2", &ErrorRow::gap_l2, 0.5},
};

ColumnFit fit_column(const std::vector<ErrorRow>& rows, const ColumnSpec& spec) {
  ColumnFit fit;
  fit.column = spec.name;
  fit.zeta_power = spec.zeta_power;

  // common slope with one intercept per zeta: demean within each zeta group
  std::map<std::pair<double, double>, std::vector<std::pair<double, double>>> groups;
  for (const ErrorRow& r : rows) {
    double err = r.*(spec.field);
    if (err > 0) groups[{r.zeta.real(), r.zeta.imag()}].push_back({std::log(r.epsilon), std::log(err)});
  }
  double sxx = 0, sxy = 0, xsum = 0, ysum = 0;
  long npts = 0;
  for (auto& [key, pts] : groups) {
    if (pts.size() < 2) continue;
    double xm = 0, ym = 0;
    for (auto& [x, y] : pts) xm += x, ym += y;
    xm /= pts.size();
    ym /= pts.size();
    for (auto& [x, y] : pts) {
      sxx += (x - xm) * (x - xm);
      sxy += (x - xm) * (y - ym);
      xsum += x;
      ysum += y;
      ++npts;
    }
  }
  fit.points = npts;
  if (npts < 2 || sxx == 0) {
    fit.slope = std::numeric_limits<double>::quiet_NaN();
    fit.intercept = std::numeric_limits<double>::quiet_NaN();
  } else {
    fit.slope = sxy / sxx;
    fit.intercept = ysum / npts - fit.slope * xsum / npts;
  }

  // scaling along each |zeta|-ray at fixed eps
  std::map<std::pair<double, double>, std::pair<double, double>> rays;  // (eps, phi) -> min, max
  for (const ErrorRow& r : rows) {
    double err = r.*(spec.field);
    if (err <= 0) continue;
    double v = err * std::pow(std::abs(r.zeta), spec.zeta_power);
    auto [it, fresh] = rays.try_emplace({r.epsilon, r.phi}, std::pair<double, double>{v, v});
    if (!fresh) {
      it->second.first = std::min(it->second.first, v);
      it->second.second = std::max(it->second.second, v);
    }
  }
  fit.zeta_ratio = 1;
  for (auto& [key, mm] : rays)
    if (mm.first > 0) fit.zeta_ratio = std::max(fit.zeta_ratio, mm.second / mm.first);
  return fit;
}

}  // namespace

const ColumnFit& RateReport::fit(const std::string& column) const {
  for (const ColumnFit& f : fits)
    if (f.column == column) return f;
  throw ConfigError("no fitted column named " + column);
}

std::string RateReport::to_json() const {
  nlohmann::ordered_json j;
  for (const ColumnFit& f : fits)
    j["columns"][f.column] = {{"slope", f.slope},
                              {"intercept", f.intercept},
                              {"zeta_ratio", f.zeta_ratio},
                              {"zeta_power", f.zeta_power},
                              {"points", f.points}};
  j["criteria"] = {{"l2_slope", l2_ok},
                   {"h1_corrector_slope", h1_corr_ok},
                   {"h1_boundary_layer_slope", h1_bl_ok},
                   {"h1_interior_slope", h1_interior_ok},
                   {"zeta_scaling", zeta_ok}};
  j["pass"] = pass;
  return j.dump(2);
}

RateReport fit_and_judge(const std::vector<ErrorRow>& rows, const RateCriteria& crit) {
  std::map<std::pair<double, double>, std::set<double>> eps_of;
  for (const ErrorRow& r : rows) eps_of[{r.zeta.real(), r.zeta.imag()}].insert(r.epsilon);
  if (eps_of.empty()) throw ConfigError("rate fit needs at least four epsilon points per zeta");
  for (auto& [key, eps] : eps_of)
    if (eps.size() < 4) throw ConfigError("rate fit needs at least four epsilon points per zeta");

  RateReport rep;
  for (const ColumnSpec& spec : kColumns) rep.fits.push_back(fit_column(rows, spec));
  double s_l2 = rep.fit("err_l2").slope;
  rep.l2_ok = s_l2 >= crit.l2_lo && s_l2 <= crit.l2_hi;
  rep.h1_corr_ok = rep.fit("err_h1_corr").slope >= crit.h1_corr_min;
  rep.h1_bl_ok = rep.fit("err_h1_bl").slope >= crit.h1_bl_min;
  rep.h1_interior_ok = rep.fit("err_h1_interior").slope >= crit.h1_interior_min;
  rep.zeta_ok = rep.fit("err_l2").zeta_ratio <= crit.zeta_ratio_max;
  rep.pass = rep.l2_ok && rep.h1_corr_ok && rep.h1_bl_ok && rep.h1_interior_ok && rep.zeta_ok;
  return rep;
}

std::string rows_to_csv(const std::vector<ErrorRow>& rows, bool timing_in_csv) {
  std::string out =
      "epsilon,zeta_re,zeta_im,phi,err_l2,err_h1_plain,err_h1_corr,err_h1_corr_nosmooth,"
      "err_h1_bl,err_h1_interior,err_flux,gap_l2,wall_s\n";
  char buf[640];
  for (const ErrorRow& r : rows) {
    std::snprintf(buf, sizeof buf,
                  "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.3f\n",
                  r.epsilon, r.zeta.real(), r.zeta.imag(), r.phi, r.err_l2, r.err_h1_plain,
                  r.err_h1_corr, r.err_h1_corr_nosmooth, r.err_h1_bl, r.err_h1_interior,
                  r.err_flux, r.gap_l2, timing_in_csv ? r.wall_s : 0.0);
    out += buf;
  }
  return out;
}

void write_csv(const std::string& path, const std::vector<ErrorRow>& rows, bool timing_in_csv) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write csv: " + path);
  f << rows_to_csv(rows, timing_in_csv);
  if (!f.good()) throw ConfigError("cannot write csv: " + path);
}

}  // namespace homog
