// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Tolerances and runtime budgets are pinned here on purpose;
// do not loosen them to make a line green.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "homog/cell.hpp"
#include "homog/effective.hpp"
#include "homog/fft.hpp"
#include "homog/models.hpp"
#include "homog/solve.hpp"
#include "homog/verify.hpp"

using namespace homog;

namespace {

double now_s() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failed = 0;

void criterion(int id, const char* label, double budget_s, const std::function<Outcome()>& fn) {
  double t0 = now_s();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  double dt = now_s() - t0;
  if (o.pass && budget_s > 0 && dt > budget_s) {
    o.pass = false;
    o.detail += fmt("; over the %.0f s budget", budget_s);
  }
  std::printf("[%2d] %s  %s: %s  (%.2f s)\n", id, o.pass ? "PASS" : "FAIL", label,
              o.detail.c_str(), dt);
  std::fflush(stdout);
  if (!o.pass) ++g_failed;
}

// least-squares slope of log(val) against log(eps)
double fit_slope(const std::vector<double>& eps, const std::vector<double>& val) {
  double xm = 0, ym = 0;
  size_t k = eps.size();
  for (size_t i = 0; i < k; ++i) xm += std::log(eps[i]), ym += std::log(val[i]);
  xm /= k, ym /= k;
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < k; ++i) {
    double dx = std::log(eps[i]) - xm;
    sxx += dx * dx;
    sxy += dx * (std::log(val[i]) - ym);
  }
  return sxy / sxx;
}

SweepToggles quiet_toggles(bool boundary_layer) {
  SweepToggles tog;
  tog.gap_samples = 0;
  tog.boundary_layer = boundary_layer;
  return tog;
}

const std::vector<double> kEps4 = {1.0 / 8, 1.0 / 16, 1.0 / 32, 1.0 / 64};
const std::vector<cplx> kZetaRef = {cplx(-1.0, 0.0)};

SymbolB gradient2() {
  SymbolB b;
  b.dim = 2;
  b.m = 2;
  b.n = 1;
  Mat e1 = Mat::Zero(2, 1), e2 = Mat::Zero(2, 1);
  e1(0, 0) = 1.0;
  e2(1, 0) = 1.0;
  b.b = {e1, e2};
  return b;
}

// band-limited positive-definite sample field: base*I plus a bounded
// trigonometric perturbation, so the smallest eigenvalue stays >= 0.5
PeriodicField random_spd_field(std::mt19937_64& rng, int N, bool matrix_case) {
  static const int K[6][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}, {2, 0}, {0, 2}};
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_real_distribution<double> uph(0.0, 2.0 * pi);
  double amp[6], phase[6], total = 0;
  Mat dir[6];
  for (int j = 0; j < 6; ++j) {
    amp[j] = std::abs(uni(rng)) + 0.05;
    phase[j] = uph(rng);
    total += amp[j];
    if (matrix_case) {
      Mat s = Mat::Zero(2, 2);
      s(0, 0) = uni(rng);
      s(1, 1) = uni(rng);
      s(0, 1) = s(1, 0) = uni(rng);
      dir[j] = s / std::max(spectral_norm(s), 1e-12);
    } else {
      dir[j] = Mat::Identity(2, 2);
    }
  }
  double base = matrix_case ? 2.0 : 1.5;
  double span = matrix_case ? 1.5 : 1.0;
  PeriodicField f;
  f.dim = 2;
  f.n = {N, N, 1};
  f.rows = f.cols = 2;
  f.v.resize(static_cast<size_t>(f.total()));
  for (int i2 = 0; i2 < N; ++i2)
    for (int i1 = 0; i1 < N; ++i1) {
      double x1 = static_cast<double>(i1) / N, x2 = static_cast<double>(i2) / N;
      Mat m = base * Mat::Identity(2, 2);
      for (int j = 0; j < 6; ++j)
        m += (span * amp[j] / total) * std::cos(2.0 * pi * (K[j][0] * x1 + K[j][1] * x2) + phase[j]) *
             dir[j];
      f.v[static_cast<size_t>(f.index(i1, i2, 0))] = m;
    }
  return f;
}

}  // namespace

int main() {
  std::vector<ErrorRow> rows_sine, rows_lam;  // shared by criteria 4-7 and 11
  double t_sine = 0, t_lam = 0;

  criterion(1, "effective matrix, 1d sine profile", 1.0, [] {
    SweepProblem p = to_sweep_problem(make_model("scalar-1d-sine"), 256);
    CellSolution cell = solve_cell({p.lat, p.b, p.g, p.a});
    double err = std::abs(cell.g0(0, 0) - std::sqrt(3.0));
    return Outcome{err <= 1e-8, fmt("|g0 - sqrt(3)| = %.2e <= 1e-8 at N = 256", err)};
  });

  criterion(2, "effective matrix, 2d laminate", 30.0, [] {
    SweepProblem p = to_sweep_problem(make_model("laminate-13"), 128);
    CellSolution cell = solve_cell({p.lat, p.b, p.g, p.a});
    Mat ref = Mat::Zero(2, 2);
    ref(0, 0) = 1.5;
    ref(1, 1) = 2.0;
    double err = (cell.g0 - ref).cwiseAbs().maxCoeff();
    return Outcome{err <= 1e-6,
                   fmt("max |g0 - diag(1.5, 2)| = %.2e <= 1e-6 at N = 128 (%s backend)", err,
                       cell.backend.c_str())};
  });

  criterion(3, "Voigt-Reuss bracketing on random fields", 120.0, [] {
    Lattice lat = make_cubic_lattice(2);
    SymbolB b = gradient2();
    std::mt19937_64 rng(424242);
    double worst = 0;  // most negative bracketing margin, scaled
    for (int t = 0; t < 50; ++t) {
      PeriodicField g = random_spd_field(rng, 64, t >= 25);
      CellSolution cell = solve_cell({lat, b, g, {}});
      Mat lo = harmonic_mean(g), hi = cell_mean(g);
      double scale = std::max(1.0, max_eig_hermitian(hi));
      double m1 = min_eig_hermitian(cell.g0 - lo) / scale;
      double m2 = min_eig_hermitian(hi - cell.g0) / scale;
      worst = std::min(worst, std::min(m1, m2));
    }
    return Outcome{worst >= -1e-8,
                   fmt("25 scalar + 25 matrix fields, worst margin %.2e >= -1e-8", worst)};
  });

  criterion(4, "l2 rate at zeta = -1", 0.0, [&] {
    double t0 = now_s();
    SweepProblem p1 = to_sweep_problem(make_model("scalar-1d-sine"), 256);
    rows_sine = run_sweep(p1, kEps4, kZetaRef, quiet_toggles(true)).rows;
    t_sine = now_s() - t0;
    t0 = now_s();
    SweepProblem p2 = to_sweep_problem(make_model("laminate-13"), 128);
    rows_lam = run_sweep(p2, kEps4, kZetaRef, quiet_toggles(false)).rows;
    t_lam = now_s() - t0;
    double s1 = fit_and_judge(rows_sine).fit("err_l2").slope;
    double s2 = fit_and_judge(rows_lam).fit("err_l2").slope;
    bool ok = s1 >= 0.9 && s1 <= 1.1 && s2 >= 0.9 && s2 <= 1.1 && t_sine < 60 && t_lam < 600;
    return Outcome{ok, fmt("sine slope %.3f (%.0f s < 60), laminate slope %.3f (%.0f s < 600), "
                           "band [0.9, 1.1]",
                           s1, t_sine, s2, t_lam)};
  });

  criterion(5, "h1 corrector rate vs corrector-free error", 0.0, [&] {
    if (rows_sine.size() < 4 || rows_lam.size() < 4)
      return Outcome{false, "no sweep rows (upstream failure)"};
    RateReport r1 = fit_and_judge(rows_sine), r2 = fit_and_judge(rows_lam);
    double c1 = r1.fit("err_h1_corr").slope, p1 = r1.fit("err_h1_plain").slope;
    double c2 = r2.fit("err_h1_corr").slope, p2 = r2.fit("err_h1_plain").slope;
    bool ok = c1 >= 0.45 && c2 >= 0.45 && p1 < 0.2 && p2 < 0.2;
    return Outcome{ok, fmt("corrector slopes %.3f, %.3f >= 0.45; plain slopes %.3f, %.3f < 0.2",
                           c1, c2, p1, p2)};
  });

  criterion(6, "boundary-layer rate, 1d", 0.0, [&] {
    if (rows_sine.size() < 4) return Outcome{false, "no sweep rows (upstream failure)"};
    double s = fit_and_judge(rows_sine).fit("err_h1_bl").slope;
    return Outcome{s >= 0.9, fmt("slope %.3f >= 0.9", s)};
  });

  criterion(7, "interior h1 rate, 2d laminate", 0.0, [&] {
    if (rows_lam.size() < 4) return Outcome{false, "no sweep rows (upstream failure)"};
    double s = fit_and_judge(rows_lam).fit("err_h1_interior").slope;
    return Outcome{s >= 0.9, fmt("slope %.3f >= 0.9 with delta = quarter edge", s)};
  });

  criterion(8, "zeta scaling of the l2 error", 300.0, [] {
    SweepProblem p = to_sweep_problem(make_model("scalar-1d-sine"), 256);
    std::vector<cplx> zs = {cplx(-1, 0), cplx(-4, 0), cplx(-16, 0), cplx(-64, 0)};
    SweepResult res = run_sweep(p, {1.0 / 32}, zs, quiet_toggles(false));
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (size_t j = 0; j < res.rows.size(); ++j) {
      double v = res.rows[j].err_l2 * std::sqrt(std::abs(res.rows[j].zeta));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return Outcome{hi / lo <= 4.0,
                   fmt("err_l2 |zeta|^(1/2) spread %.2f <= 4 over |zeta| in {1, 4, 16, 64}", hi / lo)};
  });

  criterion(9, "rho-flat regime below the spectrum bottom", 0.0, [] {
    ProblemSpec spec = make_model("scalar-1d-sine");
    spec.Q0 = constant_spec(Mat::Constant(1, 1, 16.0), 1);  // compress the spectrum near c_flat
    SweepProblem p = to_sweep_problem(spec, 256);
    double eps = 1.0 / 32, h = eps / 16;
    CellSolution cell = solve_cell({p.lat, p.b, p.g, p.a});
    double lambda = choose_lambda_shift(p.g, p.b, p.a, p.Q, p.Q0, p.lat);
    EffectiveOperator eff = assemble_effective(cell, p.g, p.b, p.a, p.Q, p.Q0, lambda);
    DomainMesh mesh = build_mesh(p.domain, h);
    DiscreteSystem osc = assemble_oscillating(mesh, {p.g, p.a, p.Q, p.Q0}, p.b, eps, lambda);
    DiscreteSystem effsys = assemble_effective(mesh, eff);
    double cflat = estimate_c_flat(effsys, {&osc});
    std::vector<cplx> zs = {cflat - 2.0, cflat - 0.5, cflat - 0.125};
    SweepToggles tog = quiet_toggles(false);
    tog.allow_real_axis = true;
    p.lambda = lambda;
    SweepResult res = run_sweep(p, {eps}, zs, tog);
    double lo = std::numeric_limits<double>::infinity(), hi = 0;
    for (size_t j = 0; j < zs.size(); ++j) {
      double r = res.rows[j].err_l2 / rho_flat(zs[j], cflat);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    return Outcome{hi / lo <= 4.0,
                   fmt("c_flat %.4f, err_l2/rho_flat spread %.2f <= 4 at eps = 1/32", cflat,
                       hi / lo)};
  });

  criterion(10, "zero-corrector model", 0.0, [] {
    SweepProblem p = to_sweep_problem(make_model("zero-corrector-2d"), 64);
    CellSolution cell = solve_cell({p.lat, p.b, p.g, p.a});
    double nl = linf_spectral(cell.lambda), nlt = linf_spectral(cell.lambda_tilde);
    std::vector<double> eps = {1.0 / 8, 1.0 / 12, 1.0 / 16, 1.0 / 24, 1.0 / 32};
    std::vector<ErrorRow> rows = run_sweep(p, eps, kZetaRef, quiet_toggles(false)).rows;
    double s = fit_and_judge(rows).fit("err_h1_plain").slope;
    bool ok = nl <= 1e-10 && nlt <= 1e-10 && s >= 0.9;
    return Outcome{ok, fmt("|Lambda| %.1e, |Lambda~| %.1e <= 1e-10; corrector-free h1 slope "
                           "%.3f >= 0.9",
                           nl, nlt, s)};
  });

  criterion(11, "smoothing removal penalty", 0.0, [&] {
    if (rows_sine.size() < 4) return Outcome{false, "no sweep rows (upstream failure)"};
    SweepProblem p = to_sweep_problem(make_model("two-phase-1d"), 256);
    std::vector<ErrorRow> rows_tp = run_sweep(p, kEps4, kZetaRef, quiet_toggles(false)).rows;
    auto gap_slope = [](const std::vector<ErrorRow>& rows, double& out) {
      std::vector<double> eps, d;
      for (const ErrorRow& r : rows) {
        double g = std::abs(r.err_h1_corr - r.err_h1_corr_nosmooth);
        if (g > 0) {
          eps.push_back(r.epsilon);
          d.push_back(g);
        }
      }
      if (eps.size() < 3) return false;
      out = fit_slope(eps, d);
      return true;
    };
    double s1 = 0, s2 = 0;
    if (!gap_slope(rows_sine, s1) || !gap_slope(rows_tp, s2))
      return Outcome{false, "smoothed and unsmoothed errors coincide on too many points"};
    bool ok = s1 >= 0.9 && s2 >= 0.9;
    return Outcome{ok, fmt("|smoothed - unsmoothed| h1 slopes: sine %.3f, two-phase %.3f >= 0.9",
                           s1, s2)};
  });

  criterion(12, "resolvent norm bound", 0.0, [] {
    struct Pick {
      const char* model;
      int cell_n;
      std::vector<double> eps;
    };
    std::vector<Pick> zoo = {{"scalar-1d-sine", 256, {1.0 / 8, 1.0 / 16, 1.0 / 32}},
                             {"two-phase-1d", 256, {1.0 / 8, 1.0 / 16, 1.0 / 32}},
                             {"constant", 128, {1.0 / 8, 1.0 / 16}}};
    struct Built {
      SweepProblem p;
      double lambda;
      double q0inv;
    };
    std::vector<Built> built;
    for (const Pick& pk : zoo) {
      Built bb{to_sweep_problem(make_model(pk.model), pk.cell_n), 0, 0};
      bb.lambda = choose_lambda_shift(bb.p.g, bb.p.b, bb.p.a, bb.p.Q, bb.p.Q0, bb.p.lat);
      double q0min = std::numeric_limits<double>::infinity();
      for (const Mat& m : bb.p.Q0.v) q0min = std::min(q0min, min_eig_hermitian(m));
      bb.q0inv = 1.0 / q0min;
      built.push_back(std::move(bb));
    }
    std::mt19937_64 rng(20260816ull);
    std::uniform_real_distribution<double> uphi(0.3 * pi, 1.7 * pi);
    std::uniform_real_distribution<double> ulog(std::log(0.5), std::log(64.0));
    double worst = 0;
    for (int s = 0; s < 20; ++s) {
      const Built& bb = built[static_cast<size_t>(s) % 3];
      const Pick& pk = zoo[static_cast<size_t>(s) % 3];
      double eps = pk.eps[static_cast<size_t>(s / 3) % pk.eps.size()];
      double phi = uphi(rng), mag = std::exp(ulog(rng));
      cplx zeta = std::polar(mag, phi);
      DomainMesh mesh = build_mesh(bb.p.domain, eps / 16);
      DiscreteSystem osc =
          assemble_oscillating(mesh, {bb.p.g, bb.p.a, bb.p.Q, bb.p.Q0}, bb.p.b, eps, bb.lambda);
      Vec F = sweep_load(mesh, bb.p.b.n, 1000 + static_cast<std::uint64_t>(s));
      SolveResult u = solve_resolvent(osc, zeta, F);
      double ratio = quad_l2(mesh, u.u, bb.p.b.n) /
                     (c_phi(phi) / mag * bb.q0inv * quad_l2(mesh, F, bb.p.b.n));
      worst = std::max(worst, ratio);
    }
    return Outcome{worst <= 1.05,
                   fmt("max ||u|| / (c(phi) |zeta|^-1 ||Q0^-1|| ||F||) = %.3f <= 1.05 over "
                       "20 draws",
                       worst)};
  });

  criterion(13, "magnetic reduction round trip", 0.0, [] {
    ProblemSpec spec = make_model("magnetic-1d");
    Lattice lat = make_cubic_lattice(1);
    const int N = 256;
    PeriodicField a1 = sample_field(spec.a[0], lat, N);
    std::array<int, 3> nn{N, 1, 1};
    std::vector<cplx> xi(N);
    for (int i = 0; i < N; ++i) xi[static_cast<size_t>(i)] = a1.v[static_cast<size_t>(i)](0, 0).imag();
    fft_forward(1, nn, xi);
    for (int t = 0; t < N; ++t)
      xi[static_cast<size_t>(t)] *= cplx(0, -2.0 * pi * freq_of(t, N));  // v = -d1 xi1
    fft_inverse(1, nn, xi);
    double rec = 0;
    for (int i = 0; i < N; ++i)
      rec = std::max(rec, std::abs(xi[static_cast<size_t>(i)] -
                                   std::cos(2.0 * pi * i / static_cast<double>(N))));
    SweepProblem p = to_sweep_problem(spec, 256);
    std::vector<ErrorRow> rows = run_sweep(p, kEps4, kZetaRef, quiet_toggles(false)).rows;
    RateReport rep = fit_and_judge(rows);
    double sl2 = rep.fit("err_l2").slope;
    double sc = rep.fit("err_h1_corr").slope, sp = rep.fit("err_h1_plain").slope;
    bool ok = rec <= 1e-10 && sl2 >= 0.9 && sl2 <= 1.1 && sc >= 0.45 && sp < 0.2;
    return Outcome{ok, fmt("max |v - cos(2 pi x)| = %.1e <= 1e-10; l2 slope %.3f in [0.9, 1.1], "
                           "h1 corrector slope %.3f >= 0.45, plain slope %.3f < 0.2",
                           rec, sl2, sc, sp)};
  });

  std::printf("acceptance: %d/13 criteria passed\n", 13 - g_failed);
  return g_failed == 0 ? 0 : 1;
}
