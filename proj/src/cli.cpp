#include "homog/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>

namespace homog {

namespace {

int auto_cell_n(int dim) { return dim == 1 ? 256 : 128; }

std::string fmt_g(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.9g", v);
  return b;
}

std::string fmt_cplx(cplx z) {
  char b[96];
  std::snprintf(b, sizeof b, "%.9g%+.9gi", z.real(), z.imag());
  return b;
}

double parse_eps_token(const std::string& tok) {
  size_t slash = tok.find('/');
  std::string a = slash == std::string::npos ? tok : tok.substr(0, slash);
  std::string b = slash == std::string::npos ? "1" : tok.substr(slash + 1);
  double num = 0, den = 1;
  size_t pa = 0, pb = 0;
  try {
    num = std::stod(a, &pa);
    den = std::stod(b, &pb);
  } catch (const std::exception&) {
    throw ConfigError("cannot parse eps value '" + tok + "'");
  }
  if (pa != a.size() || pb != b.size() || den == 0)
    throw ConfigError("cannot parse eps value '" + tok + "'");
  return num / den;
}

void check_eps(double e) {
  if (!(e > 0) || e > 1) throw ConfigError("eps must lie in (0, 1], got " + fmt_g(e));
  double K = std::round(1.0 / e);
  if (std::abs(e * K - 1.0) > 1e-9)
    throw ConfigError("eps must be 1/K for an integer K, got " + fmt_g(e));
}

void check_zeta_standard(cplx z) {
  if (z.imag() == 0 && z.real() >= 0)
    throw ConfigError("zeta = " + fmt_cplx(z) +
                      " lies on the nonnegative real axis; standard mode needs zeta off"
                      " [0, inf) (rho-flat mode admits real zeta below the spectrum)");
}

cplx ray_zeta(double phi, double mag) {
  cplx z = std::polar(mag, phi);
  double re = std::abs(z.real()) <= 1e-12 * mag ? 0.0 : z.real();
  double im = std::abs(z.imag()) <= 1e-12 * mag ? 0.0 : z.imag();
  return cplx(re, im);
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file: " + path);
  try {
    nlohmann::json j;
    f >> j;
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path + ": " + e.what());
  }
}

cplx cplx_of_json(const nlohmann::json& v) {
  if (v.is_number()) return cplx(v.get<double>(), 0);
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number())
    return cplx(v[0].get<double>(), v[1].get<double>());
  throw ConfigError("config: zeta entries must be numbers or [re, im] pairs");
}

void apply_config_json(RunConfig& rc, const nlohmann::json& j) try {
  if (!j.is_object()) throw ConfigError("config: expected a json object");
  static const std::set<std::string> known = {
      "model",    "cell_n", "ratio",           "eps",  "zeta",   "zeta_ray",
      "mode",     "corrector", "smoothing",    "boundary_layer", "interior_margin",
      "timing",   "jobs",   "seed",            "out",  "csv"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ConfigError("config: unknown key '" + it.key() + "'");

  if (j.contains("model")) {
    if (j["model"].is_string())
      rc.model = resolve_model(j["model"].get<std::string>());
    else
      rc.model = spec_from_json(j["model"]);
    rc.has_model = true;
  }
  if (j.contains("cell_n")) rc.cell_n = j["cell_n"].get<int>();
  if (j.contains("ratio")) rc.ratio = j["ratio"].get<int>();
  if (j.contains("eps")) {
    rc.eps.clear();
    for (const auto& v : j["eps"])
      rc.eps.push_back(v.is_string() ? parse_eps_token(v.get<std::string>()) : v.get<double>());
  }
  if (j.contains("zeta") && j.contains("zeta_ray"))
    throw ConfigError("config: give either zeta or zeta_ray, not both");
  if (j.contains("zeta")) {
    rc.zeta.clear();
    for (const auto& v : j["zeta"]) rc.zeta.push_back(cplx_of_json(v));
  }
  if (j.contains("zeta_ray")) {
    const auto& r = j["zeta_ray"];
    double phi = r.at("phi").get<double>();
    rc.zeta.clear();
    for (const auto& m : r.at("mags")) rc.zeta.push_back(ray_zeta(phi, m.get<double>()));
  }
  if (j.contains("mode")) rc.mode = j["mode"].get<std::string>();
  if (j.contains("corrector")) rc.corrector = j["corrector"].get<bool>();
  if (j.contains("smoothing")) rc.smoothing = j["smoothing"].get<bool>();
  if (j.contains("boundary_layer")) rc.boundary_layer = j["boundary_layer"].get<bool>();
  if (j.contains("interior_margin")) rc.interior_margin = j["interior_margin"].get<double>();
  if (j.contains("timing")) rc.timing = j["timing"].get<bool>();
  if (j.contains("jobs")) rc.jobs = j["jobs"].get<int>();
  if (j.contains("seed")) rc.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("out")) rc.out = j["out"].get<std::string>();
  if (j.contains("csv")) rc.csv = j["csv"].get<std::string>();
} catch (const nlohmann::json::exception& e) {
  throw ConfigError(std::string("config: ") + e.what());
}

struct CmdOpts {
  std::string config, model, mode, out, csv, in;
  std::vector<std::string> eps;
  std::vector<double> zre, zim, mags;
  double phi = 0, interior_margin = -1;
  int cell_n = 0, ratio = 16, jobs = 2;
  std::uint64_t seed = 1;
  bool no_smoothing = false, no_corrector = false, boundary_layer = true, timing = false;

  CLI::Option *o_config = nullptr, *o_model = nullptr, *o_cell = nullptr, *o_ratio = nullptr,
              *o_eps = nullptr, *o_zre = nullptr, *o_zim = nullptr, *o_phi = nullptr,
              *o_mags = nullptr, *o_mode = nullptr, *o_jobs = nullptr, *o_seed = nullptr,
              *o_out = nullptr, *o_csv = nullptr, *o_in = nullptr, *o_nosm = nullptr,
              *o_nocorr = nullptr, *o_bl = nullptr, *o_interior = nullptr, *o_timing = nullptr;
};

void add_model_opts(CLI::App* cmd, CmdOpts& o) {
  o.o_config = cmd->add_option("--config", o.config, "json config file; flags win over file values");
  o.o_model = cmd->add_option("--model", o.model, "model name, or a path to a model spec json");
  o.o_cell = cmd->add_option("--cell-n", o.cell_n, "cell grid points per axis (default 256 in 1d, 128 in 2d)");
  o.o_seed = cmd->add_option("--seed", o.seed, "seed of the load family");
}

void add_pipeline_opts(CLI::App* cmd, CmdOpts& o) {
  o.o_eps = cmd->add_option("--eps", o.eps, "epsilon values, 1/K or decimal");
  o.o_zre = cmd->add_option("--zeta-re", o.zre, "zeta real parts");
  o.o_zim = cmd->add_option("--zeta-im", o.zim, "zeta imaginary parts, paired with --zeta-re");
  o.o_phi = cmd->add_option("--phi", o.phi, "ray angle: zeta = mag e^{i phi}");
  o.o_mags = cmd->add_option("--mags", o.mags, "ray magnitudes");
  o.o_ratio = cmd->add_option("--ratio", o.ratio, "mesh rule h = eps/ratio, at least 16");
  o.o_jobs = cmd->add_option("--jobs", o.jobs, "max concurrent sweep points");
  o.o_mode = cmd->add_option("--mode", o.mode, "standard | rho-flat")
                 ->check(CLI::IsMember({"standard", "rho-flat"}));
  o.o_nosm = cmd->add_flag("--no-smoothing", o.no_smoothing, "drop the cell averaging in the corrector");
  o.o_nocorr = cmd->add_flag("--no-corrector", o.no_corrector, "negative control: compare against u0 alone");
  o.o_bl = cmd->add_flag("--boundary-layer,!--no-boundary-layer", o.boundary_layer,
                         "solve for the boundary layer term (default on)");
  o.o_interior = cmd->add_option("--interior-margin", o.interior_margin,
                                 "interior subdomain margin (default: quarter of the shortest edge)");
  o.o_timing = cmd->add_flag("--timing", o.timing, "record wall times in the csv");
}

RunConfig build_config(const CmdOpts& o) {
  RunConfig rc;
  if (o.o_config && o.o_config->count()) apply_config_json(rc, load_json_file(o.config));
  if (o.o_model && o.o_model->count()) {
    rc.model = resolve_model(o.model);
    rc.has_model = true;
  }
  if (o.o_cell && o.o_cell->count()) rc.cell_n = o.cell_n;
  if (o.o_ratio && o.o_ratio->count()) rc.ratio = o.ratio;
  if (o.o_eps && o.o_eps->count()) {
    rc.eps.clear();
    for (const std::string& t : o.eps) rc.eps.push_back(parse_eps_token(t));
  }
  const bool flag_list = o.o_zre && o.o_zre->count();
  const bool flag_ray = o.o_phi && o.o_phi->count();
  if (flag_list && flag_ray)
    throw ConfigError("give either --zeta-re/--zeta-im or --phi/--mags, not both");
  if (o.o_zim && o.o_zim->count() && !flag_list) throw ConfigError("--zeta-im needs --zeta-re");
  if (o.o_mags && o.o_mags->count() && !flag_ray) throw ConfigError("--mags needs --phi");
  if (flag_list) {
    if (o.o_zim->count() && o.zim.size() != o.zre.size())
      throw ConfigError("--zeta-im needs one value per --zeta-re");
    rc.zeta.clear();
    for (size_t i = 0; i < o.zre.size(); ++i)
      rc.zeta.push_back(cplx(o.zre[i], o.o_zim->count() ? o.zim[i] : 0.0));
  }
  if (flag_ray) {
    if (!o.o_mags->count()) throw ConfigError("--phi needs --mags");
    rc.zeta.clear();
    for (double m : o.mags) rc.zeta.push_back(ray_zeta(o.phi, m));
  }
  if (o.o_mode && o.o_mode->count()) rc.mode = o.mode;
  if (o.o_nosm && o.o_nosm->count()) rc.smoothing = false;
  if (o.o_nocorr && o.o_nocorr->count()) rc.corrector = false;
  if (o.o_bl && o.o_bl->count()) rc.boundary_layer = o.boundary_layer;
  if (o.o_interior && o.o_interior->count()) rc.interior_margin = o.interior_margin;
  if (o.o_timing && o.o_timing->count()) rc.timing = true;
  if (o.o_jobs && o.o_jobs->count()) rc.jobs = o.jobs;
  if (o.o_seed && o.o_seed->count()) rc.seed = o.seed;
  if (o.o_out && o.o_out->count()) rc.out = o.out;
  if (o.o_csv && o.o_csv->count()) rc.csv = o.csv;
  if (o.o_in && o.o_in->count()) rc.in = o.in;

  if (rc.mode != "standard" && rc.mode != "rho-flat")
    throw ConfigError("mode must be standard or rho-flat, got '" + rc.mode + "'");
  if (rc.ratio < 16) throw ConfigError("mesh ratio must be at least 16");
  if (rc.jobs < 1) throw ConfigError("jobs must be positive");
  if (rc.cell_n < 0) throw ConfigError("cell resolution must be positive");
  for (double e : rc.eps) check_eps(e);
  if (rc.mode == "standard") {
    for (cplx z : rc.zeta) check_zeta_standard(z);
  } else {
    for (cplx z : rc.zeta)
      if (z.imag() != 0)
        throw ConfigError("rho-flat mode needs real zeta, got " + fmt_cplx(z));
  }
  return rc;
}

void require_model(const RunConfig& rc) {
  if (!rc.has_model) throw ConfigError("a model is required (--model or config file)");
}

int cell_n_of(const RunConfig& rc) {
  return rc.cell_n > 0 ? rc.cell_n : auto_cell_n(rc.model.dim);
}

SweepToggles toggles_of(const RunConfig& rc) {
  SweepToggles t;
  t.corrector = rc.corrector;
  t.smoothing = rc.smoothing;
  t.boundary_layer = rc.boundary_layer;
  t.interior_delta = rc.interior_margin;
  t.allow_real_axis = rc.mode == "rho-flat";
  t.timing_in_csv = rc.timing;
  t.max_workers = rc.jobs;
  return t;
}

struct CellBundle {
  CellProblem prob;
  PeriodicField Q, Q0;
  CellSolution cell;
  double lambda = 0;
  EffectiveOperator eff;
};

CellBundle run_cell_stage(const RunConfig& rc) {
  require_model(rc);
  const int N = cell_n_of(rc);
  CellBundle cb;
  cb.prob.lat = make_cubic_lattice(rc.model.dim);
  cb.prob.b = rc.model.b;
  cb.prob.g = sample_field(rc.model.g, cb.prob.lat, N);
  for (const FieldSpec& aj : rc.model.a) cb.prob.a.push_back(sample_field(aj, cb.prob.lat, N));
  cb.Q = sample_field(rc.model.Q, cb.prob.lat, N);
  cb.Q0 = sample_field(rc.model.Q0, cb.prob.lat, N);
  cb.cell = solve_cell(cb.prob);
  cb.lambda = choose_lambda_shift(cb.prob.g, cb.prob.b, cb.prob.a, cb.Q, cb.Q0, cb.prob.lat);
  cb.eff = assemble_effective(cb.cell, cb.prob.g, cb.prob.b, cb.prob.a, cb.Q, cb.Q0, cb.lambda);
  return cb;
}

void print_mat(const char* label, const Mat& m) {
  std::printf("%s:\n", label);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::printf(" ");
    for (Eigen::Index j = 0; j < m.cols(); ++j) std::printf(" %s", fmt_cplx(m(i, j)).c_str());
    std::printf("\n");
  }
}

nlohmann::json jmat(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back(nlohmann::json::array({m(i, j).real(), m(i, j).imag()}));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json jvec(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i)
    a.push_back(nlohmann::json::array({v(i).real(), v(i).imag()}));
  return a;
}

nlohmann::json jfield(const PeriodicField& f) {
  nlohmann::json vals = nlohmann::json::array();
  for (const Mat& m : f.v)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        vals.push_back(nlohmann::json::array({m(i, j).real(), m(i, j).imag()}));
  return {{"n", {f.n[0], f.n[1], f.n[2]}}, {"rows", f.rows}, {"cols", f.cols}, {"values", vals}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write output file: " + path);
  f << text;
  if (!f.good()) throw ConfigError("cannot write output file: " + path);
}

nlohmann::json row_json(const ErrorRow& r) {
  nlohmann::json j;
  j["epsilon"] = r.epsilon;
  j["zeta"] = {r.zeta.real(), r.zeta.imag()};
  j["phi"] = r.phi;
  j["err_l2"] = r.err_l2;
  j["err_h1_plain"] = r.err_h1_plain;
  j["err_h1_corr"] = r.err_h1_corr;
  j["err_h1_corr_nosmooth"] = r.err_h1_corr_nosmooth;
  j["err_h1_bl"] = r.err_h1_bl;
  j["err_h1_interior"] = r.err_h1_interior;
  j["err_flux"] = r.err_flux;
  j["gap_l2"] = r.gap_l2;
  j["wall_s"] = r.wall_s;
  return j;
}

int cmd_cell(const RunConfig& rc) {
  CellBundle cb = run_cell_stage(rc);
  std::printf("model: %s (dim %d, n %d, m %d)\n",
              rc.model.name.empty() ? "(inline)" : rc.model.name.c_str(), rc.model.dim,
              rc.model.n, rc.model.m);
  std::printf("cell N: %d  backend: %s\n", cell_n_of(rc), cb.cell.backend.c_str());
  print_mat("g0", cb.cell.g0);
  print_mat("V", cb.cell.V);
  print_mat("W", cb.cell.W);
  std::printf("lambda shift: %s\n", fmt_g(cb.lambda).c_str());
  std::printf("residuals: lambda %.3e, lambda_tilde %.3e\n", cb.cell.residual_lambda,
              cb.cell.residual_lambda_tilde);
  if (rc.model.known_effective.size() != 0)
    std::printf("max |g0 - known effective| = %.3e\n",
                (cb.cell.g0 - rc.model.known_effective).cwiseAbs().maxCoeff());
  if (!rc.out.empty()) {
    nlohmann::json j;
    j["backend"] = cb.cell.backend;
    j["cell_n"] = cell_n_of(rc);
    j["g0"] = jmat(cb.cell.g0);
    j["V"] = jmat(cb.cell.V);
    j["W"] = jmat(cb.cell.W);
    j["lambda_shift"] = cb.lambda;
    j["residual_lambda"] = cb.cell.residual_lambda;
    j["residual_lambda_tilde"] = cb.cell.residual_lambda_tilde;
    j["lambda_field"] = jfield(cb.cell.lambda);
    j["lambda_tilde_field"] = jfield(cb.cell.lambda_tilde);
    write_text(rc.out, j.dump(2) + "\n");
    std::printf("wrote %s\n", rc.out.c_str());
  }
  return 0;
}

int cmd_effective(const RunConfig& rc) {
  CellBundle cb = run_cell_stage(rc);
  std::printf("model: %s (dim %d, n %d, m %d)\n",
              rc.model.name.empty() ? "(inline)" : rc.model.name.c_str(), rc.model.dim,
              rc.model.n, rc.model.m);
  print_mat("g0", cb.eff.g0);
  print_mat("V", cb.eff.V);
  print_mat("W", cb.eff.W);
  for (size_t jd = 0; jd < cb.eff.a_mean.size(); ++jd)
    print_mat(("mean(a_" + std::to_string(jd + 1) + " + a_" + std::to_string(jd + 1) + "*)").c_str(),
              cb.eff.a_mean[jd]);
  print_mat("mean Q", cb.eff.Q_mean);
  print_mat("mean Q0", cb.eff.Q0_mean);
  std::printf("lambda shift: %s\n", fmt_g(cb.lambda).c_str());
  std::printf("alpha0 %s, alpha1 %s, c_star %s, C_L %s\n", fmt_g(cb.eff.alpha.alpha0).c_str(),
              fmt_g(cb.eff.alpha.alpha1).c_str(), fmt_g(cb.eff.c_star).c_str(),
              fmt_g(cb.eff.C_L).c_str());
  if (!rc.out.empty()) {
    nlohmann::json j;
    j["g0"] = jmat(cb.eff.g0);
    j["V"] = jmat(cb.eff.V);
    j["W"] = jmat(cb.eff.W);
    nlohmann::json am = nlohmann::json::array();
    for (const Mat& m : cb.eff.a_mean) am.push_back(jmat(m));
    j["a_mean"] = am;
    j["Q_mean"] = jmat(cb.eff.Q_mean);
    j["Q0_mean"] = jmat(cb.eff.Q0_mean);
    j["lambda_shift"] = cb.lambda;
    j["alpha0"] = cb.eff.alpha.alpha0;
    j["alpha1"] = cb.eff.alpha.alpha1;
    j["c_star"] = cb.eff.c_star;
    j["C_L"] = cb.eff.C_L;
    write_text(rc.out, j.dump(2) + "\n");
    std::printf("wrote %s\n", rc.out.c_str());
  }
  return 0;
}

int cmd_solve(const RunConfig& rc) {
  require_model(rc);
  if (rc.eps.size() != 1 || rc.zeta.size() != 1)
    throw ConfigError("solve needs exactly one eps and one zeta");
  const auto t0 = std::chrono::steady_clock::now();
  const double eps = rc.eps[0];
  const cplx zeta = rc.zeta[0];
  CellBundle cb = run_cell_stage(rc);
  SweepToggles tog = toggles_of(rc);

  const Box& dom = rc.model.domain;
  double delta = tog.interior_delta;
  if (delta < 0) {
    double edge = dom.hi[0] - dom.lo[0];
    for (int a = 1; a < dom.dim; ++a) edge = std::min(edge, dom.hi[a] - dom.lo[a]);
    delta = edge / 4;
  }
  DomainMesh mesh = build_mesh(dom, eps / rc.ratio, delta);
  OscillatingCoeffs oc{cb.prob.g, cb.prob.a, cb.Q, cb.Q0};
  DiscreteSystem osc = assemble_oscillating(mesh, oc, rc.model.b, eps, cb.lambda);
  DiscreteSystem effsys = assemble_effective(mesh, cb.eff);
  if (tog.allow_real_axis) {
    std::vector<const DiscreteSystem*> sys{&osc};
    double cf = estimate_c_flat(effsys, sys);
    if (!(zeta.real() < cf))
      throw ConfigError("zeta = " + fmt_g(zeta.real()) +
                        " is not below the estimated spectrum bottom " + fmt_g(cf));
  }

  const int n = rc.model.n;
  const int m = rc.model.m;
  Vec F = sweep_load(mesh, n, rc.seed);
  SolveResult u_eps = solve_resolvent(osc, zeta, F, tog.allow_real_axis);
  SolveResult u0 = solve_resolvent(effsys, zeta, F, tog.allow_real_axis);

  CorrectorOutput corr_s, corr_ns;
  Vec fx;
  std::optional<SolveResult> w;
  if (tog.corrector) {
    corr_s = first_order_approx(mesh, u0.u, rc.model.b, cb.cell, eps);
    corr_ns = corrector_no_smoothing(mesh, u0.u, rc.model.b, cb.cell, eps);
    fx = flux_approx(mesh, u0.u, rc.model.b, cb.prob.g, cb.cell, eps, tog.smoothing);
    if (tog.boundary_layer) {
      CorrectorOutput tr = boundary_corrector_trace(mesh, u0.u, rc.model.b, cb.cell, eps);
      w = solve_boundary_layer(osc, zeta, tr.w_trace, tog.allow_real_axis);
    }
  } else {
    corr_s.v_eps = u0.u;
    corr_s.K_term = Vec::Zero(u0.u.size());
    corr_ns = corr_s;
    corr_ns.smoothing = false;
    Vec bDu0 = grid_bD_domain(mesh, u0.u, rc.model.b);
    fx = Vec::Zero(mesh.nodes * m);
    for (long node = 0; node < mesh.nodes; ++node)
      fx.segment(node * m, m) = cb.eff.g0 * bDu0.segment(node * m, m);
  }
  Vec fe = flux_of(mesh, u_eps.u, rc.model.b, cb.prob.g, eps);
  ApproxBundle ab;
  ab.smooth = &corr_s;
  ab.plain = &corr_ns;
  ab.flux = &fx;
  ab.flux_eps = &fe;
  ab.w = w ? &*w : nullptr;
  ab.prefer_smooth = tog.smoothing;
  ErrorRow row = error_norms(mesh, u_eps, u0, ab);
  row.epsilon = eps;

  double gap = 0;
  for (int i = 0; i < tog.gap_samples; ++i) {
    std::uint64_t sub = rc.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(i + 1);
    Vec Fi = sweep_load(mesh, n, sub);
    SolveResult ue = solve_resolvent(osc, zeta, Fi, tog.allow_real_axis);
    SolveResult u0i = solve_resolvent(effsys, zeta, Fi, tog.allow_real_axis);
    double den = quad_l2(mesh, Fi, n);
    if (den > 0) gap = std::max(gap, quad_l2(mesh, ue.u - u0i.u, n) / den);
  }
  row.gap_l2 = gap;
  row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::fputs(rows_to_csv({row}, rc.timing).c_str(), stdout);
  if (!rc.out.empty()) {
    nlohmann::json j;
    j["epsilon"] = eps;
    j["zeta"] = {zeta.real(), zeta.imag()};
    j["lambda_shift"] = cb.lambda;
    j["n"] = n;
    j["mesh"] = {{"dim", mesh.dim},
                 {"h", mesh.h},
                 {"lo", {dom.lo[0], dom.lo[1]}},
                 {"hi", {dom.hi[0], dom.hi[1]}},
                 {"nn", {mesh.nn[0], mesh.nn[1]}}};
    j["row"] = row_json(row);
    j["u_eps"] = jvec(u_eps.u);
    j["u0"] = jvec(u0.u);
    j["v_eps"] = jvec(corr_s.v_eps);
    j["v_eps_nosmooth"] = jvec(corr_ns.v_eps);
    j["w"] = w ? jvec(w->u) : nlohmann::json();
    write_text(rc.out, j.dump() + "\n");
    std::printf("wrote %s\n", rc.out.c_str());
  }
  return 0;
}

void sort_grids(std::vector<double>& eps, std::vector<cplx>& zeta) {
  std::sort(eps.begin(), eps.end());
  std::sort(zeta.begin(), zeta.end(), [](cplx a, cplx b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
}

// coarsest-mesh bound for the rho-flat admissibility of the whole grid
void check_rho_flat_grid(const SweepProblem& p, const std::vector<double>& eps,
                         const std::vector<cplx>& zetas) {
  double e = *std::max_element(eps.begin(), eps.end());
  CellSolution cell = solve_cell({p.lat, p.b, p.g, p.a});
  double lambda = p.lambda >= 0 ? p.lambda : choose_lambda_shift(p.g, p.b, p.a, p.Q, p.Q0, p.lat);
  EffectiveOperator eff = assemble_effective(cell, p.g, p.b, p.a, p.Q, p.Q0, lambda);
  DomainMesh mesh = build_mesh(p.domain, e / p.refine, 0);
  OscillatingCoeffs oc{p.g, p.a, p.Q, p.Q0};
  DiscreteSystem osc = assemble_oscillating(mesh, oc, p.b, e, lambda);
  DiscreteSystem effsys = assemble_effective(mesh, eff);
  std::vector<const DiscreteSystem*> sys{&osc};
  double cf = estimate_c_flat(effsys, sys);
  for (cplx z : zetas)
    if (!(z.real() < cf))
      throw ConfigError("zeta = " + fmt_g(z.real()) +
                        " is not below the estimated spectrum bottom " + fmt_g(cf));
}

int cmd_sweep(const RunConfig& rc) {
  require_model(rc);
  if (rc.eps.empty()) throw ConfigError("sweep needs at least one eps");
  if (rc.zeta.empty()) throw ConfigError("sweep needs at least one zeta");
  std::vector<double> eps = rc.eps;
  std::vector<cplx> zetas = rc.zeta;
  sort_grids(eps, zetas);
  SweepProblem p = to_sweep_problem(rc.model, cell_n_of(rc), rc.seed);
  p.refine = rc.ratio;
  SweepToggles tog = toggles_of(rc);
  if (tog.allow_real_axis) check_rho_flat_grid(p, eps, zetas);
  SweepResult res = run_sweep(p, eps, zetas, tog);
  if (!rc.out.empty()) {
    write_csv(rc.out, res.rows, rc.timing);
    std::printf("wrote %zu rows to %s (lambda shift %s)\n", res.rows.size(), rc.out.c_str(),
                fmt_g(res.lambda).c_str());
  } else {
    std::fputs(rows_to_csv(res.rows, rc.timing).c_str(), stdout);
  }
  return 0;
}

void print_report(const RateReport& rep) {
  auto line = [](bool ok, const std::string& text) {
    std::printf("%s  %s\n", ok ? "ok  " : "FAIL", text.c_str());
  };
  line(rep.l2_ok, "l2 slope " + fmt_g(rep.fit("err_l2").slope) + " in [0.9, 1.1]");
  line(rep.h1_corr_ok, "h1 corrector slope " + fmt_g(rep.fit("err_h1_corr").slope) + " >= 0.45");
  line(rep.h1_bl_ok, "h1 boundary-layer slope " + fmt_g(rep.fit("err_h1_bl").slope) + " >= 0.9");
  line(rep.h1_interior_ok,
       "h1 interior slope " + fmt_g(rep.fit("err_h1_interior").slope) + " >= 0.9");
  line(rep.zeta_ok, "zeta ratio " + fmt_g(rep.fit("err_l2").zeta_ratio) + " <= 4");
  std::printf("%s\n", rep.pass ? "PASS" : "FAIL");
}

int cmd_verify(const RunConfig& rc_in) {
  RunConfig rc = rc_in;
  require_model(rc);
  if (rc.zeta.empty()) rc.zeta = {cplx(-1, 0)};  // default ray phi = pi, |zeta| = 1
  if (rc.eps.size() < 4) throw ConfigError("verify needs at least four eps values");
  std::vector<double> eps = rc.eps;
  std::vector<cplx> zetas = rc.zeta;
  sort_grids(eps, zetas);
  SweepProblem p = to_sweep_problem(rc.model, cell_n_of(rc), rc.seed);
  p.refine = rc.ratio;
  SweepToggles tog = toggles_of(rc);
  if (tog.allow_real_axis) check_rho_flat_grid(p, eps, zetas);
  SweepResult res = run_sweep(p, eps, zetas, tog);
  if (!rc.csv.empty()) {
    write_csv(rc.csv, res.rows, rc.timing);
    std::printf("wrote %zu rows to %s\n", res.rows.size(), rc.csv.c_str());
  }
  RateReport rep = fit_and_judge(res.rows);
  print_report(rep);
  if (!rc.out.empty()) {
    write_text(rc.out, rep.to_json() + "\n");
    std::printf("wrote %s\n", rc.out.c_str());
  }
  return rep.pass ? 0 : 3;
}

int cmd_report(const RunConfig& rc) {
  if (rc.in.empty()) throw ConfigError("report needs --in with a sweep csv");
  RateReport rep = fit_and_judge(read_csv_rows(rc.in));
  print_report(rep);
  if (!rc.out.empty()) {
    write_text(rc.out, rep.to_json() + "\n");
    std::printf("wrote %s\n", rc.out.c_str());
  }
  return rep.pass ? 0 : 3;
}

}  // namespace

ProblemSpec resolve_model(const std::string& token) {
  if (token.find('/') != std::string::npos ||
      (token.size() > 5 && token.compare(token.size() - 5, 5, ".json") == 0))
    return read_model(token);
  return make_model(token);
}

std::vector<ErrorRow> read_csv_rows(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read csv: " + path);
  std::string line;
  if (!std::getline(f, line)) throw ConfigError("empty csv: " + path);
  const std::string expect =
      "epsilon,zeta_re,zeta_im,phi,err_l2,err_h1_plain,err_h1_corr,err_h1_corr_nosmooth,"
      "err_h1_bl,err_h1_interior,err_flux,gap_l2,wall_s";
  if (line != expect) throw ConfigError("csv header mismatch in " + path);
  std::vector<ErrorRow> rows;
  long lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    double v[13];
    int got = std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf,%lf",
                          &v[0], &v[1], &v[2], &v[3], &v[4], &v[5], &v[6], &v[7], &v[8], &v[9],
                          &v[10], &v[11], &v[12]);
    if (got != 13)
      throw ConfigError("csv parse error at line " + std::to_string(lineno) + " of " + path);
    ErrorRow r;
    r.epsilon = v[0];
    r.zeta = cplx(v[1], v[2]);
    r.phi = v[3];
    r.err_l2 = v[4];
    r.err_h1_plain = v[5];
    r.err_h1_corr = v[6];
    r.err_h1_corr_nosmooth = v[7];
    r.err_h1_bl = v[8];
    r.err_h1_interior = v[9];
    r.err_flux = v[10];
    r.gap_l2 = v[11];
    r.wall_s = v[12];
    rows.push_back(r);
  }
  return rows;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"periodic homogenization toolkit: cell problems, effective operators,"
               " resolvent solves, and rate verification"};
  app.require_subcommand(1);

  CmdOpts cell_o, eff_o, solve_o, sweep_o, verify_o, report_o;

  CLI::App* c_cell = app.add_subcommand("cell", "solve the unit cell problems and print g0, V, W");
  add_model_opts(c_cell, cell_o);
  cell_o.o_out = c_cell->add_option("--out", cell_o.out, "write the cell solution as json");

  CLI::App* c_eff = app.add_subcommand("effective", "assemble and print the effective operator");
  add_model_opts(c_eff, eff_o);
  eff_o.o_out = c_eff->add_option("--out", eff_o.out, "write the effective operator as json");

  CLI::App* c_solve =
      app.add_subcommand("solve", "solve one oscillating/effective pair and print its error row");
  add_model_opts(c_solve, solve_o);
  add_pipeline_opts(c_solve, solve_o);
  solve_o.o_out = c_solve->add_option("--out", solve_o.out, "write the solution fields as json");

  CLI::App* c_sweep = app.add_subcommand("sweep", "run an (eps, zeta) sweep and emit csv");
  add_model_opts(c_sweep, sweep_o);
  add_pipeline_opts(c_sweep, sweep_o);
  sweep_o.o_out = c_sweep->add_option("--out", sweep_o.out, "csv destination (default: stdout)");

  CLI::App* c_verify =
      app.add_subcommand("verify", "sweep and judge the rate criteria (exit 3 on failure)");
  add_model_opts(c_verify, verify_o);
  add_pipeline_opts(c_verify, verify_o);
  verify_o.o_out = c_verify->add_option("--out", verify_o.out, "write the rate report as json");
  verify_o.o_csv = c_verify->add_option("--csv", verify_o.csv, "also write the sweep rows as csv");

  CLI::App* c_report = app.add_subcommand("report", "re-judge the rate criteria from a csv");
  report_o.o_in = c_report->add_option("--in", report_o.in, "csv produced by sweep or verify");
  report_o.o_out = c_report->add_option("--out", report_o.out, "write the rate report as json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (c_cell->parsed()) return cmd_cell(build_config(cell_o));
    if (c_eff->parsed()) return cmd_effective(build_config(eff_o));
    if (c_solve->parsed()) return cmd_solve(build_config(solve_o));
    if (c_sweep->parsed()) return cmd_sweep(build_config(sweep_o));
    if (c_verify->parsed()) return cmd_verify(build_config(verify_o));
    if (c_report->parsed()) return cmd_report(build_config(report_o));
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

}  // namespace homog
