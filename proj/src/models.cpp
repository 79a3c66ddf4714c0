#include "homog/models.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "homog/fft.hpp"
#include "homog/periodic_field.hpp"

namespace homog {

namespace {

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

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

// segment lengths of a piecewise profile (breaks are left endpoints)
std::vector<double> piece_lengths(const FieldSpec& f) {
  std::vector<double> len(f.breaks.size());
  for (size_t i = 0; i < f.breaks.size(); ++i) {
    double next = i + 1 < f.breaks.size() ? f.breaks[i + 1] : f.breaks[0] + 1.0;
    len[i] = next - f.breaks[i];
  }
  return len;
}

void means_of_profile(const FieldSpec& gamma, double& harm, double& arith) {
  if (gamma.kind == FieldKind::Constant) {
    double v = gamma.value(0, 0).real();
    harm = arith = v;
    return;
  }
  if (gamma.kind == FieldKind::Piecewise) {
    std::vector<double> len = piece_lengths(gamma);
    double inv = 0;
    arith = 0;
    for (size_t i = 0; i < len.size(); ++i) {
      double v = gamma.pieces[i](0, 0).real();
      if (v <= 0) throw ConfigError("profile must be positive");
      inv += len[i] / v;
      arith += len[i] * v;
    }
    harm = 1.0 / inv;
    return;
  }
  // smooth profiles: quadrature over a fine sample
  Lattice lat = make_cubic_lattice(gamma.dim);
  PeriodicField s = sample_field(gamma, lat, gamma.dim == 1 ? 4096 : 512);
  if (min_eig_over_cell(s) <= 0) throw ConfigError("profile must be positive");
  harm = harmonic_mean(s)(0, 0).real();
  arith = cell_mean(s)(0, 0).real();
}

FieldSpec fourier_from_samples(const std::vector<cplx>& samples, int dim,
                               const std::array<int, 3>& n) {
  std::vector<cplx> hat = samples;
  fft_forward(dim, n, hat);
  double top = 0;
  for (const cplx& c : hat) top = std::max(top, std::abs(c));
  FieldSpec f;
  f.kind = FieldKind::Fourier;
  f.dim = dim;
  f.rows = f.cols = 1;
  const double cut = 1e-13 * top;
  for (int i3 = 0; i3 < n[2]; ++i3)
    for (int i2 = 0; i2 < n[1]; ++i2)
      for (int i1 = 0; i1 < n[0]; ++i1) {
        long idx = (static_cast<long>(i3) * n[1] + i2) * n[0] + i1;
        if (std::abs(hat[idx]) <= cut) continue;
        FourierMode mode;
        mode.k = {freq_of(i1, n[0]), dim > 1 ? freq_of(i2, n[1]) : 0,
                  dim > 2 ? freq_of(i3, n[2]) : 0};
        mode.coeff = scalar(0);
        mode.coeff(0, 0) = hat[idx];
        f.modes.push_back(std::move(mode));
      }
  return f;
}

void require_real_scalar_samples(const PeriodicField& f, const std::string& what) {
  double top = 0, im = 0;
  for (const Mat& v : f.v) {
    top = std::max(top, std::abs(v(0, 0)));
    im = std::max(im, std::abs(v(0, 0).imag()));
  }
  if (im > 1e-12 * (1 + top)) throw ConfigError(what + " must be real");
}

}  // namespace

void validate_spec(const ProblemSpec& spec) {
  if (spec.dim < 1 || spec.dim > 2) throw ConfigError("model: dim must be 1 or 2");
  if (spec.n < 1 || spec.m < spec.n) throw ConfigError("model: need m >= n >= 1");
  if (spec.b.dim != spec.dim || spec.b.m != spec.m || spec.b.n != spec.n ||
      static_cast<int>(spec.b.b.size()) != spec.dim)
    throw ConfigError("model: symbol shape mismatch");
  for (const Mat& bj : spec.b.b)
    if (bj.rows() != spec.m || bj.cols() != spec.n)
      throw ConfigError("model: symbol shape mismatch");
  auto check_field = [&](const FieldSpec& f, int rows, const char* what) {
    if (f.dim != spec.dim || f.rows != rows || f.cols != rows)
      throw ConfigError(std::string("model: ") + what + " has the wrong shape");
  };
  check_field(spec.g, spec.m, "g");
  check_field(spec.Q, spec.n, "Q");
  check_field(spec.Q0, spec.n, "Q0");
  if (!spec.a.empty() && static_cast<int>(spec.a.size()) != spec.dim)
    throw ConfigError("model: a must have dim entries or none");
  for (const FieldSpec& aj : spec.a) check_field(aj, spec.n, "a_j");
  if (spec.domain.dim != spec.dim) throw ConfigError("model: domain dimension mismatch");
  for (int axis = 0; axis < spec.dim; ++axis)
    if (!(spec.domain.hi[axis] > spec.domain.lo[axis]))
      throw ConfigError("model: empty domain box");

  if (spec.known_effective.size() != 0) {
    if (spec.known_effective.rows() != spec.m || spec.known_effective.cols() != spec.m)
      throw ConfigError("model: known_effective must be m x m");
    Lattice lat = make_cubic_lattice(spec.dim);
    PeriodicField gs = sample_field(spec.g, lat, 128);
    Mat lo = harmonic_mean(gs), hi = cell_mean(gs);
    double scale = max_eig_hermitian(0.5 * (hi + hi.adjoint()));
    Mat ke = 0.5 * (spec.known_effective + spec.known_effective.adjoint());
    if (min_eig_hermitian(ke - 0.5 * (lo + lo.adjoint())) < -1e-8 * scale ||
        min_eig_hermitian(0.5 * (hi + hi.adjoint()) - ke) < -1e-8 * scale)
      throw ConfigError("model: known_effective violates the Voigt-Reuss bracketing");
  }
}

ProblemSpec build_1d_scalar(const FieldSpec& gamma) {
  if (gamma.dim != 1 || gamma.rows != 1 || gamma.cols != 1)
    throw ConfigError("1d scalar model needs a scalar profile");
  ProblemSpec spec;
  spec.dim = spec.n = spec.m = 1;
  spec.b = gradient_symbol(1);
  spec.g = gamma;
  spec.Q = constant_spec(Mat::Zero(1, 1), 1);
  spec.Q0 = constant_spec(scalar(1), 1);
  spec.domain = Box{1, {0, 0}, {1, 1}};
  double harm, arith;
  means_of_profile(gamma, harm, arith);
  spec.known_effective = scalar(harm);
  spec.tags = {"g0-equals-underline"};
  validate_spec(spec);
  return spec;
}

ProblemSpec build_2d_laminate(const FieldSpec& gamma, const std::array<double, 2>& weights) {
  if (gamma.dim != 2 || gamma.rows != 1 || gamma.cols != 1)
    throw ConfigError("laminate model needs a scalar profile on the 2d cell");
  if (weights[0] <= 0 || weights[1] <= 0) throw ConfigError("laminate weights must be positive");
  ProblemSpec spec;
  spec.dim = 2;
  spec.n = 1;
  spec.m = 2;
  spec.b = gradient_symbol(2);

  if (gamma.kind == FieldKind::Piecewise) {
    if (gamma.axis != 0) throw ConfigError("laminate profile must vary along x1");
    spec.g.kind = FieldKind::Piecewise;
    spec.g.dim = 2;
    spec.g.rows = spec.g.cols = 2;
    spec.g.axis = 0;
    spec.g.breaks = gamma.breaks;
    for (const Mat& p : gamma.pieces) {
      Mat gp = Mat::Zero(2, 2);
      gp(0, 0) = p(0, 0) * weights[0];
      gp(1, 1) = p(0, 0) * weights[1];
      spec.g.pieces.push_back(gp);
    }
  } else if (gamma.kind == FieldKind::Constant) {
    Mat gp = Mat::Zero(2, 2);
    gp(0, 0) = gamma.value(0, 0) * weights[0];
    gp(1, 1) = gamma.value(0, 0) * weights[1];
    spec.g = constant_spec(gp, 2);
  } else {
    throw ConfigError("laminate profile must be piecewise or constant in x1");
  }

  spec.Q = constant_spec(Mat::Zero(1, 1), 2);
  spec.Q0 = constant_spec(scalar(1), 2);
  spec.domain = Box{2, {0, 0}, {0.5, 0.5}};
  double harm, arith;
  means_of_profile(gamma, harm, arith);
  Mat ke = Mat::Zero(2, 2);
  ke(0, 0) = harm * weights[0];
  ke(1, 1) = arith * weights[1];
  spec.known_effective = ke;
  spec.tags = {"laminate"};
  validate_spec(spec);
  return spec;
}

ProblemSpec build_zero_corrector_case() {
  ProblemSpec spec;
  spec.dim = 2;
  spec.n = 1;
  spec.m = 2;
  spec.b = gradient_symbol(2);
  spec.g = constant_spec(1.5 * Mat::Identity(2, 2), 2);
  // a = 0.25 (d2 psi, -d1 psi) for psi = sin(2 pi x1) sin(2 pi x2) / (2 pi)
  spec.a.push_back(expr_spec({"0.25*sin(2*pi*x1)*cos(2*pi*x2)"}, 1, 1, 2));
  spec.a.push_back(expr_spec({"-0.25*cos(2*pi*x1)*sin(2*pi*x2)"}, 1, 1, 2));
  spec.Q = expr_spec({"0.3*cos(2*pi*x1)"}, 1, 1, 2);
  spec.Q0 = constant_spec(scalar(1), 2);
  spec.domain = Box{2, {0, 0}, {0.5, 0.5}};
  spec.known_effective = 1.5 * Mat::Identity(2, 2);
  spec.tags = {"zero-corrector"};
  validate_spec(spec);
  return spec;
}

ProblemSpec build_scalar_magnetic(const std::vector<FieldSpec>& A, const FieldSpec& v,
                                  const FieldSpec& V_pot, const FieldSpec& g,
                                  const FieldSpec& Q0, int npts) {
  const int dim = g.dim;
  if (dim < 1 || dim > 2) throw ConfigError("magnetic model: dim must be 1 or 2");
  if (g.rows != dim || g.cols != dim) throw ConfigError("magnetic model: g must be d x d");
  if (static_cast<int>(A.size()) != dim)
    throw ConfigError("magnetic model: A needs one component per axis");

  Lattice lat = make_cubic_lattice(dim);
  PeriodicField gs = sample_field(g, lat, npts);
  PeriodicField vs = sample_field(v, lat, npts);
  PeriodicField Vs = sample_field(V_pot, lat, npts);
  double gtop = 0, gim = 0;
  for (const Mat& m : gs.v) {
    gtop = std::max(gtop, m.cwiseAbs().maxCoeff());
    gim = std::max(gim, m.imag().cwiseAbs().maxCoeff());
  }
  if (gim > 1e-12 * (1 + gtop)) throw ConfigError("magnetic model: g must be real symmetric");
  if (min_eig_over_cell(gs) <= 0) throw ConfigError("magnetic model: g must be positive definite");
  require_real_scalar_samples(vs, "magnetic model: v");
  require_real_scalar_samples(Vs, "magnetic model: V");
  std::vector<PeriodicField> As;
  for (const FieldSpec& Aj : A) {
    As.push_back(sample_field(Aj, lat, npts));
    require_real_scalar_samples(As.back(), "magnetic model: A");
  }

  double vtop = 0;
  for (const Mat& m : vs.v) vtop = std::max(vtop, std::abs(m(0, 0)));
  if (std::abs(cell_mean(vs)(0, 0)) > 1e-12 * (1 + vtop))
    throw ConfigError("magnetic model: v must have zero cell mean");

  // periodic Poisson problem Delta Phi = v, then xi_j = -d_j Phi
  const long total = vs.total();
  std::vector<cplx> vhat(total);
  for (long i = 0; i < total; ++i) vhat[i] = vs.v[i](0, 0);
  fft_forward(dim, vs.n, vhat);
  std::vector<std::vector<cplx>> xi(dim, std::vector<cplx>(total));
  for (int i3 = 0; i3 < vs.n[2]; ++i3)
    for (int i2 = 0; i2 < vs.n[1]; ++i2)
      for (int i1 = 0; i1 < vs.n[0]; ++i1) {
        long idx = vs.index(i1, i2, i3);
        double k[3] = {static_cast<double>(freq_of(i1, vs.n[0])),
                       dim > 1 ? static_cast<double>(freq_of(i2, vs.n[1])) : 0.0,
                       dim > 2 ? static_cast<double>(freq_of(i3, vs.n[2])) : 0.0};
        double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        for (int j = 0; j < dim; ++j)
          xi[j][idx] = k2 == 0 ? cplx(0, 0) : cplx(0, 1) * k[j] * vhat[idx] / (2 * pi * k2);
      }
  for (int j = 0; j < dim; ++j) fft_inverse(dim, vs.n, xi[j]);

  ProblemSpec spec;
  spec.dim = dim;
  spec.n = 1;
  spec.m = dim;
  spec.b = gradient_symbol(dim);
  spec.g = g;
  spec.Q0 = Q0;
  std::vector<cplx> work(total);
  for (int j = 0; j < dim; ++j) {
    for (long i = 0; i < total; ++i) {
      cplx eta = 0;
      for (int l = 0; l < dim; ++l) eta += gs.v[i](j, l) * As[l].v[i](0, 0);
      work[i] = -eta + cplx(0, 1) * xi[j][i].real();
    }
    spec.a.push_back(fourier_from_samples(work, dim, vs.n));
  }
  for (long i = 0; i < total; ++i) {
    cplx gAA = 0;
    for (int j = 0; j < dim; ++j)
      for (int l = 0; l < dim; ++l) gAA += gs.v[i](j, l) * As[l].v[i](0, 0) * As[j].v[i](0, 0);
    work[i] = Vs.v[i](0, 0) + gAA.real();
  }
  spec.Q = fourier_from_samples(work, dim, vs.n);
  spec.domain = dim == 1 ? Box{1, {0, 0}, {1, 1}} : Box{2, {0, 0}, {0.5, 0.5}};
  spec.tags = {"schrodinger"};
  validate_spec(spec);
  return spec;
}

std::vector<std::string> model_names() {
  return {"constant",        "laminate-13", "magnetic-1d",
          "scalar-1d-sine",  "two-phase-1d", "zero-corrector-2d"};
}

ProblemSpec make_model(const std::string& name) {
  ProblemSpec spec;
  if (name == "scalar-1d-sine") {
    spec = build_1d_scalar(expr_spec({"2 + sin(2*pi*x1)"}, 1, 1, 1));
  } else if (name == "two-phase-1d") {
    FieldSpec prof;
    prof.kind = FieldKind::Piecewise;
    prof.dim = 1;
    prof.breaks = {0.0, 0.5};
    prof.pieces = {scalar(1), scalar(3)};
    spec = build_1d_scalar(prof);
  } else if (name == "laminate-13") {
    FieldSpec prof;
    prof.kind = FieldKind::Piecewise;
    prof.dim = 2;
    prof.breaks = {0.0, 0.5};
    prof.pieces = {scalar(1), scalar(3)};
    spec = build_2d_laminate(prof, {1.0, 1.0});
  } else if (name == "zero-corrector-2d") {
    spec = build_zero_corrector_case();
  } else if (name == "magnetic-1d") {
    std::vector<FieldSpec> A = {expr_spec({"0.1 + 0.2*sin(2*pi*x1)"}, 1, 1, 1)};
    FieldSpec v = expr_spec({"cos(2*pi*x1)"}, 1, 1, 1);
    FieldSpec V_pot = expr_spec({"0.5 + 0.2*sin(2*pi*x1)"}, 1, 1, 1);
    FieldSpec g = expr_spec({"1 + 0.3*cos(2*pi*x1)"}, 1, 1, 1);
    FieldSpec Q0 = constant_spec(scalar(1), 1);
    spec = build_scalar_magnetic(A, v, V_pot, g, Q0);
  } else if (name == "constant") {
    spec.dim = 2;
    spec.n = 1;
    spec.m = 2;
    spec.b = gradient_symbol(2);
    Mat gc = Mat::Zero(2, 2);
    gc(0, 0) = 2.0;
    gc(1, 1) = 1.5;
    spec.g = constant_spec(gc, 2);
    spec.Q = constant_spec(-0.5 * Mat::Identity(1, 1), 2);
    spec.Q0 = constant_spec(scalar(1), 2);
    spec.domain = Box{2, {0, 0}, {0.5, 0.5}};
    spec.known_effective = gc;
    validate_spec(spec);
  } else {
    std::string known;
    for (const std::string& nm : model_names()) known += (known.empty() ? "" : ", ") + nm;
    throw ConfigError("unknown model '" + name + "' (known: " + known + ")");
  }
  spec.name = name;
  return spec;
}

namespace {

nlohmann::json cplx_to_json(const cplx& z) { return nlohmann::json::array({z.real(), z.imag()}); }

nlohmann::json mat_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(cplx_to_json(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

Mat mat_from_json(const nlohmann::json& j, int rows, int cols) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw ConfigError("model: matrix value has wrong row count");
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
      throw ConfigError("model: matrix value has wrong column count");
    for (int k = 0; k < cols; ++k) {
      const auto& e = j[i][k];
      if (e.is_number())
        m(i, k) = e.get<double>();
      else if (e.is_array() && e.size() == 2)
        m(i, k) = cplx(e[0].get<double>(), e[1].get<double>());
      else
        throw ConfigError("model: complex entry must be a number or [re, im]");
    }
  }
  return m;
}

}  // namespace

nlohmann::json spec_to_json(const ProblemSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["dim"] = spec.dim;
  j["n"] = spec.n;
  j["m"] = spec.m;
  nlohmann::json bmats = nlohmann::json::array();
  for (const Mat& bj : spec.b.b) bmats.push_back(mat_to_json(bj));
  j["b"] = bmats;
  j["g"] = field_spec_to_json(spec.g);
  nlohmann::json amats = nlohmann::json::array();
  for (const FieldSpec& aj : spec.a) amats.push_back(field_spec_to_json(aj));
  j["a"] = amats;
  j["Q"] = field_spec_to_json(spec.Q);
  j["Q0"] = field_spec_to_json(spec.Q0);
  j["domain"] = {{"lo", std::vector<double>(spec.domain.lo.begin(), spec.domain.lo.begin() + spec.dim)},
                 {"hi", std::vector<double>(spec.domain.hi.begin(), spec.domain.hi.begin() + spec.dim)}};
  j["known_effective"] =
      spec.known_effective.size() == 0 ? nlohmann::json() : mat_to_json(spec.known_effective);
  j["tags"] = spec.tags;
  return j;
}

ProblemSpec spec_from_json(const nlohmann::json& j) try {
  if (!j.is_object()) throw ConfigError("model: spec must be a json object");
  ProblemSpec spec;
  spec.name = j.value("name", std::string());
  spec.dim = j.at("dim").get<int>();
  spec.n = j.at("n").get<int>();
  spec.m = j.at("m").get<int>();
  if (spec.dim < 1 || spec.dim > 2) throw ConfigError("model: dim must be 1 or 2");
  spec.b.dim = spec.dim;
  spec.b.m = spec.m;
  spec.b.n = spec.n;
  const auto& jb = j.at("b");
  if (!jb.is_array() || static_cast<int>(jb.size()) != spec.dim)
    throw ConfigError("model: b must list dim matrices");
  for (const auto& bj : jb) spec.b.b.push_back(mat_from_json(bj, spec.m, spec.n));
  spec.g = parse_field_spec(j.at("g"), spec.dim);
  for (const auto& aj : j.at("a")) spec.a.push_back(parse_field_spec(aj, spec.dim));
  spec.Q = parse_field_spec(j.at("Q"), spec.dim);
  spec.Q0 = parse_field_spec(j.at("Q0"), spec.dim);
  const auto& jd = j.at("domain");
  spec.domain.dim = spec.dim;
  const auto lo = jd.at("lo").get<std::vector<double>>();
  const auto hi = jd.at("hi").get<std::vector<double>>();
  if (static_cast<int>(lo.size()) != spec.dim || static_cast<int>(hi.size()) != spec.dim)
    throw ConfigError("model: domain box has the wrong dimension");
  for (int axis = 0; axis < spec.dim; ++axis) {
    spec.domain.lo[axis] = lo[axis];
    spec.domain.hi[axis] = hi[axis];
  }
  const auto& ke = j.at("known_effective");
  if (!ke.is_null()) spec.known_effective = mat_from_json(ke, spec.m, spec.m);
  spec.tags = j.at("tags").get<std::vector<std::string>>();
  validate_spec(spec);
  return spec;
} catch (const nlohmann::json::exception& e) {
  throw ConfigError(std::string("model: malformed spec json (") + e.what() + ")");
}

void write_model(const std::string& path, const ProblemSpec& spec) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write model file: " + path);
  f << spec_to_json(spec).dump(2) << '\n';
  if (!f.good()) throw ConfigError("cannot write model file: " + path);
}

ProblemSpec read_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read model file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("model file " + path + ": " + e.what());
  }
  return spec_from_json(j);
}

SweepProblem to_sweep_problem(const ProblemSpec& spec, int npts, std::uint64_t seed) {
  validate_spec(spec);
  SweepProblem p;
  p.lat = make_cubic_lattice(spec.dim);
  p.b = spec.b;
  p.g = sample_field(spec.g, p.lat, npts);
  for (const FieldSpec& aj : spec.a) p.a.push_back(sample_field(aj, p.lat, npts));
  p.Q = sample_field(spec.Q, p.lat, npts);
  p.Q0 = sample_field(spec.Q0, p.lat, npts);
  p.domain = spec.domain;
  p.seed = seed;
  return p;
}

}  // namespace homog
