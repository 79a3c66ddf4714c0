#pragma once

#include <array>
#include <string>
#include <vector>

#include <json.hpp>

#include "homog/field_spec.hpp"
#include "homog/mesh.hpp"
#include "homog/symbol.hpp"
#include "homog/verify.hpp"

namespace homog {

// Serializable description of a complete oscillating problem, with an
// optional closed-form effective matrix as the oracle.
struct ProblemSpec {
  std::string name;
  int dim = 1, n = 1, m = 1;
  SymbolB b;
  FieldSpec g;
  std::vector<FieldSpec> a;  // empty or dim entries
  FieldSpec Q, Q0;
  Box domain;
  Mat known_effective;  // 0x0 when no closed form is known
  std::vector<std::string> tags;
};

// Shape consistency plus the Voigt-Reuss bracketing of known_effective.
void validate_spec(const ProblemSpec& spec);

// Scalar problem on (0,1) whose effective coefficient is the harmonic mean.
ProblemSpec build_1d_scalar(const FieldSpec& gamma);

// g(x) = diag(gamma(x1) w1, gamma(x1) w2) on the square; effective matrix
// diag(harmonic mean * w1, arithmetic mean * w2). The profile must be
// piecewise or constant in x1.
ProblemSpec build_2d_laminate(const FieldSpec& gamma, const std::array<double, 2>& weights);

// Constant g and a curl pair a1 = d2 psi, a2 = -d1 psi, so both cell
// problems have the zero solution.
ProblemSpec build_zero_corrector_case();

// Scalar operator (D - A)^* g (D - A) + eps^{-1} v^eps + V_pot^eps rewritten
// with a_j = -(gA)_j + i xi_j, xi_j = -d_j Phi, Delta Phi = v, and
// Q = V_pot + <gA, A>. v must have zero cell mean.
ProblemSpec build_scalar_magnetic(const std::vector<FieldSpec>& A, const FieldSpec& v,
                                  const FieldSpec& V_pot, const FieldSpec& g,
                                  const FieldSpec& Q0, int npts = 256);

std::vector<std::string> model_names();
ProblemSpec make_model(const std::string& name);

nlohmann::json spec_to_json(const ProblemSpec& spec);
ProblemSpec spec_from_json(const nlohmann::json& j);
void write_model(const std::string& path, const ProblemSpec& spec);
ProblemSpec read_model(const std::string& path);

// Sample the coefficient specs on an npts cell grid for the sweep driver.
SweepProblem to_sweep_problem(const ProblemSpec& spec, int npts, std::uint64_t seed = 1);

}  // namespace homog
