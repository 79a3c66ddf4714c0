#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "homog/models.hpp"

namespace homog {

// Resolved run description shared by every subcommand. Flags win over the
// config file, the file wins over the defaults below.
struct RunConfig {
  ProblemSpec model;
  bool has_model = false;
  int cell_n = 0;                 // 0: 256 in 1d, 128 in 2d
  int ratio = 16;                 // mesh rule h = eps / ratio
  std::vector<double> eps;        // each of the form 1/K
  std::vector<cplx> zeta;
  std::string mode = "standard";  // or "rho-flat": real zeta below the spectrum
  bool corrector = true;
  bool smoothing = true;
  bool boundary_layer = true;
  double interior_margin = -1;    // negative: quarter of the shortest edge
  bool timing = false;
  int jobs = 2;
  std::uint64_t seed = 1;
  std::string out;                // summary / csv / report destination
  std::string csv;                // verify: sweep rows destination
  std::string in;                 // report: csv to re-judge
};

// Catalogue name, or a path (contains '/' or ends in .json) to a spec file.
ProblemSpec resolve_model(const std::string& token);

// Inverse of rows_to_csv; the header must match exactly.
std::vector<ErrorRow> read_csv_rows(const std::string& path);

int run_cli(int argc, const char* const* argv);

}  // namespace homog
