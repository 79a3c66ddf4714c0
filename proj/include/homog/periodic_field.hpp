#pragma once

#include <array>
#include <memory>
#include <vector>

#include "homog/field_spec.hpp"
#include "homog/lattice.hpp"
#include "homog/types.hpp"

namespace homog {

// Matrix-valued samples of a periodic field on a uniform cell grid.
// Node j sits at j/N per axis; staggered fields sample at (j+1/2)/N.
struct PeriodicField {
  int dim = 1;
  std::array<int, 3> n{1, 1, 1};
  int rows = 1, cols = 1;
  bool staggered = false;
  bool from_piecewise = false;
  std::vector<Mat> v;

  long total() const { return static_cast<long>(n[0]) * n[1] * n[2]; }
  long index(int i1, int i2, int i3) const {
    return (static_cast<long>(i3) * n[1] + i2) * n[0] + i1;
  }
};

PeriodicField sample_field(const FieldSpec& spec, const Lattice& lat, int npts);

Mat cell_mean(const PeriodicField& f);
// Inverse of the mean of pointwise inverses; fails on singular samples.
Mat harmonic_mean(const PeriodicField& f);

// Value of the eps-rescaled field at physical point x (dim coords).
// Nearest-node lookup for piecewise-sampled fields, multilinear otherwise.
Mat oscillate(const PeriodicField& f, double eps, const double* x);

double linf_spectral(const PeriodicField& f);
double min_eig_over_cell(const PeriodicField& f);
bool is_hermitian_field(const PeriodicField& f, double tol);
void hermitianize(PeriodicField& f);

}  // namespace homog
