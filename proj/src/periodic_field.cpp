#include "homog/periodic_field.hpp"

#include <cmath>

namespace homog {

namespace {

int wrap_index(long i, int n) {
  long r = i % n;
  return static_cast<int>(r < 0 ? r + n : r);
}

}  // namespace

PeriodicField sample_field(const FieldSpec& spec, const Lattice& lat, int npts) {
  if (npts < 2) throw ConfigError("sample_field: need at least 2 points per axis");
  PeriodicField f;
  f.dim = lat.dim;
  f.rows = spec.rows;
  f.cols = spec.cols;
  f.from_piecewise = spec.is_piecewise();
  for (int i = 0; i < lat.dim; ++i) f.n[i] = npts;

  if (spec.is_piecewise()) {
    for (double br : spec.breaks) {
      double t = br * npts;
      if (std::abs(t - std::round(t)) > 1e-9)
        throw ConfigError("piecewise field: jump at " + std::to_string(br) +
                          " is not on a grid line of N=" + std::to_string(npts));
    }
  }

  f.v.resize(f.total());
  double x[3] = {0, 0, 0};
  for (int i3 = 0; i3 < f.n[2]; ++i3) {
    for (int i2 = 0; i2 < f.n[1]; ++i2) {
      for (int i1 = 0; i1 < f.n[0]; ++i1) {
        x[0] = static_cast<double>(i1) / npts;
        x[1] = static_cast<double>(i2) / npts;
        x[2] = static_cast<double>(i3) / npts;
        f.v[f.index(i1, i2, i3)] = spec.eval(x);
      }
    }
  }
  return f;
}

Mat cell_mean(const PeriodicField& f) {
  Mat acc = Mat::Zero(f.rows, f.cols);
  for (const auto& m : f.v) acc += m;
  return acc / static_cast<double>(f.total());
}

Mat harmonic_mean(const PeriodicField& f) {
  if (f.rows != f.cols) throw ConfigError("harmonic_mean: field must be square");
  Mat acc = Mat::Zero(f.rows, f.cols);
  for (const auto& m : f.v) {
    Eigen::FullPivLU<Mat> lu(m);
    if (!lu.isInvertible()) throw ConfigError("harmonic_mean: singular sample");
    acc += lu.inverse();
  }
  acc /= static_cast<double>(f.total());
  Eigen::FullPivLU<Mat> lu(acc);
  if (!lu.isInvertible()) throw ConfigError("harmonic_mean: singular mean of inverses");
  return lu.inverse();
}

Mat oscillate(const PeriodicField& f, double eps, const double* x) {
  if (eps <= 0) throw ConfigError("oscillate: eps must be positive");
  double t[3] = {0, 0, 0};
  for (int i = 0; i < f.dim; ++i) {
    double y = x[i] / eps;
    y -= std::floor(y);
    t[i] = y * f.n[i] - (f.staggered ? 0.5 : 0.0);
  }
  if (f.from_piecewise) {
    long i1 = wrap_index(std::lround(t[0]), f.n[0]);
    long i2 = wrap_index(std::lround(t[1]), f.n[1]);
    long i3 = wrap_index(std::lround(t[2]), f.n[2]);
    return f.v[f.index(static_cast<int>(i1), static_cast<int>(i2), static_cast<int>(i3))];
  }
  int lo[3], hi[3];
  double w[3];
  for (int i = 0; i < 3; ++i) {
    if (i < f.dim) {
      double fl = std::floor(t[i]);
      lo[i] = wrap_index(static_cast<long>(fl), f.n[i]);
      hi[i] = wrap_index(static_cast<long>(fl) + 1, f.n[i]);
      w[i] = t[i] - fl;
    } else {
      lo[i] = hi[i] = 0;
      w[i] = 0;
    }
  }
  Mat out = Mat::Zero(f.rows, f.cols);
  for (int c3 = 0; c3 < (f.dim > 2 ? 2 : 1); ++c3) {
    for (int c2 = 0; c2 < (f.dim > 1 ? 2 : 1); ++c2) {
      for (int c1 = 0; c1 < 2; ++c1) {
        double weight = (c1 ? w[0] : 1 - w[0]) * (c2 ? w[1] : 1 - w[1]) * (c3 ? w[2] : 1 - w[2]);
        if (weight == 0) continue;
        out += weight * f.v[f.index(c1 ? hi[0] : lo[0], c2 ? hi[1] : lo[1], c3 ? hi[2] : lo[2])];
      }
    }
  }
  return out;
}

double linf_spectral(const PeriodicField& f) {
  double best = 0;
  for (const auto& m : f.v) best = std::max(best, spectral_norm(m));
  return best;
}

double min_eig_over_cell(const PeriodicField& f) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : f.v) best = std::min(best, min_eig_hermitian(m));
  return best;
}

bool is_hermitian_field(const PeriodicField& f, double tol) {
  if (f.rows != f.cols) return false;
  for (const auto& m : f.v)
    if ((m - m.adjoint()).cwiseAbs().maxCoeff() > tol) return false;
  return true;
}

void hermitianize(PeriodicField& f) {
  if (f.rows != f.cols) throw ConfigError("hermitianize: field must be square");
  for (auto& m : f.v) m = 0.5 * (m + m.adjoint()).eval();
}

}  // namespace homog
