#include "homog/steklov.hpp"

#include <cmath>

namespace homog {

namespace {

int window_taps(double eps, double h) {
  double ratio = eps / h;
  int w = static_cast<int>(std::lround(ratio));
  if (std::abs(ratio - w) > 1e-9 * std::max(1, w))
    throw ConfigError("steklov: eps must be an integer multiple of h");
  if (w < 8) throw ConfigError("steklov: h too coarse relative to eps (need h <= eps/8)");
  if (w % 2 != 0) throw ConfigError("steklov: eps/h must be even");
  return w;
}

}  // namespace

std::vector<cplx> steklov_periodic(const std::vector<cplx>& u, int dim,
                                   const std::array<int, 3>& n, double eps) {
  std::vector<cplx> cur = u;
  for (int axis = 0; axis < dim; ++axis) {
    int nx = n[axis];
    int w = window_taps(eps, 1.0 / nx);
    int hw = w / 2;
    std::vector<cplx> next(cur.size());
    long stride = 1;
    for (int a = 0; a < axis; ++a) stride *= n[a];
    long outer = 1;
    for (int a = axis + 1; a < 3; ++a) outer *= n[a];
    for (long o = 0; o < outer; ++o) {
      for (long s = 0; s < stride; ++s) {
        long base = o * stride * nx + s;
        for (int i = 0; i < nx; ++i) {
          cplx acc = 0;
          for (int j = -hw; j <= hw; ++j) {
            int t = i + j;
            t %= nx;
            if (t < 0) t += nx;
            double wt = (j == -hw || j == hw) ? 0.5 / w : 1.0 / w;
            acc += wt * cur[base + static_cast<long>(t) * stride];
          }
          next[base + static_cast<long>(i) * stride] = acc;
        }
      }
    }
    cur.swap(next);
  }
  return cur;
}

GridFn steklov_box(const GridFn& u, double eps) {
  int w = window_taps(eps, u.g.h);
  int hw = w / 2;
  GridFn cur = u;
  for (int axis = 0; axis < u.g.dim; ++axis) {
    long nx = u.g.nn[axis];
    GridFn next = GridFn::zero(u.g, u.ncomp);
    long stride = 1;
    for (int a = 0; a < axis; ++a) stride *= u.g.nn[a];
    long outer = 1;
    for (int a = axis + 1; a < 3; ++a) outer *= u.g.nn[a];
    for (long o = 0; o < outer; ++o) {
      for (long s = 0; s < stride; ++s) {
        long base = o * stride * nx + s;
        for (long i = hw; i < nx - hw; ++i) {
          for (int c = 0; c < u.ncomp; ++c) {
            cplx acc = 0;
            for (int j = -hw; j <= hw; ++j) {
              double wt = (j == -hw || j == hw) ? 0.5 / w : 1.0 / w;
              acc += wt * cur.v(base + (i + j) * stride, c);
            }
            next.v(base + i * stride, c) = acc;
          }
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

}  // namespace homog
