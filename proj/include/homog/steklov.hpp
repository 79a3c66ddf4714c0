#pragma once

#include <array>
#include <vector>

#include "homog/grid_fn.hpp"
#include "homog/types.hpp"

namespace homog {

// Steklov smoothing (S_eps u)(x) = |Omega|^{-1} int_Omega u(x - eps z) dz on the
// unit cubic cell: a tensor-product moving average of width eps per axis,
// realized as a composite-trapezoid convolution on the grid. Requires the
// window to resolve at least 8 grid intervals (h <= eps/8) and eps/h even.

// Periodic version: u lives on an N^d grid over the unit cell, h = 1/N.
std::vector<cplx> steklov_periodic(const std::vector<cplx>& u, int dim,
                                   const std::array<int, 3>& n, double eps);

// Box version: valid at nodes where the full window fits; other nodes are zeroed.
GridFn steklov_box(const GridFn& u, double eps);

}  // namespace homog
