#pragma once

#include <vector>

#include "homog/types.hpp"

namespace homog {

// First-order symbol b(xi) = sum_j b_j xi_j, m x n with m >= n and full rank off xi = 0.
struct SymbolB {
  int dim = 1, m = 1, n = 1;
  std::vector<Mat> b;

  Mat at(const Eigen::VectorXd& xi) const {
    Mat out = Mat::Zero(m, n);
    for (int j = 0; j < dim; ++j) out += xi(j) * b[j];
    return out;
  }
};

struct AlphaBounds {
  double alpha0 = 0;
  double alpha1 = 0;
};

// Sphere-sampled bounds alpha0 I <= b(theta)^* b(theta) <= alpha1 I.
// 1 degree steps in 2D, 5 degrees in 3D. Fails if alpha0 <= 0 (rank deficiency).
AlphaBounds estimate_alpha(const SymbolB& b);

}  // namespace homog
