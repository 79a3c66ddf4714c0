#include "homog/symbol.hpp"

#include <cmath>

namespace homog {

AlphaBounds estimate_alpha(const SymbolB& sym) {
  if (sym.m < sym.n) throw ConfigError("symbol: m < n");
  if (static_cast<int>(sym.b.size()) != sym.dim) throw ConfigError("symbol: wrong matrix count");

  std::vector<Eigen::VectorXd> dirs;
  if (sym.dim == 1) {
    Eigen::VectorXd t(1);
    t << 1.0;
    dirs.push_back(t);
  } else if (sym.dim == 2) {
    for (int deg = 0; deg < 360; ++deg) {
      double t = deg * pi / 180.0;
      Eigen::VectorXd v(2);
      v << std::cos(t), std::sin(t);
      dirs.push_back(v);
    }
  } else {
    for (int pdeg = 0; pdeg <= 180; pdeg += 5) {
      double phi = pdeg * pi / 180.0;
      for (int tdeg = 0; tdeg < 360; tdeg += 5) {
        double th = tdeg * pi / 180.0;
        Eigen::VectorXd v(3);
        v << std::sin(phi) * std::cos(th), std::sin(phi) * std::sin(th), std::cos(phi);
        dirs.push_back(v);
      }
    }
  }

  AlphaBounds out;
  out.alpha0 = std::numeric_limits<double>::infinity();
  out.alpha1 = 0;
  for (const auto& th : dirs) {
    Mat bt = sym.at(th);
    Mat s = bt.adjoint() * bt;
    out.alpha0 = std::min(out.alpha0, min_eig_hermitian(s));
    out.alpha1 = std::max(out.alpha1, max_eig_hermitian(s));
  }
  if (out.alpha0 <= 1e-12 * std::max(out.alpha1, 1.0))
    throw ConfigError("symbol: b(theta)*b(theta) is rank deficient on the sphere");
  return out;
}

}  // namespace homog
