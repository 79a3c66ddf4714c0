#include "homog/effective.hpp"

#include <cmath>

#include "homog/fft.hpp"

namespace homog {

namespace {

// All Fourier coefficients of a sampled field, addressable by frequency vector.
struct FieldCoeffs {
  int dim;
  std::array<int, 3> n;
  int rows, cols;
  std::vector<Mat> hat;

  explicit FieldCoeffs(const PeriodicField& f)
      : dim(f.dim), n{f.n[0], f.n[1], f.n[2]}, rows(f.rows), cols(f.cols) {
    long total = f.total();
    hat.assign(total, Mat(rows, cols));
    std::vector<cplx> buf(total);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        for (long i = 0; i < total; ++i) buf[i] = f.v[i](r, c);
        fft_forward(dim, {n[0], n[1], n[2]}, buf);
        for (long t = 0; t < total; ++t) hat[t](r, c) = buf[t];
      }
  }

  Mat at(const int d[3]) const {
    long idx = 0, mul = 1;
    for (int a = 0; a < dim; ++a) {
      // beyond the grid's Nyquist band the sampled field carries no coefficient
      if (2 * std::abs(d[a]) >= n[a]) return Mat::Zero(rows, cols);
      long ii = ((d[a] % n[a]) + n[a]) % n[a];
      idx += ii * mul;
      mul *= n[a];
    }
    return hat[idx];
  }
};

std::vector<std::array<int, 3>> trig_subspace(int dim) {
  int K = dim == 1 ? 32 : (dim == 2 ? 8 : 3);
  std::vector<std::array<int, 3>> ks;
  int lo2 = dim > 1 ? -K : 0, hi2 = dim > 1 ? K : 0;
  int lo3 = dim > 2 ? -K : 0, hi3 = dim > 2 ? K : 0;
  for (int k3 = lo3; k3 <= hi3; ++k3)
    for (int k2 = lo2; k2 <= hi2; ++k2)
      for (int k1 = -K; k1 <= K; ++k1) ks.push_back({k1, k2, k3});
  return ks;
}

double linf_inv_spectral(const PeriodicField& g) {
  double me = min_eig_over_cell(g);
  if (me <= 0) throw ConfigError("coefficient g is not uniformly positive on the grid");
  return 1.0 / me;
}

double norm_Ls_Q(const PeriodicField& Q, int dim) {
  // s = 1 for d = 1, s = 2 for d >= 2
  double acc = 0;
  for (long i = 0; i < Q.total(); ++i) {
    double nb = spectral_norm(Q.v[i]);
    acc += dim == 1 ? nb : nb * nb;
  }
  acc /= static_cast<double>(Q.total());
  return dim == 1 ? acc : std::sqrt(acc);
}

double compute_Ca2(const std::vector<PeriodicField>& a) {
  double acc = 0;
  for (const auto& aj : a) {
    double s = 0;
    for (long i = 0; i < aj.total(); ++i) {
      double nb = spectral_norm(aj.v[i]);
      s += nb * nb;
    }
    acc += s / static_cast<double>(aj.total());
  }
  return acc;
}

}  // namespace

Mat EffectiveOperator::L(const Eigen::VectorXd& xi) const {
  Mat bxi = b.at(xi);
  Mat out = bxi.adjoint() * g0 * bxi - bxi.adjoint() * V - V.adjoint() * bxi;
  for (int j = 0; j < b.dim; ++j)
    if (!a_mean.empty()) out += a_mean[j] * xi(j);
  out += Q_mean - W + lambda_shift * Q0_mean;
  return out;
}

double choose_lambda_shift(const PeriodicField& g, const SymbolB& b,
                           const std::vector<PeriodicField>& a,
                           const PeriodicField& Q, const PeriodicField& Q0,
                           const Lattice& lat) {
  AlphaBounds al = estimate_alpha(b);
  double c_star = 0.25 * al.alpha0 / linf_inv_spectral(g);

  auto ks = trig_subspace(b.dim);
  long nk = static_cast<long>(ks.size());
  int nn = b.n;
  long dofs = nk * nn;

  FieldCoeffs gh(g);
  FieldCoeffs Qh(Q);
  FieldCoeffs Q0h(Q0);
  std::vector<FieldCoeffs> ah;
  ah.reserve(a.size());
  for (const auto& aj : a) ah.emplace_back(aj);

  Mat H0 = Mat::Zero(dofs, dofs);
  Mat HQ0 = Mat::Zero(dofs, dofs);
  for (long ia = 0; ia < nk; ++ia) {
    Eigen::VectorXd xa(b.dim);
    for (int t = 0; t < b.dim; ++t) xa(t) = 2.0 * pi * ks[ia][t];
    Mat Ba = b.at(xa);
    for (long ib = 0; ib < nk; ++ib) {
      Eigen::VectorXd xb(b.dim);
      for (int t = 0; t < b.dim; ++t) xb(t) = 2.0 * pi * ks[ib][t];
      int d[3] = {ks[ia][0] - ks[ib][0], ks[ia][1] - ks[ib][1], ks[ia][2] - ks[ib][2]};

      Mat blk = Ba.adjoint() * gh.at(d) * b.at(xb);
      for (int j = 0; j < b.dim && !ah.empty(); ++j) {
        int dm[3] = {-d[0], -d[1], -d[2]};
        Mat ahat = ah[j].at(d);                 // coeff of a_j at k_a - k_b
        Mat ahat_adj = ah[j].at(dm).adjoint();  // coeff of a_j^* at k_a - k_b
        blk += xb(j) * ahat + xa(j) * ahat_adj;
      }
      blk += Qh.at(d);
      if (ia == ib) blk -= c_star * xa.squaredNorm() * Mat::Identity(nn, nn);
      H0.block(ia * nn, ib * nn, nn, nn) = blk;
      HQ0.block(ia * nn, ib * nn, nn, nn) = Q0h.at(d);
    }
  }
  H0 = (H0 + H0.adjoint()).eval() / 2.0;
  HQ0 = (HQ0 + HQ0.adjoint()).eval() / 2.0;

  auto coercive = [&](double lam) {
    Mat H = H0 + lam * HQ0;
    Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    double scale = std::max({1.0, std::abs(es.eigenvalues().maxCoeff()), std::abs(lo)});
    return lo >= -1e-9 * scale;
  };

  if (coercive(0.0)) return 0.0;
  for (double lam = 1.0; lam <= 1.9e19; lam *= 2.0)
    if (coercive(lam)) return lam;
  throw SolverError("lambda shift search exceeded 2^64; coefficients pathological");
}

EffectiveOperator assemble_effective(const CellSolution& cell, const PeriodicField& g,
                                     const SymbolB& b, const std::vector<PeriodicField>& a,
                                     const PeriodicField& Q, const PeriodicField& Q0,
                                     double lambda_shift) {
  EffectiveOperator eff;
  eff.b = b;
  eff.alpha = estimate_alpha(b);
  auto herm = [](const Mat& m) { return ((m + m.adjoint()) / 2.0).eval(); };
  eff.g0 = herm(cell.g0);
  eff.V = cell.V;
  eff.W = herm(cell.W);
  eff.a_mean.clear();
  for (const auto& aj : a) {
    Mat am = cell_mean(aj);
    eff.a_mean.push_back(herm(am + am.adjoint()));
  }
  if (eff.a_mean.empty())
    eff.a_mean.assign(b.dim, Mat::Zero(b.n, b.n));
  eff.Q_mean = herm(cell_mean(Q));
  eff.Q0_mean = herm(cell_mean(Q0));
  eff.lambda_shift = lambda_shift;

  double g_inv_inf = linf_inv_spectral(g);
  double g_inf = linf_spectral(g);
  eff.c_star = 0.25 * eff.alpha.alpha0 / g_inv_inf;

  double Ca2 = compute_Ca2(a);
  double C_V = std::sqrt(Ca2 / eff.alpha.alpha0) * std::sqrt(double(b.m) * b.n) *
               std::pow(g_inf, 1.5) * std::pow(g_inv_inf, 1.5);
  double qpart = norm_Ls_Q(Q, b.dim) + lambda_shift * linf_spectral(Q0);
  eff.C_L = std::max(eff.alpha.alpha1 * g_inf, qpart) +
            std::sqrt(eff.alpha.alpha1) * C_V + std::sqrt(Ca2);

  // post-check the two-sided symbol bound on sampled directions
  std::vector<Eigen::VectorXd> dirs;
  if (b.dim == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
  } else if (b.dim == 2) {
    for (int t = 0; t < 16; ++t) {
      Eigen::VectorXd v(2);
      v << std::cos(2 * pi * t / 16.0), std::sin(2 * pi * t / 16.0);
      dirs.push_back(v);
    }
  } else {
    for (int i1 = -1; i1 <= 1; ++i1)
      for (int i2 = -1; i2 <= 1; ++i2)
        for (int i3 = -1; i3 <= 1; ++i3) {
          if (!i1 && !i2 && !i3) continue;
          Eigen::VectorXd v(3);
          v << i1, i2, i3;
          dirs.push_back(v.normalized());
        }
  }
  for (double r : {1.0, 10.0}) {
    for (const auto& dir : dirs) {
      Eigen::VectorXd xi = r * dir;
      Mat Lx = eff.L(xi);
      double lo = min_eig_hermitian(herm(Lx));
      double hi = max_eig_hermitian(herm(Lx));
      double tol = 1e-8 * std::max(1.0, hi);
      if (lo < eff.c_star * xi.squaredNorm() - tol)
        throw SolverError("effective symbol violates the lower coercivity bound");
      if (hi > eff.C_L * (xi.squaredNorm() + 1.0) + tol)
        throw SolverError("effective symbol violates the upper bound");
    }
  }
  return eff;
}

}  // namespace homog
