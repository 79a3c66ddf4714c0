#include "homog/fft.hpp"

#include <fftw3.h>

namespace homog {

namespace {

void run_plan(int dim, const std::array<int, 3>& n, std::vector<cplx>& data, int sign) {
  long total = static_cast<long>(n[0]) * n[1] * n[2];
  if (static_cast<long>(data.size()) != total) throw ConfigError("fft: size mismatch");
  // x1 is contiguous, so it is the last fftw dimension
  int dims[3];
  for (int i = 0; i < dim; ++i) dims[i] = n[dim - 1 - i];
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan = fftw_plan_dft(dim, dims, ptr, ptr, sign, FFTW_ESTIMATE);
  if (!plan) throw SolverError("fftw plan creation failed");
  fftw_execute(plan);
  fftw_destroy_plan(plan);
}

}  // namespace

void fft_forward(int dim, const std::array<int, 3>& n, std::vector<cplx>& data) {
  run_plan(dim, n, data, FFTW_FORWARD);
  double scale = 1.0 / (static_cast<long>(n[0]) * n[1] * n[2]);
  for (auto& z : data) z *= scale;
}

void fft_inverse(int dim, const std::array<int, 3>& n, std::vector<cplx>& data) {
  run_plan(dim, n, data, FFTW_BACKWARD);
}

}  // namespace homog
