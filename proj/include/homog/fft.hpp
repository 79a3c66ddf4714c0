#pragma once

#include <array>
#include <vector>

#include "homog/types.hpp"

namespace homog {

// In-place d-dim DFTs on x1-fastest arrays.
// forward: c_k = (1/Ntot) sum_j f_j e^{-2 pi i k.j/N}   (trig interpolant coefficients)
// inverse: f_j = sum_k c_k e^{+2 pi i k.j/N}
void fft_forward(int dim, const std::array<int, 3>& n, std::vector<cplx>& data);
void fft_inverse(int dim, const std::array<int, 3>& n, std::vector<cplx>& data);

// FFT bin t -> signed frequency in [-N/2, N/2-1]
inline int freq_of(int t, int n) { return t <= (n - 1) / 2 ? t : t - n; }

}  // namespace homog
