#pragma once

// Thin FFTW wrapper. Plans are built once per (dim, N) with FFTW_ESTIMATE so
// that a given grid always runs the same algorithm, independent of timing.

#include <complex>
#include <span>

namespace nsstab::fft {

/// Unnormalized real-to-complex transform; out has N^(dim-1) * (N/2 + 1) slots.
void forward(int dim, int N, std::span<const double> in, std::span<std::complex<double>> out);

/// Unnormalized complex-to-real transform. `in` is preserved.
void backward(int dim, int N, std::span<const std::complex<double>> in, std::span<double> out);

}  // namespace nsstab::fft
