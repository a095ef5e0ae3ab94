#include "nsstab/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <utility>
#include <vector>

namespace nsstab::fft {
namespace {

struct Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

const Plans& plans_for(int dim, int N) {
  static std::map<std::pair<int, int>, Plans> cache;
  std::lock_guard lock(planner_mutex());
  auto key = std::make_pair(dim, N);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;

  int n[3] = {N, N, N};
  std::size_t phys = 1, spec = 1;
  for (int d = 0; d < dim; ++d) phys *= static_cast<std::size_t>(N);
  spec = phys / static_cast<std::size_t>(N) * static_cast<std::size_t>(N / 2 + 1);

  // Planning arrays only; FFTW_UNALIGNED lets execution use any buffer.
  double* rbuf = fftw_alloc_real(phys);
  fftw_complex* cbuf = fftw_alloc_complex(spec);
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  Plans p;
  p.r2c = fftw_plan_dft_r2c(dim, n, rbuf, cbuf, flags);
  p.c2r = fftw_plan_dft_c2r(dim, n, cbuf, rbuf, flags | FFTW_DESTROY_INPUT);
  fftw_free(rbuf);
  fftw_free(cbuf);
  return cache.emplace(key, p).first->second;
}

}  // namespace

void forward(int dim, int N, std::span<const double> in, std::span<std::complex<double>> out) {
  const Plans& p = plans_for(dim, N);
  // r2c never writes its input under FFTW_ESTIMATE for out-of-place transforms.
  fftw_execute_dft_r2c(p.r2c, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(out.data()));
}

void backward(int dim, int N, std::span<const std::complex<double>> in, std::span<double> out) {
  const Plans& p = plans_for(dim, N);
  thread_local std::vector<std::complex<double>> scratch;
  scratch.assign(in.begin(), in.end());
  fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(scratch.data()), out.data());
}

}  // namespace nsstab::fft
