#pragma once

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "polybeam/common.hpp"

namespace polybeam::fft {

// Thin wrappers over Eigen's FFT (kissfft backend): deterministic, any size.

inline std::vector<cdouble> forward(const std::vector<cdouble>& x) {
  Eigen::FFT<double> fft;
  std::vector<cdouble> y;
  fft.fwd(y, x);
  return y;
}

inline std::vector<cdouble> inverse(const std::vector<cdouble>& x) {
  Eigen::FFT<double> fft;
  std::vector<cdouble> y;
  fft.inv(y, x);
  return y;
}

// Real signal -> full complex spectrum of the same length.
inline std::vector<cdouble> forward_real(const std::vector<double>& x) {
  std::vector<cdouble> xc(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) xc[i] = cdouble(x[i], 0.0);
  return forward(xc);
}

// Half spectrum (bins 0..n/2 for even n) -> length-n real signal.
// The imaginary residue of the inverse transform is returned so callers can
// assert the spectrum really was conjugate-symmetric.
inline std::vector<double> inverse_hermitian(const std::vector<cdouble>& half,
                                             std::size_t n,
                                             double* max_imag_residue = nullptr) {
  if (n == 0 || half.size() != n / 2 + 1)
    throw InvalidArgument("inverse_hermitian: spectrum size must be n/2+1");
  std::vector<cdouble> full(n);
  for (std::size_t k = 0; k < half.size(); ++k) full[k] = half[k];
  for (std::size_t k = half.size(); k < n; ++k) full[k] = std::conj(full[n - k]);
  std::vector<cdouble> t = inverse(full);
  std::vector<double> y(n);
  double resid = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = t[i].real();
    resid = std::max(resid, std::abs(t[i].imag()));
  }
  if (max_imag_residue) *max_imag_residue = resid;
  return y;
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace polybeam::fft
