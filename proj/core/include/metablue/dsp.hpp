#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace metablue::dsp {

using cdouble = std::complex<double>;

std::size_t next_pow2(std::size_t n);

/// In-place iterative radix-2 FFT. x.size() must be a power of two.
/// The inverse transform includes the 1/N normalization.
void fft(std::vector<cdouble>& x, bool inverse = false);

/// FFT of a real signal zero-padded to nfft (power of two, >= x.size()).
std::vector<cdouble> fft_real(std::span<const double> x, std::size_t nfft);

/// Hamming-windowed sinc low-pass FIR. taps must be odd.
std::vector<double> design_lowpass_fir(std::size_t taps, double cutoff_hz,
                                       double sample_rate);

/// Causal FIR filter, zero initial state, output length equals input length.
std::vector<double> fir_filter(std::span<const double> taps,
                               std::span<const double> x);

/// Forward-backward FIR filtering: zero phase, squared magnitude response.
std::vector<double> filtfilt(std::span<const double> taps,
                             std::span<const double> x);

/// Normalized cross-correlation magnitude of ref against every alignment of
/// x. Result has x.size() - ref.size() + 1 entries in [0, 1]:
///   score[i] = |sum x[i+m] ref[m]| / (||ref|| * ||x[i..i+M)||).
std::vector<double> normalized_xcorr(std::span<const double> x,
                                     std::span<const double> ref);

struct Peak {
  std::size_t index = 0;
  double score = 0.0;
};

/// Local maxima of score above floor, thinned so that kept peaks are at
/// least min_separation apart (strongest wins). Sorted by index.
std::vector<Peak> find_peaks(std::span<const double> score, double floor,
                             std::size_t min_separation);

/// Linear interpolation of (xs, ys) at x, clamped to the end values.
/// xs must be strictly increasing.
double interp_linear(std::span<const double> xs, std::span<const double> ys,
                     double x);

}  // namespace metablue::dsp
