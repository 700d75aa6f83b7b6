#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "metablue/ams_model.hpp"

namespace metablue {

/// Linear up-chirp description. The instantaneous frequency sweeps from f0
/// to f0 + bandwidth over the duration; slope k = bandwidth / duration maps
/// envelope time to frequency via f = k*t + f0.
struct ChirpSpec {
  double amplitude = 1.0;
  double f0 = 125e3;         ///< Hz
  double bandwidth = 125e3;  ///< Hz
  double duration = 0.2e-3;  ///< s
  double sample_rate = 2e6;  ///< Hz

  double slope() const { return bandwidth / duration; }
  std::size_t sample_count() const;
  void validate() const;
};

/// samples[n] = A cos(2 pi (f0 + k t/2) t), t = n / sample_rate, t in [0, T].
std::vector<double> synth_chirp(const ChirpSpec& spec);

/// Unit-amplitude reference of the same chirp, used as the correlation and
/// demodulation reference.
std::vector<double> synth_chirp_reference(const ChirpSpec& spec);

/// Quadrature (sine-phase) companion of the reference chirp.
std::vector<double> synth_chirp_quadrature(const ChirpSpec& spec);

/// Applies a directional gain to arbitrary samples in the frequency domain:
/// nearest-angle row, linear interpolation across the frequency grid, unit
/// gain outside the grid. Output length equals input length.
std::vector<double> shape_samples(std::span<const double> x, double sample_rate,
                                  const DirectionalGainTable& table,
                                  double theta);

/// Synthesizes the chirp and shapes it by the gain at angle theta.
std::vector<double> shape_by_direction(const ChirpSpec& spec,
                                       const DirectionalGainTable& table,
                                       double theta);

}  // namespace metablue
