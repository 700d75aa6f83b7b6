#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "metablue/waveform.hpp"

namespace metablue {

/// Parameters of the multipath suppression low-pass stage. The cutoff must
/// satisfy f_cut < k * t_min, where k is the chirp slope and t_min the
/// expected minimum LOS-NLOS delay of the environment.
struct SuppressionParams {
  double f_cut = 35e3;          ///< Hz
  std::size_t filter_taps = 255;
  double t_min = 0.065e-3;      ///< s
  std::size_t grid_bins = 101;  ///< frequency grid size of the feature
  /// Fraction trimmed at each envelope end, where filter transients and the
  /// surface's transit-delay spillover dominate.
  double trim_fraction = 0.12;

  void validate(const ChirpSpec& chirp) const;

  /// Longest NLOS delay the filter can suppress: f_cut / k.
  double suppressible_delay(const ChirpSpec& chirp) const {
    return f_cut / chirp.slope();
  }
};

struct DetectResult {
  std::size_t index = 0;
  double score = 0.0;  ///< normalized correlation in [0, 1]
};

/// Index of the maximum normalized cross-correlation against the reference
/// chirp. Throws NotFoundError when the best score is below score_floor.
DetectResult detect_chirp(std::span<const double> samples,
                          const ChirpSpec& spec, double score_floor = 0.3);

/// Index of the earliest correlation peak: the EM leakage copy of the drive
/// waveform, which arrives effectively instantaneously.
DetectResult detect_em_marker(std::span<const double> samples,
                              const ChirpSpec& drive, double score_floor = 0.3);

/// All correlation peaks above score_floor, thinned to half a chirp length,
/// sorted by index. Shared by the EM/acoustic pairing logic in ranging.
std::vector<DetectResult> correlation_peaks(std::span<const double> samples,
                                            const ChirpSpec& spec,
                                            double score_floor = 0.3);

/// The directional envelope recovered from one chirp segment together with
/// its mapping onto a frequency grid via t -> f = k*t + f0.
struct EnvelopeFeature {
  std::vector<double> envelope;            ///< time-domain, transient-trimmed
  std::vector<double> grid_freqs;          ///< Hz
  std::vector<double> resampled_spectrum;  ///< envelope on grid_freqs
};

/// Multiplies the onset-aligned segment by the reference chirp (in-phase and
/// quadrature), applies a zero-phase low-pass at f_cut, and maps the
/// magnitude of the recovered baseband envelope onto the frequency grid.
/// The segment must start at the chirp onset.
EnvelopeFeature suppress_multipath(std::span<const double> segment,
                                   const ChirpSpec& spec,
                                   const SuppressionParams& params);

/// Baseline feature without suppression: the magnitude spectrum of the raw
/// segment sampled on the same frequency grid.
EnvelopeFeature raw_spectrum_feature(std::span<const double> segment,
                                     const ChirpSpec& spec,
                                     const SuppressionParams& params);

}  // namespace metablue
