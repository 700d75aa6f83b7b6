#include "metablue/receiver_dsp.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "metablue/common.hpp"
#include "metablue/dsp.hpp"
#include "metablue/errors.hpp"

namespace metablue {

void SuppressionParams::validate(const ChirpSpec& chirp) const {
  if (f_cut <= 0.0) throw ConfigError("SuppressionParams: f_cut must be > 0");
  if (filter_taps % 2 == 0 || filter_taps < 3) {
    throw ConfigError("SuppressionParams: filter_taps must be odd and >= 3");
  }
  if (trim_fraction < 0.0 || trim_fraction >= 0.5) {
    throw ConfigError("SuppressionParams: trim_fraction must be in [0, 0.5)");
  }
  if (grid_bins < 2) throw ConfigError("SuppressionParams: grid_bins too small");
  const double bound = chirp.slope() * t_min;
  if (!(f_cut < bound)) {
    throw ConfigError("SuppressionParams: f_cut (" + std::to_string(f_cut) +
                      " Hz) must be below k*t_min (" + std::to_string(bound) +
                      " Hz)");
  }
}

namespace {

std::vector<DetectResult> peaks_impl(std::span<const double> samples,
                                     const ChirpSpec& spec, double floor) {
  spec.validate();
  const std::vector<double> ref = synth_chirp_reference(spec);
  if (samples.size() < ref.size()) {
    throw NotFoundError("detect: capture shorter than the chirp");
  }
  const std::vector<double> score = dsp::normalized_xcorr(samples, ref);
  const auto raw = dsp::find_peaks(score, floor, ref.size() / 2);
  std::vector<DetectResult> out;
  out.reserve(raw.size());
  for (const auto& p : raw) out.push_back({p.index, p.score});
  return out;
}

}  // namespace

std::vector<DetectResult> correlation_peaks(std::span<const double> samples,
                                            const ChirpSpec& spec,
                                            double score_floor) {
  return peaks_impl(samples, spec, score_floor);
}

DetectResult detect_chirp(std::span<const double> samples,
                          const ChirpSpec& spec, double score_floor) {
  const auto peaks = peaks_impl(samples, spec, score_floor);
  if (peaks.empty()) {
    throw NotFoundError("detect_chirp: no correlation peak above floor");
  }
  return *std::max_element(peaks.begin(), peaks.end(),
                           [](const DetectResult& a, const DetectResult& b) {
                             return a.score < b.score;
                           });
}

DetectResult detect_em_marker(std::span<const double> samples,
                              const ChirpSpec& drive, double score_floor) {
  const auto peaks = peaks_impl(samples, drive, score_floor);
  if (peaks.empty()) {
    throw NotFoundError("detect_em_marker: no correlation peak above floor");
  }
  return peaks.front();  // earliest of the peaks is the leakage copy
}

EnvelopeFeature suppress_multipath(std::span<const double> segment,
                                   const ChirpSpec& spec,
                                   const SuppressionParams& params) {
  spec.validate();
  params.validate(spec);
  const std::vector<double> ref = synth_chirp_reference(spec);
  const std::size_t n = std::min(segment.size(), ref.size());
  if (n < ref.size() / 2) {
    throw std::invalid_argument("suppress_multipath: segment shorter than chirp");
  }

  // m(t) = r(t) * reference chirp: the LOS envelope lands at baseband, each
  // NLOS copy at k*t_k, residuals above 2*f0. The quadrature product gives
  // the other baseband component, so the envelope magnitude is insensitive
  // to sub-sample onset misalignment.
  const std::vector<double> refq = synth_chirp_quadrature(spec);
  std::vector<double> mi(n), mq(n);
  for (std::size_t i = 0; i < n; ++i) {
    mi[i] = segment[i] * ref[i];
    mq[i] = segment[i] * refq[i];
  }

  const std::vector<double> taps =
      dsp::design_lowpass_fir(params.filter_taps, params.f_cut, spec.sample_rate);
  const std::vector<double> in_phase = dsp::filtfilt(taps, mi);
  const std::vector<double> quadrature = dsp::filtfilt(taps, mq);

  const std::size_t trim =
      static_cast<std::size_t>(std::floor(params.trim_fraction *
                                          static_cast<double>(n)));
  const std::size_t lo = trim;
  const std::size_t hi = n - trim;  // exclusive

  EnvelopeFeature feat;
  feat.envelope.resize(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) {
    feat.envelope[i - lo] = std::hypot(in_phase[i], quadrature[i]);
  }

  const double k = spec.slope();
  const double fs = spec.sample_rate;
  const double f_lo = spec.f0 + k * (static_cast<double>(lo) / fs);
  const double f_hi = spec.f0 + k * (static_cast<double>(hi - 1) / fs);
  feat.grid_freqs = linspace(f_lo, f_hi, params.grid_bins);
  feat.resampled_spectrum.resize(params.grid_bins);
  for (std::size_t g = 0; g < params.grid_bins; ++g) {
    const double t = (feat.grid_freqs[g] - spec.f0) / k;
    const double idx = t * fs - static_cast<double>(lo);
    const double clamped = std::clamp(
        idx, 0.0, static_cast<double>(feat.envelope.size() - 1));
    const std::size_t i0 = static_cast<std::size_t>(std::floor(clamped));
    const std::size_t i1 = std::min(i0 + 1, feat.envelope.size() - 1);
    const double frac = clamped - static_cast<double>(i0);
    feat.resampled_spectrum[g] =
        feat.envelope[i0] * (1.0 - frac) + feat.envelope[i1] * frac;
  }
  return feat;
}

EnvelopeFeature raw_spectrum_feature(std::span<const double> segment,
                                     const ChirpSpec& spec,
                                     const SuppressionParams& params) {
  spec.validate();
  const std::vector<double> ref = synth_chirp_reference(spec);
  const std::size_t n = std::min(segment.size(), ref.size());
  if (n < ref.size() / 2) {
    throw std::invalid_argument("raw_spectrum_feature: segment shorter than chirp");
  }
  const std::size_t nfft = dsp::next_pow2(2 * n);
  const auto spectrum = dsp::fft_real(segment.first(n), nfft);

  // Same grid construction as the suppressed path so features are
  // interchangeable downstream.
  const double k = spec.slope();
  const double fs = spec.sample_rate;
  const std::size_t trim =
      static_cast<std::size_t>(std::floor(params.trim_fraction *
                                          static_cast<double>(n)));
  const double f_lo = spec.f0 + k * (static_cast<double>(trim) / fs);
  const double f_hi = spec.f0 + k * (static_cast<double>(n - trim - 1) / fs);

  EnvelopeFeature feat;
  feat.grid_freqs = linspace(f_lo, f_hi, params.grid_bins);
  feat.resampled_spectrum.resize(params.grid_bins);
  const double bin_hz = fs / static_cast<double>(nfft);
  for (std::size_t g = 0; g < params.grid_bins; ++g) {
    const double pos = feat.grid_freqs[g] / bin_hz;
    const std::size_t b0 = static_cast<std::size_t>(std::floor(pos));
    const std::size_t b1 = std::min(b0 + 1, nfft / 2);
    const double frac = pos - static_cast<double>(b0);
    const double v0 = std::abs(spectrum[b0]);
    const double v1 = std::abs(spectrum[b1]);
    feat.resampled_spectrum[g] = v0 * (1.0 - frac) + v1 * frac;
  }
  feat.envelope = feat.resampled_spectrum;
  return feat;
}

}  // namespace metablue
