#include "metablue/waveform.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

#include "metablue/common.hpp"
#include "metablue/dsp.hpp"
#include "metablue/errors.hpp"

namespace metablue {

std::size_t ChirpSpec::sample_count() const {
  // t in [0, T] inclusive of the start sample, exclusive of the one past T.
  return static_cast<std::size_t>(std::floor(duration * sample_rate)) + 1;
}

void ChirpSpec::validate() const {
  if (duration <= 0.0) throw ConfigError("ChirpSpec: duration must be > 0");
  if (f0 <= 0.0) throw ConfigError("ChirpSpec: f0 must be > 0");
  if (bandwidth < 0.0) throw ConfigError("ChirpSpec: bandwidth must be >= 0");
  if (sample_rate <= 0.0) throw ConfigError("ChirpSpec: sample_rate must be > 0");
  if (f0 + bandwidth >= sample_rate / 2.0) {
    throw ConfigError("ChirpSpec: f0 + bandwidth must stay below Nyquist");
  }
}

namespace {

std::vector<double> synth(const ChirpSpec& spec, double amplitude) {
  spec.validate();
  const double k = spec.slope();
  const std::size_t n = spec.sample_count();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    s[i] = amplitude * std::cos(kTwoPi * (spec.f0 + 0.5 * k * t) * t);
  }
  return s;
}

}  // namespace

std::vector<double> synth_chirp(const ChirpSpec& spec) {
  return synth(spec, spec.amplitude);
}

std::vector<double> synth_chirp_reference(const ChirpSpec& spec) {
  return synth(spec, 1.0);
}

std::vector<double> synth_chirp_quadrature(const ChirpSpec& spec) {
  spec.validate();
  const double k = spec.slope();
  const std::size_t n = spec.sample_count();
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate;
    s[i] = std::sin(kTwoPi * (spec.f0 + 0.5 * k * t) * t);
  }
  return s;
}

std::vector<double> shape_samples(std::span<const double> x, double sample_rate,
                                  const DirectionalGainTable& table,
                                  double theta) {
  if (x.empty()) return {};
  table.validate();
  const std::size_t n = x.size();
  const std::size_t nfft = dsp::next_pow2(2 * n);
  std::vector<dsp::cdouble> spec = dsp::fft_real(x, nfft);

  const std::size_t row = table.nearest_angle(theta);
  const std::size_t half = nfft / 2;
  for (std::size_t b = 0; b <= half; ++b) {
    const double f = static_cast<double>(b) * sample_rate /
                     static_cast<double>(nfft);
    // Table phases are accumulated lags (e^{+j phi} convention); under the
    // DFT's e^{-j omega t} kernel a lag is the conjugate factor.
    std::complex<double> g = std::conj(table.gain_at_row(row, f));
    if (b == 0 || b == half) g = std::complex<double>(g.real(), 0.0);
    spec[b] *= g;
    if (b != 0 && b != half) spec[nfft - b] = std::conj(spec[b]);
  }
  dsp::fft(spec, true);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = spec[i].real();
  return y;
}

std::vector<double> shape_by_direction(const ChirpSpec& spec,
                                       const DirectionalGainTable& table,
                                       double theta) {
  return shape_samples(synth_chirp(spec), spec.sample_rate, table, theta);
}

}  // namespace metablue
