#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "metablue/dsp.hpp"
#include "metablue/errors.hpp"
#include "metablue/waveform.hpp"
#include "test_support.hpp"

using namespace metablue;
using doctest::Approx;

namespace {

// Short-time spectral peak around sample index center.
double stft_peak_freq(const std::vector<double>& x, double fs,
                      std::size_t center, std::size_t window) {
  const std::size_t lo = center - window / 2;
  std::vector<double> seg(x.begin() + static_cast<long>(lo),
                          x.begin() + static_cast<long>(lo + window));
  // Hann window against leakage.
  for (std::size_t i = 0; i < seg.size(); ++i) {
    seg[i] *= 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(i) /
                                   static_cast<double>(seg.size() - 1));
  }
  const std::size_t nfft = dsp::next_pow2(8 * window);
  const auto spec = dsp::fft_real(seg, nfft);
  std::size_t best = 0;
  for (std::size_t b = 1; b <= nfft / 2; ++b) {
    if (std::abs(spec[b]) > std::abs(spec[best])) best = b;
  }
  return static_cast<double>(best) * fs / static_cast<double>(nfft);
}

}  // namespace

TEST_CASE("chirp starts at the full amplitude") {
  ChirpSpec spec = testsupport::default_chirp();
  spec.amplitude = 2.5;
  const auto s = synth_chirp(spec);
  CHECK(s[0] == Approx(2.5));
}

TEST_CASE("chirp slope follows bandwidth over duration") {
  ChirpSpec spec;
  spec.f0 = 125e3;
  spec.bandwidth = 125e3;
  spec.duration = 0.2e-3;
  CHECK(spec.slope() == Approx(6.25e8));
}

TEST_CASE("instantaneous frequency reaches f0 + B at the chirp end") {
  ChirpSpec spec = testsupport::default_chirp();
  spec.sample_rate = 4e6;
  const auto s = synth_chirp(spec);
  const std::size_t window = 128;
  const double fs = spec.sample_rate;
  const std::size_t center = s.size() - 1 - window / 2 - 1;
  const double f_measured = stft_peak_freq(s, fs, center, window);
  // Resolution of the windowed estimate: one main-lobe width.
  const double bin = fs / static_cast<double>(window);
  // Extrapolate the window-center estimate to t = T along the known slope.
  const double t_center = static_cast<double>(center) / fs;
  const double t_end = static_cast<double>(s.size() - 1) / fs;
  const double f_at_end = f_measured + spec.slope() * (t_end - t_center);
  CHECK(std::abs(f_at_end - (spec.f0 + spec.bandwidth)) <= bin);
}

TEST_CASE("Nyquist violation is rejected") {
  ChirpSpec spec = testsupport::default_chirp();
  spec.sample_rate = 600e3;  // f0 + B = 375 kHz >= fs/2
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK_THROWS_AS(synth_chirp(spec), ConfigError);
}

TEST_CASE("chirp autocorrelation peak clears sidelobes by 6 dB at TB >= 25") {
  ChirpSpec spec;
  spec.f0 = 125e3;
  spec.bandwidth = 125e3;  // TB = 25
  spec.duration = 0.2e-3;
  spec.sample_rate = 2e6;
  const auto s = synth_chirp(spec);
  const std::size_t n = s.size();
  std::vector<double> corr(2 * n - 1, 0.0);
  for (std::size_t lag = 0; lag < corr.size(); ++lag) {
    const long shift = static_cast<long>(lag) - static_cast<long>(n - 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const long k = static_cast<long>(i) + shift;
      if (k >= 0 && k < static_cast<long>(n)) acc += s[i] * s[static_cast<std::size_t>(k)];
    }
    corr[lag] = std::abs(acc);
  }
  const std::size_t zero_lag = n - 1;
  const double peak = corr[zero_lag];
  // Sidelobes live beyond the compressed main lobe of width 1/B.
  const std::size_t mainlobe =
      static_cast<std::size_t>(std::ceil(spec.sample_rate / spec.bandwidth));
  for (std::size_t lag = 0; lag < corr.size(); ++lag) {
    const std::size_t dist =
        lag > zero_lag ? lag - zero_lag : zero_lag - lag;
    if (dist <= mainlobe) continue;
    CHECK(peak >= 2.0 * corr[lag]);  // 6 dB in amplitude
  }
  std::size_t argmax = 0;
  for (std::size_t lag = 1; lag < corr.size(); ++lag) {
    if (corr[lag] > corr[argmax]) argmax = lag;
  }
  CHECK(argmax == zero_lag);
}

TEST_CASE("all-ones gain table is an identity filter") {
  const ChirpSpec spec = testsupport::default_chirp();
  const auto x = synth_chirp(spec);
  const DirectionalGainTable ones = DirectionalGainTable::isotropic(
      default_angle_grid(), linspace(100e3, 400e3, 31));
  const auto y = shape_by_direction(spec, ones, 1.0);
  REQUIRE(y.size() == x.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (y[i] - x[i]) * (y[i] - x[i]);
    den += x[i] * x[i];
  }
  CHECK(std::sqrt(num / den) < 1e-9);
}

TEST_CASE("constant 0.5 gain over the whole band halves the signal") {
  const ChirpSpec spec = testsupport::default_chirp();
  const auto x = synth_chirp(spec);
  DirectionalGainTable half = DirectionalGainTable::isotropic(
      default_angle_grid(), linspace(0.0, spec.sample_rate / 2.0, 33));
  for (auto& g : half.gains) g = {0.5, 0.0};
  const auto y = shape_samples(x, spec.sample_rate, half, 0.3);
  for (std::size_t i = 0; i < x.size(); i += 7) {
    CHECK(y[i] == Approx(0.5 * x[i]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("shaped spectrum equals gain times input spectrum on grid points") {
  const ChirpSpec spec = testsupport::default_chirp();
  const auto chirp = synth_chirp(spec);
  // Headroom around the chirp so the (short) filter response stays inside
  // the preserved output window.
  std::vector<double> x(512, 0.0);
  const std::size_t offset = 50;
  for (std::size_t i = 0; i < chirp.size(); ++i) x[offset + i] = chirp[i];

  const std::size_t nfft = dsp::next_pow2(2 * x.size());
  const double bin_hz = spec.sample_rate / static_cast<double>(nfft);

  // Gain with a compact impulse response (a few cosine harmonics) sampled
  // on every FFT bin, so the frequency-domain product is exact.
  std::vector<double> freqs(nfft / 2 + 1);
  DirectionalGainTable t;
  t.angles = {0.0, 3.0};
  t.freqs.resize(freqs.size());
  t.gains.resize(2 * freqs.size());
  const double f_ny = spec.sample_rate / 2.0;
  for (std::size_t b = 0; b < freqs.size(); ++b) {
    const double f = static_cast<double>(b) * bin_hz;
    t.freqs[b] = f;
    const double g =
        1.0 + 0.4 * std::cos(kTwoPi * f / f_ny) + 0.2 * std::cos(2.0 * kTwoPi * f / f_ny);
    t.gains[b] = {g, 0.0};
    t.gains[freqs.size() + b] = {0.7, 0.0};
  }

  const auto y = shape_samples(x, spec.sample_rate, t, 0.0);
  const auto xs = dsp::fft_real(x, nfft);
  const auto ys = dsp::fft_real(y, nfft);
  for (std::size_t b = 0; b <= nfft / 2; ++b) {
    const double f = static_cast<double>(b) * bin_hz;
    if (f < spec.f0 + 10e3 || f > spec.f0 + spec.bandwidth - 10e3) continue;
    const double want = std::abs(t.gain_at_row(0, f)) * std::abs(xs[b]);
    CHECK(std::abs(ys[b]) == Approx(want).epsilon(1e-6));
  }
}

TEST_CASE("shaping is linear") {
  const ChirpSpec a = testsupport::default_chirp();
  ChirpSpec b = a;
  b.f0 = 150e3;
  const auto xa = synth_chirp(a);
  auto xb = synth_chirp(b);
  xb.resize(xa.size());
  std::vector<double> sum(xa.size());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = xa[i] + xb[i];

  const MetasurfaceConfig cfg = testsupport::test_surface(20, 8);
  const DirectionalGainTable t = build_gain_table(
      cfg, default_angle_grid(), linspace(100e3, 400e3, 61));
  const auto ya = shape_samples(xa, a.sample_rate, t, 0.7);
  const auto yb = shape_samples(xb, a.sample_rate, t, 0.7);
  const auto ysum = shape_samples(sum, a.sample_rate, t, 0.7);
  for (std::size_t i = 0; i < sum.size(); i += 13) {
    CHECK(ysum[i] == Approx(ya[i] + yb[i]).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("shaping keeps the output length") {
  const ChirpSpec spec = testsupport::default_chirp();
  const MetasurfaceConfig cfg = testsupport::test_surface(16, 2);
  const DirectionalGainTable t = build_gain_table(
      cfg, default_angle_grid(), linspace(100e3, 400e3, 41));
  CHECK(shape_by_direction(spec, t, 2.0).size() == spec.sample_count());
}
