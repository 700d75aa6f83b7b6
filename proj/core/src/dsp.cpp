#include "metablue/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metablue/common.hpp"

namespace metablue::dsp {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft(std::vector<cdouble>& x, bool inverse) {
  const std::size_t n = x.size();
  if (n == 0) return;
  if ((n & (n - 1)) != 0) {
    throw std::invalid_argument("fft: size must be a power of two");
  }
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / static_cast<double>(len);
    const cdouble wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        cdouble u = x[i + k];
        cdouble v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : x) v *= inv;
  }
}

std::vector<cdouble> fft_real(std::span<const double> x, std::size_t nfft) {
  if (nfft < x.size()) {
    throw std::invalid_argument("fft_real: nfft smaller than signal");
  }
  std::vector<cdouble> buf(nfft, cdouble(0.0, 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) buf[i] = cdouble(x[i], 0.0);
  fft(buf, false);
  return buf;
}

std::vector<double> design_lowpass_fir(std::size_t taps, double cutoff_hz,
                                       double sample_rate) {
  if (taps % 2 == 0 || taps < 3) {
    throw std::invalid_argument("design_lowpass_fir: taps must be odd and >= 3");
  }
  if (cutoff_hz <= 0.0 || cutoff_hz >= sample_rate / 2.0) {
    throw std::invalid_argument("design_lowpass_fir: cutoff outside (0, fs/2)");
  }
  const double fc = cutoff_hz / sample_rate;  // normalized
  const std::size_t m = taps - 1;
  std::vector<double> h(taps);
  double sum = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const double k = static_cast<double>(i) - static_cast<double>(m) / 2.0;
    double v;
    if (k == 0.0) {
      v = 2.0 * fc;
    } else {
      v = std::sin(kTwoPi * fc * k) / (kPi * k);
    }
    // Hamming window.
    v *= 0.54 - 0.46 * std::cos(kTwoPi * static_cast<double>(i) /
                                static_cast<double>(m));
    h[i] = v;
    sum += v;
  }
  for (auto& v : h) v /= sum;  // unity DC gain
  return h;
}

std::vector<double> fir_filter(std::span<const double> taps,
                               std::span<const double> x) {
  std::vector<double> y(x.size(), 0.0);
  const std::size_t nt = taps.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    double acc = 0.0;
    const std::size_t jmax = std::min(nt - 1, i);
    for (std::size_t j = 0; j <= jmax; ++j) acc += taps[j] * x[i - j];
    y[i] = acc;
  }
  return y;
}

std::vector<double> filtfilt(std::span<const double> taps,
                             std::span<const double> x) {
  // Odd-reflection padding keeps the filter warmed up at the segment edges.
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t pad = std::min(taps.size() - 1, n - 1);
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    ext[i] = 2.0 * x[0] - x[pad - i];
    ext[n + pad + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  for (std::size_t i = 0; i < n; ++i) ext[pad + i] = x[i];

  std::vector<double> y = fir_filter(taps, ext);
  std::reverse(y.begin(), y.end());
  y = fir_filter(taps, y);
  std::reverse(y.begin(), y.end());
  return {y.begin() + static_cast<long>(pad),
          y.begin() + static_cast<long>(pad + n)};
}

std::vector<double> normalized_xcorr(std::span<const double> x,
                                     std::span<const double> ref) {
  const std::size_t n = x.size();
  const std::size_t m = ref.size();
  if (m == 0 || n < m) return {};
  double ref_energy = 0.0;
  for (double v : ref) ref_energy += v * v;
  const double ref_norm = std::sqrt(ref_energy);

  // Prefix sums of x^2 for the sliding window norm.
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + x[i] * x[i];

  std::vector<double> score(n - m + 1, 0.0);
  metablue::parallel_for(score.size(), [&](std::size_t i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) acc += x[i + j] * ref[j];
    const double win = prefix[i + m] - prefix[i];
    const double denom = ref_norm * std::sqrt(win);
    score[i] = denom > 0.0 ? std::min(1.0, std::abs(acc) / denom) : 0.0;
  });
  return score;
}

std::vector<Peak> find_peaks(std::span<const double> score, double floor,
                             std::size_t min_separation) {
  std::vector<Peak> cand;
  const std::size_t n = score.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (score[i] < floor) continue;
    const double left = i > 0 ? score[i - 1] : -1.0;
    const double right = i + 1 < n ? score[i + 1] : -1.0;
    if (score[i] >= left && score[i] >= right) cand.push_back({i, score[i]});
  }
  // Strongest-first non-maximum suppression.
  std::stable_sort(cand.begin(), cand.end(),
                   [](const Peak& a, const Peak& b) { return a.score > b.score; });
  std::vector<Peak> kept;
  for (const Peak& p : cand) {
    bool ok = true;
    for (const Peak& q : kept) {
      const std::size_t d = p.index > q.index ? p.index - q.index : q.index - p.index;
      if (d < min_separation) {
        ok = false;
        break;
      }
    }
    if (ok) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end(),
            [](const Peak& a, const Peak& b) { return a.index < b.index; });
  return kept;
}

double interp_linear(std::span<const double> xs, std::span<const double> ys,
                     double x) {
  if (xs.empty() || xs.size() != ys.size()) {
    throw std::invalid_argument("interp_linear: bad grids");
  }
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

}  // namespace metablue::dsp
