#include "metablue/frame_codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metablue/dsp.hpp"
#include "metablue/errors.hpp"

namespace metablue {

double AnchorFrame::total_duration() const {
  return preamble.duration + 8.0 * bit_duration + guard;
}

void AnchorFrame::validate() const {
  if (anchor_id < 0 || anchor_id > 127) {
    throw ConfigError("AnchorFrame: anchor_id must be in [0, 127]");
  }
  preamble.validate();
  if (bit_duration <= 0.0 || guard < 0.0) {
    throw ConfigError("AnchorFrame: bad bit_duration or guard");
  }
}

bool frame_parity_bit(int anchor_id) {
  int ones = 0;
  for (int b = 0; b < 7; ++b) ones += (anchor_id >> b) & 1;
  return (ones % 2) != 0;  // makes the total number of ones even
}

std::vector<int> frame_bits(int anchor_id) {
  std::vector<int> bits(8);
  for (int b = 0; b < 7; ++b) bits[b] = (anchor_id >> (6 - b)) & 1;
  bits[7] = frame_parity_bit(anchor_id) ? 1 : 0;
  return bits;
}

std::vector<double> fm0_levels(std::span<const int> bits,
                               std::size_t samples_per_bit, double amplitude) {
  if (samples_per_bit % 2 != 0) {
    throw std::invalid_argument("fm0_levels: samples_per_bit must be even");
  }
  std::vector<double> out;
  out.reserve(bits.size() * samples_per_bit);
  double level = amplitude;
  for (int bit : bits) {
    level = -level;  // boundary transition
    for (std::size_t i = 0; i < samples_per_bit / 2; ++i) out.push_back(level);
    if (bit == 0) level = -level;  // mid-bit transition encodes 0
    for (std::size_t i = 0; i < samples_per_bit / 2; ++i) out.push_back(level);
  }
  return out;
}

std::vector<double> encode_frame(const AnchorFrame& frame) {
  frame.validate();
  const double fs = frame.preamble.sample_rate;
  const auto region = [&](double seconds) {
    return static_cast<std::size_t>(std::llround(seconds * fs));
  };
  const std::size_t n_pre = region(frame.preamble.duration);
  const std::size_t n_bit = region(frame.bit_duration);
  const std::size_t n_guard = region(frame.guard);

  std::vector<double> out(n_pre + 8 * n_bit + n_guard, 0.0);
  const std::vector<double> chirp = synth_chirp(frame.preamble);
  for (std::size_t i = 0; i < std::min(n_pre, chirp.size()); ++i) out[i] = chirp[i];

  const std::vector<int> bits = frame_bits(frame.anchor_id);
  std::size_t spb = n_bit;
  if (spb % 2 != 0) --spb;
  const std::vector<double> levels =
      fm0_levels(bits, spb, frame.preamble.amplitude);
  for (std::size_t b = 0; b < 8; ++b) {
    for (std::size_t i = 0; i < spb; ++i) {
      out[n_pre + b * n_bit + i] = levels[b * spb + i];
    }
  }
  return out;
}

FrameDecode decode_frame(std::span<const double> samples,
                         const AnchorFrame& spec, double threshold_ratio) {
  AnchorFrame probe = spec;
  probe.anchor_id = 0;
  probe.validate();
  const double fs = probe.preamble.sample_rate;
  const std::size_t n_pre =
      static_cast<std::size_t>(std::llround(probe.preamble.duration * fs));
  const std::size_t n_bit =
      static_cast<std::size_t>(std::llround(probe.bit_duration * fs));
  const std::size_t frame_len = n_pre + 8 * n_bit;
  if (samples.size() < frame_len) {
    throw NotFoundError("decode_frame: capture shorter than one frame");
  }

  const std::vector<double> ref = synth_chirp_reference(probe.preamble);
  const std::vector<double> score = dsp::normalized_xcorr(samples, ref);
  std::vector<double> sorted(score.begin(), score.end());
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double median = sorted[sorted.size() / 2];
  // Cap the threshold so a capture that is mostly signal still decodes.
  const double threshold = std::min(threshold_ratio * median, 0.8);

  std::size_t best = 0;
  for (std::size_t i = 1; i < score.size(); ++i) {
    if (score[i] > score[best]) best = i;
  }
  if (score[best] < threshold || score[best] <= 0.0) {
    throw NotFoundError("decode_frame: no preamble above threshold");
  }
  if (best + frame_len > samples.size()) {
    throw NotFoundError("decode_frame: frame truncated at capture end");
  }

  std::vector<int> bits(8);
  for (std::size_t b = 0; b < 8; ++b) {
    const std::size_t start = best + n_pre + b * n_bit;
    const std::size_t half = n_bit / 2;
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 0; i < half; ++i) m1 += samples[start + i];
    for (std::size_t i = half; i < n_bit; ++i) m2 += samples[start + i];
    bits[b] = (m1 * m2 < 0.0) ? 0 : 1;  // mid-bit transition means 0
  }

  int id = 0;
  for (std::size_t b = 0; b < 7; ++b) id = (id << 1) | bits[b];
  if ((frame_parity_bit(id) ? 1 : 0) != bits[7]) {
    throw CorruptFrameError("decode_frame: parity mismatch for id " +
                            std::to_string(id));
  }
  return FrameDecode{id, best, score[best]};
}

}  // namespace metablue
