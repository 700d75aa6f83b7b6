#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "metablue/waveform.hpp"

namespace metablue {

/// One TDMA anchor frame: preamble chirp, 8 FM0-coded bits (7-bit id plus
/// even parity), and a guard interval of silence. Defaults give a 2.2 ms
/// frame: 0.4 ms preamble + 8 x 0.2 ms bits + 0.2 ms guard.
struct AnchorFrame {
  int anchor_id = 0;  ///< 0..127
  ChirpSpec preamble{1.0, 125e3, 125e3, 0.4e-3, 2e6};
  double bit_duration = 0.2e-3;  ///< s
  double guard = 0.2e-3;         ///< s

  double total_duration() const;
  void validate() const;
};

/// Even parity over the 7 id bits.
bool frame_parity_bit(int anchor_id);

/// The 8 payload bits of a frame, id MSB first then the parity bit.
std::vector<int> frame_bits(int anchor_id);

/// FM0 baseband levels for a bit stream: the level inverts at every bit
/// boundary, and a data 0 adds a mid-bit inversion. samples_per_bit must be
/// even.
std::vector<double> fm0_levels(std::span<const int> bits,
                               std::size_t samples_per_bit, double amplitude);

/// Preamble + FM0 payload + guard as one sample vector.
std::vector<double> encode_frame(const AnchorFrame& frame);

struct FrameDecode {
  int anchor_id = 0;
  std::size_t preamble_index = 0;
  double correlation_score = 0.0;
};

/// Locates the preamble by matched correlation (threshold: correlation at
/// least threshold_ratio times the median absolute correlation), slices the
/// bit windows, recovers the id, and verifies parity.
FrameDecode decode_frame(std::span<const double> samples,
                         const AnchorFrame& spec, double threshold_ratio = 5.0);

}  // namespace metablue
