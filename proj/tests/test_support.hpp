#pragma once

// Shared builders for simulation-backed tests. Scenario values here are the
// desk-scale defaults the suites run against; individual tests override what
// they need.

#include <vector>

#include "metablue/channel.hpp"
#include "metablue/common.hpp"
#include "metablue/receiver_dsp.hpp"

namespace testsupport {

using namespace metablue;

inline MaterialPair pla_water() {
  return MaterialPair{1939.4, 1500.0, 3.72e-8, 1.39};
}

/// A diversity-rich surface: N cells with deterministic pseudo-random solid
/// lengths in [0, 3.3 cm].
inline MetasurfaceConfig test_surface(std::size_t n = 60,
                                      std::uint64_t seed = 7) {
  MetasurfaceConfig cfg =
      MetasurfaceConfig::uniform(n, 0.033, 0.048, pla_water());
  Rng rng(seed);
  for (auto& c : cfg.cells) c.solid_len = rng.uniform(0.0, 0.033);
  return cfg;
}

/// Wideband probing chirp used throughout the receiver tests.
inline ChirpSpec default_chirp() {
  ChirpSpec c;
  c.amplitude = 1.0;
  c.f0 = 125e3;
  c.bandwidth = 250e3;
  c.duration = 0.2e-3;
  c.sample_rate = 2e6;
  return c;
}

inline SuppressionParams default_suppression() {
  SuppressionParams p;
  p.f_cut = 45e3;
  p.t_min = 0.04e-3;  // k * t_min = 50 kHz with the default chirp
  p.filter_taps = 255;
  p.grid_bins = 101;
  return p;
}

/// Deep-water single-anchor scenario: multipath arrives far outside the
/// chirp, so captures are effectively LOS-only.
inline ScenarioConfig deep_scenario() {
  ScenarioConfig cfg;
  cfg.geometry.depth = 100.0;
  cfg.anchors.push_back({Vec3{0.0, 0.0, 50.0}, 0.0, test_surface()});
  cfg.receiver_path.push_back({0.0, Vec3{20.0, 0.0, 50.0}});
  cfg.chirp = default_chirp();
  cfg.noise_snr_db.reset();
  cfg.em_atten_db = 8.0;
  cfg.max_reflections = 1;
  cfg.seed = 1;
  return cfg;
}

/// Shallow pool: one anchor, strong surface/bottom multipath.
inline ScenarioConfig pool_scenario() {
  ScenarioConfig cfg;
  cfg.geometry.depth = 1.5;
  cfg.anchors.push_back({Vec3{0.0, 0.0, 0.8}, 0.0, test_surface()});
  cfg.receiver_path.push_back({0.0, Vec3{3.0, 1.0, 0.6}});
  cfg.chirp = default_chirp();
  cfg.noise_snr_db.reset();
  cfg.max_reflections = 2;
  cfg.seed = 1;
  return cfg;
}

}  // namespace testsupport
