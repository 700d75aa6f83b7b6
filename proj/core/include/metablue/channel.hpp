#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "metablue/ams_model.hpp"
#include "metablue/common.hpp"
#include "metablue/frame_codec.hpp"
#include "metablue/waveform.hpp"

namespace metablue {

/// Vertical-plane water column: surface at z = 0, bottom at z = depth,
/// z measured downward in meters.
struct WaterGeometry {
  double depth = 10.0;
  double sound_speed = kSoundSpeedWater;

  void validate() const;
};

/// Optional rectangular-tank walls for tank-scale tests.
struct TankWalls {
  double x_min = 0.0, x_max = 2.0;
  double y_min = 0.0, y_max = 1.5;
  double coeff = 0.8;
};

struct PathArrival {
  double delay = 0.0;      ///< s
  double amplitude = 0.0;  ///< includes spreading and reflection signs
  int surface_bounces = 0;
  int bottom_bounces = 0;
  int wall_bounces = 0;

  bool is_los() const {
    return surface_bounces == 0 && bottom_bounces == 0 && wall_bounces == 0;
  }
  std::string type_label() const;
};

/// Image-source enumeration of surface/bottom (and optionally wall)
/// reflections up to max_reflections total bounces, sorted by delay. The
/// zero-bounce entry is the LOS path. Amplitude is reflection coefficients
/// over 1/path_length spreading.
std::vector<PathArrival> path_set(const Vec3& tx, const Vec3& rx,
                                  const WaterGeometry& geom,
                                  int max_reflections,
                                  const std::optional<TankWalls>& walls = {},
                                  double surface_coeff = -1.0,
                                  double bottom_coeff = 0.8);

/// Minimum LOS-NLOS time difference per (rx depth, horizontal range) cell,
/// seconds; row-major by depth.
std::vector<std::vector<double>> min_tdoa_map(const WaterGeometry& geom,
                                              const Vec3& tx,
                                              std::span<const double> rx_depths,
                                              std::span<const double> ranges,
                                              int max_reflections = 3);

struct TimedPosition {
  double t = 0.0;
  Vec3 position;
};

struct AnchorPlacement {
  Vec3 position;
  double orientation = 0.0;  ///< radians, azimuth of the surface's zero angle
  MetasurfaceConfig surface;
};

/// Everything one simulated experiment needs: geometry, anchors, the
/// receiver path, the probing signal, and channel/noise knobs.
struct ScenarioConfig {
  WaterGeometry geometry;
  std::vector<AnchorPlacement> anchors;
  std::vector<TimedPosition> receiver_path;
  ChirpSpec chirp;
  std::optional<double> noise_snr_db;  ///< empty = noiseless
  double em_atten_db = 8.0;
  int max_reflections = 2;
  std::uint64_t seed = 1;
  bool tdma_enabled = true;
  double tdma_slot = 0.0;  ///< s; 0 means one probe duration per slot
  bool elevation_shaping = true;
  bool ams_enabled = true;
  double surface_coeff = -1.0;
  double bottom_coeff = 0.8;
  std::optional<TankWalls> walls;
  std::size_t table_freq_bins = 101;

  void validate() const;
};

struct AnchorTruth {
  int anchor_id = 0;
  double slot_start = 0.0;  ///< s
  std::size_t slot_index = 0;
  double los_delay = 0.0;  ///< s
  double bearing_world = 0.0;
  double bearing_relative = 0.0;
  double elevation = 0.0;
  double slant_range = 0.0;
};

/// Ground truth carried alongside a capture for evaluation only. Estimators
/// take raw sample spans and never see this block.
struct CaptureTruth {
  Vec3 rx_position;
  std::vector<AnchorTruth> anchors;
};

struct RxCapture {
  std::vector<double> samples;
  double sample_rate = 0.0;
  std::size_t em_marker_index = 0;
  bool collision = false;
  CaptureTruth truth;
};

/// Cached per-anchor model: the horizontal-plane gain table over the probe
/// band, plus the surface itself for vertical-plane evaluation.
struct AnchorModel {
  int anchor_id = 0;
  Vec3 position;
  double orientation = 0.0;
  bool isotropic = false;  ///< bare transducer, no directional shaping
  MetasurfaceConfig surface;
  DirectionalGainTable azimuth;
};

/// A scenario with its anchor models built once (gain table construction is
/// the expensive part).
struct ScenarioRuntime {
  ScenarioConfig config;
  std::vector<AnchorModel> anchors;

  static ScenarioRuntime build(const ScenarioConfig& cfg);
};

using ProbeSignal = std::variant<ChirpSpec, AnchorFrame>;

/// Drive waveform after the anchor's directional shaping, zero-padded by one
/// chirp length so the cell transit delays stay inside the vector.
std::vector<double> shape_probe(const AnchorModel& anchor,
                                std::span<const double> drive, double fs,
                                double bearing_relative, double elevation,
                                bool use_elevation);

/// Adds `shaped` once per path, scaled by the path amplitude and delayed by
/// round(delay * fs), into a vector of length out_len starting at offset.
std::vector<double> render_paths(std::span<const double> shaped,
                                 std::span<const PathArrival> paths, double fs,
                                 std::size_t out_len, std::size_t offset = 0);

/// Simulates one receiver capture: per anchor, the probe is shaped by the
/// anchor's directional gain at the receiver bearing (and elevation when
/// enabled), convolved with the image-source channel, and summed per the
/// TDMA schedule together with the EM leakage copy at each slot start.
/// Seeded white noise is added last when configured.
RxCapture simulate_capture(const ScenarioRuntime& rt, std::size_t rx_index,
                           const ProbeSignal& probe);

/// Same, for a receiver position not on the configured path. noise_seed_tag
/// keeps noise draws distinct between unrelated captures at equal positions.
RxCapture simulate_capture_at(const ScenarioRuntime& rt, const Vec3& rx,
                              const ProbeSignal& probe,
                              const std::string& noise_seed_tag = "");

/// Runtime restricted to a single anchor (models are copied, not rebuilt).
ScenarioRuntime single_anchor_view(const ScenarioRuntime& rt,
                                   std::size_t anchor_index);

/// Convenience overload that builds the runtime internally.
RxCapture simulate_capture(const ScenarioConfig& cfg, std::size_t rx_index,
                           const ProbeSignal& probe);

}  // namespace metablue
