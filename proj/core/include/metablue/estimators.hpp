#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metablue/channel.hpp"
#include "metablue/receiver_dsp.hpp"

namespace metablue {

enum class TemplatePlane { Azimuth, Elevation };
enum class FeatureMode { Suppressed, RawSpectrum };

struct TemplateEntry {
  double angle = 0.0;  ///< radians, anchor-relative
  std::vector<double> feature;
};

/// Pre-calibrated library of directional features, one entry per angle.
struct TemplateLibrary {
  std::vector<TemplateEntry> entries;  ///< sorted by angle, unit-norm features
  int anchor_id = 0;
  TemplatePlane plane = TemplatePlane::Azimuth;
  std::vector<double> calibration_ranges;  ///< m
  std::vector<double> grid_freqs;          ///< Hz, shared feature grid

  void validate() const;
};

struct TemplateBuildOptions {
  FeatureMode mode = FeatureMode::Suppressed;
  SuppressionParams suppression;
  double score_floor = 0.3;
  /// Anchor-relative azimuth of the vertical arc used for elevation-plane
  /// calibration.
  double elevation_azimuth = 0.0;
};

/// Simulates a noiseless calibration capture per (grid angle, range),
/// extracts the feature, averages across ranges, and L2-normalizes.
/// Azimuth-plane entries place the receiver at the anchor depth; elevation
/// entries on a vertical arc at elevation_azimuth. Angles whose calibration
/// point would leave the water column are skipped.
TemplateLibrary build_templates(const ScenarioRuntime& rt, int anchor_id,
                                std::span<const double> angle_grid,
                                std::span<const double> calibration_ranges,
                                TemplatePlane plane,
                                const TemplateBuildOptions& options);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct AoaEstimate {
  double angle = 0.0;  ///< radians, anchor-relative
  double score = 0.0;
  std::vector<std::pair<double, double>> alternatives;  ///< top (angle, score)
};

/// Library angle with the highest cosine similarity to the query feature;
/// ties break toward the smaller angle. Alternatives list the top 5.
AoaEstimate estimate_aoa(const EnvelopeFeature& feature,
                         const TemplateLibrary& lib);

/// estimate_aoa against an elevation-plane library.
AoaEstimate estimate_elevation(const EnvelopeFeature& feature,
                               const TemplateLibrary& lib);

/// Depth from elevation-template matching: z = anchor.z + h * tan(elevation).
double estimate_depth(const EnvelopeFeature& feature,
                      const TemplateLibrary& elevation_lib, const Vec3& anchor,
                      double horizontal_range);

/// EM-acoustic ranging: sound_speed times the delay between the earliest
/// correlation peak (the EM leakage) and the next peak (the acoustic LOS
/// arrival). A single merged peak reads as zero distance.
double estimate_range(std::span<const double> samples, double sample_rate,
                      const ChirpSpec& spec,
                      double sound_speed = kSoundSpeedWater,
                      double score_floor = 0.3);

/// Per-anchor measurement: bearing, slant range, depth, and the derived
/// horizontal range, with matching confidences as weights.
struct AnchorMeasurement {
  int anchor_id = 0;
  double bearing = 0.0;           ///< world azimuth, radians
  double range = 0.0;             ///< slant, m
  double depth = 0.0;             ///< m
  double horizontal_range = 0.0;  ///< m
  double w_ang = 1.0;
  double w_rng = 1.0;
  double w_dep = 1.0;
};

struct MeasureOptions {
  FeatureMode mode = FeatureMode::Suppressed;
  SuppressionParams suppression;
  double score_floor = 0.3;
  double sound_speed = kSoundSpeedWater;
  /// When set, the surface's transit delay at the estimated direction
  /// (matched-filter offset of the shaped reference against the plain chirp)
  /// is subtracted from the EM-acoustic range.
  const AnchorModel* transit_reference = nullptr;
  bool transit_use_elevation = true;
  /// Water-column depth; when set, depth estimates clamp into [0, value]
  /// and the horizontal range is kept consistent with the slant range.
  std::optional<double> depth_clamp;
};

/// Full single-anchor measurement pipeline on one capture slice: EM-acoustic
/// ranging, onset-aligned feature extraction, azimuth and elevation matching.
AnchorMeasurement measure_anchor(std::span<const double> samples,
                                 double sample_rate, const ChirpSpec& chirp,
                                 const Vec3& anchor_position,
                                 double anchor_orientation,
                                 const TemplateLibrary& azimuth_lib,
                                 const TemplateLibrary& elevation_lib,
                                 const MeasureOptions& options);

/// Same pipeline, but the elevation library is chosen after the bearing is
/// known. The provider receives the estimated anchor-relative bearing, so
/// callers can hand back a library calibrated on (or near) that azimuth.
using ElevationLibraryProvider =
    std::function<const TemplateLibrary&(double bearing_relative)>;

AnchorMeasurement measure_anchor(std::span<const double> samples,
                                 double sample_rate, const ChirpSpec& chirp,
                                 const Vec3& anchor_position,
                                 double anchor_orientation,
                                 const TemplateLibrary& azimuth_lib,
                                 const ElevationLibraryProvider& elevation_libs,
                                 const MeasureOptions& options);

}  // namespace metablue
