#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metablue/channel.hpp"
#include "metablue/estimators.hpp"
#include "metablue/localizer.hpp"

namespace metablue {

struct DistanceBin {
  double lo = 1.0;
  double hi = 3.0;  ///< m, horizontal range to the first anchor
};

/// Sweep axes mirroring the evaluation matrix: per-cell the pipeline runs
/// with one value from each axis.
struct SweepAxes {
  std::vector<DistanceBin> distance_bins;
  std::vector<double> snr_db;
  std::vector<int> anchor_counts;
  std::vector<bool> suppression{true};
  std::vector<bool> ams{true};
};

/// Calibration and matching knobs shared by all cells.
struct EstimationSetup {
  double template_pitch_deg = 1.0;
  std::vector<double> calibration_ranges{1.0, 3.0};
  double elevation_pitch_deg = 2.5;
  double elevation_span_deg = 20.0;    ///< +- around the horizontal
  double elevation_bucket_deg = 2.0;  ///< azimuth bucket width for
                                      ///< elevation libraries
  SuppressionParams suppression;
  double score_floor = 0.1;
};

struct ExperimentSpec {
  ScenarioConfig scenario;
  SweepAxes axes;
  int trials = 1;
  std::uint64_t seed = 1;
  std::string output_dir;  ///< empty = do not write files
  EstimationSetup estimation;
  double rx_depth_min = 0.0;  ///< 0 auto: 20% of the water column
  double rx_depth_max = 0.0;  ///< 0 auto: 80% of the water column

  void validate() const;
};

struct StatSummary {
  double p50 = 0.0;
  double p75 = 0.0;
  double p90 = 0.0;
  std::vector<double> sorted;  ///< all samples ascending, the CDF support

  static StatSummary from_samples(std::vector<double> samples);
};

/// Elevation libraries conditioned on the estimated bearing, built lazily
/// and cached per azimuth bucket. Builds are deterministic, so caching
/// cannot change results.
class ElevationLibraryCache {
 public:
  ElevationLibraryCache(const ScenarioRuntime& rt, int anchor_id,
                        const EstimationSetup& setup, FeatureMode mode);
  ~ElevationLibraryCache();
  ElevationLibraryCache(ElevationLibraryCache&&) noexcept;

  const TemplateLibrary& at_bearing(double bearing_relative);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct CellMetrics {
  std::string key;
  DistanceBin distance;
  double snr_db = 0.0;
  int anchor_count = 0;
  bool suppression = true;
  bool ams = true;
  int ok = 0;
  int failed = 0;
  StatSummary aoa_deg;
  StatSummary range_m;
  StatSummary depth_m;
  StatSummary p3d_m;
};

struct MetricsReport {
  std::uint64_t seed = 0;
  int trials = 0;
  std::vector<CellMetrics> cells;
};

/// solve_wnls with residual-based outlier trimming: while at least three
/// measurements remain and the worst per-anchor residual exceeds three times
/// the median residual, that anchor is dropped and the solve repeats. Guards
/// multi-anchor fixes against occasional template-matching flips.
PositionEstimate solve_wnls_trimmed(
    std::vector<AnchorMeasurement> measurements, std::vector<Vec3> anchors,
    const SolverWeights& weights = {});

/// Runs the full pipeline for every cell x trial with per-cell derived
/// seeds, aggregates error percentiles and CDFs, and (when output_dir is
/// set) writes report.json plus CDF CSVs. Fully deterministic for one spec.
MetricsReport run_experiment(const ExperimentSpec& spec);

enum class PlotKind { Cdf, ErrorVsDistance };

/// Writes plot-ready CSVs into dir: per-cell CDFs (value, probability) or
/// per-metric error-vs-distance tables (distance, statistic, value).
void export_plotdata(const MetricsReport& report, PlotKind kind,
                     const std::string& dir);

/// report.json payload (also what run_experiment writes).
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& json);

/// ExperimentSpec JSON (scenario may be inline or a "scenario_file" path
/// resolved relative to the working directory).
ExperimentSpec experiment_from_json(const std::string& json);

}  // namespace metablue
