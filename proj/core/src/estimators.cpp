#include "metablue/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metablue/dsp.hpp"
#include "metablue/errors.hpp"

namespace metablue {

void TemplateLibrary::validate() const {
  if (entries.size() < 8) {
    throw std::invalid_argument(
        "TemplateLibrary: need at least 8 entries for meaningful matching");
  }
  const std::size_t len = entries.front().feature.size();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].feature.size() != len) {
      throw std::invalid_argument("TemplateLibrary: ragged feature vectors");
    }
    if (i > 0 && entries[i].angle <= entries[i - 1].angle) {
      throw std::invalid_argument("TemplateLibrary: angles must be unique and sorted");
    }
  }
}

namespace {

EnvelopeFeature extract_feature(std::span<const double> samples,
                                const ChirpSpec& chirp, FeatureMode mode,
                                const SuppressionParams& params,
                                double score_floor) {
  const auto peaks = correlation_peaks(samples, chirp, score_floor);
  if (peaks.empty()) {
    throw NotFoundError("extract_feature: no chirp found in capture");
  }
  // The earliest peak is the EM leakage copy; the acoustic arrival is the
  // strongest later peak (or the same peak at zero range).
  const DetectResult em = peaks.front();
  // The acoustic LOS is the first arrival after the leakage copy.
  const DetectResult onset = peaks.size() > 1 ? peaks[1] : em;
  const std::size_t n = synth_chirp_reference(chirp).size();
  const std::size_t end = std::min(samples.size(), onset.index + n);
  const auto segment = samples.subspan(onset.index, end - onset.index);
  return mode == FeatureMode::Suppressed
             ? suppress_multipath(segment, chirp, params)
             : raw_spectrum_feature(segment, chirp, params);
}

}  // namespace

TemplateLibrary build_templates(const ScenarioRuntime& rt, int anchor_id,
                                std::span<const double> angle_grid,
                                std::span<const double> calibration_ranges,
                                TemplatePlane plane,
                                const TemplateBuildOptions& options) {
  if (angle_grid.empty()) {
    throw std::invalid_argument("build_templates: empty angle grid");
  }
  if (calibration_ranges.empty()) {
    throw std::invalid_argument("build_templates: no calibration ranges");
  }
  if (anchor_id < 0 || static_cast<std::size_t>(anchor_id) >= rt.anchors.size()) {
    throw std::invalid_argument("build_templates: bad anchor id");
  }
  ScenarioRuntime solo = single_anchor_view(rt, static_cast<std::size_t>(anchor_id));
  solo.config.noise_snr_db.reset();  // calibration captures are clean

  const AnchorModel& anchor = solo.anchors.front();
  const double depth = solo.config.geometry.depth;

  TemplateLibrary lib;
  lib.anchor_id = anchor_id;
  lib.plane = plane;
  lib.calibration_ranges.assign(calibration_ranges.begin(),
                                calibration_ranges.end());

  std::vector<TemplateEntry> entries(angle_grid.size());
  std::vector<std::vector<double>> grids(angle_grid.size());
  std::vector<char> keep(angle_grid.size(), 0);
  std::vector<std::string> errors(angle_grid.size());
  parallel_for(angle_grid.size(), [&](std::size_t gi) {
    const double angle = angle_grid[gi];
    std::vector<double> mean;
    std::size_t used = 0;
    for (double range : calibration_ranges) {
      Vec3 rx;
      if (plane == TemplatePlane::Azimuth) {
        const double world = angle + anchor.orientation;
        rx = anchor.position +
             Vec3{range * std::cos(world), range * std::sin(world), 0.0};
      } else {
        const double world = options.elevation_azimuth + anchor.orientation;
        const double h = range * std::cos(angle);
        rx = anchor.position + Vec3{h * std::cos(world), h * std::sin(world),
                                    range * std::sin(angle)};
      }
      if (rx.z < 0.0 || rx.z > depth) continue;
      try {
        const RxCapture cap = simulate_capture_at(solo, rx, solo.config.chirp);
        const EnvelopeFeature f =
            extract_feature(cap.samples, solo.config.chirp, options.mode,
                            options.suppression, options.score_floor);
        if (mean.empty()) {
          mean = f.resampled_spectrum;
          grids[gi] = f.grid_freqs;
        } else {
          for (std::size_t i = 0; i < mean.size(); ++i) {
            mean[i] += f.resampled_spectrum[i];
          }
        }
        ++used;
      } catch (const std::exception& e) {
        errors[gi] = "angle " + std::to_string(angle) + " rad: " + e.what();
        return;
      }
    }
    if (used == 0) return;  // entirely outside the water column: skip
    double energy = 0.0;
    for (double& v : mean) {
      v /= static_cast<double>(used);
      energy += v * v;
    }
    const double norm = std::sqrt(energy);
    if (norm == 0.0) {
      errors[gi] = "angle " + std::to_string(angle) + " rad: zero feature";
      return;
    }
    for (double& v : mean) v /= norm;
    entries[gi] = TemplateEntry{angle, std::move(mean)};
    keep[gi] = 1;
  });

  for (const auto& e : errors) {
    if (!e.empty()) {
      throw std::runtime_error("build_templates: " + e);
    }
  }
  for (std::size_t gi = 0; gi < entries.size(); ++gi) {
    if (keep[gi]) {
      if (lib.grid_freqs.empty()) lib.grid_freqs = std::move(grids[gi]);
      lib.entries.push_back(std::move(entries[gi]));
    }
  }
  lib.validate();
  return lib;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("cosine_similarity: size mismatch");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw std::invalid_argument("cosine_similarity: zero vector");
  }
  return dot / std::sqrt(na * nb);
}

namespace {

AoaEstimate match_library(const EnvelopeFeature& feature,
                          const TemplateLibrary& lib) {
  lib.validate();
  if (feature.resampled_spectrum.size() != lib.entries.front().feature.size()) {
    throw std::invalid_argument("estimate: feature grid does not match library");
  }
  double energy = 0.0;
  for (double v : feature.resampled_spectrum) energy += v * v;
  if (energy == 0.0) {
    throw std::invalid_argument("estimate: degenerate zero feature");
  }

  AoaEstimate out;
  std::vector<std::pair<double, double>> scored;  // (angle, score)
  scored.reserve(lib.entries.size());
  double best = -2.0;
  for (const auto& e : lib.entries) {  // ascending angle: ties keep the smaller
    const double s = cosine_similarity(feature.resampled_spectrum, e.feature);
    scored.emplace_back(e.angle, s);
    if (s > best) {
      best = s;
      out.angle = e.angle;
    }
  }
  out.score = best;
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  scored.resize(std::min<std::size_t>(5, scored.size()));
  out.alternatives = std::move(scored);
  return out;
}

}  // namespace

AoaEstimate estimate_aoa(const EnvelopeFeature& feature,
                         const TemplateLibrary& lib) {
  return match_library(feature, lib);
}

AoaEstimate estimate_elevation(const EnvelopeFeature& feature,
                               const TemplateLibrary& lib) {
  if (lib.plane != TemplatePlane::Elevation) {
    throw std::invalid_argument("estimate_elevation: library is not elevation-plane");
  }
  return match_library(feature, lib);
}

double estimate_depth(const EnvelopeFeature& feature,
                      const TemplateLibrary& elevation_lib, const Vec3& anchor,
                      double horizontal_range) {
  const AoaEstimate e = estimate_elevation(feature, elevation_lib);
  return anchor.z + horizontal_range * std::tan(e.angle);
}

double estimate_range(std::span<const double> samples, double sample_rate,
                      const ChirpSpec& spec, double sound_speed,
                      double score_floor) {
  std::vector<DetectResult> peaks;
  try {
    peaks = correlation_peaks(samples, spec, score_floor);
  } catch (const NotFoundError& e) {
    throw RangingError(std::string("estimate_range: ") + e.what());
  }
  if (peaks.empty()) {
    throw RangingError("estimate_range: neither EM nor acoustic peak found");
  }
  const DetectResult em = peaks.front();
  if (peaks.size() == 1) return 0.0;  // merged EM/acoustic at zero range
  const DetectResult acoustic = peaks[1];
  const double dt =
      static_cast<double>(acoustic.index - em.index) / sample_rate;
  return sound_speed * dt;
}

AnchorMeasurement measure_anchor(std::span<const double> samples,
                                 double sample_rate, const ChirpSpec& chirp,
                                 const Vec3& anchor_position,
                                 double anchor_orientation,
                                 const TemplateLibrary& azimuth_lib,
                                 const ElevationLibraryProvider& elevation_libs,
                                 const MeasureOptions& options) {
  const auto peaks = correlation_peaks(samples, chirp, options.score_floor);
  if (peaks.empty()) {
    throw NotFoundError("measure_anchor: no chirp found");
  }
  const DetectResult em = peaks.front();
  const DetectResult acoustic = peaks.size() > 1 ? peaks[1] : em;

  const std::size_t n = synth_chirp_reference(chirp).size();
  const std::size_t end = std::min(samples.size(), acoustic.index + n);
  const auto segment = samples.subspan(acoustic.index, end - acoustic.index);
  const EnvelopeFeature feature =
      options.mode == FeatureMode::Suppressed
          ? suppress_multipath(segment, chirp, options.suppression)
          : raw_spectrum_feature(segment, chirp, options.suppression);

  const AoaEstimate aoa = estimate_aoa(feature, azimuth_lib);
  const AoaEstimate elev =
      estimate_elevation(feature, elevation_libs(aoa.angle));

  double offset = static_cast<double>(acoustic.index - em.index);
  if (options.transit_reference != nullptr) {
    const std::vector<double> ref = synth_chirp_reference(chirp);
    const std::vector<double> shaped =
        shape_probe(*options.transit_reference, ref, sample_rate, aoa.angle,
                    elev.angle, options.transit_use_elevation);
    const std::vector<double> score = dsp::normalized_xcorr(shaped, ref);
    std::size_t best = 0;
    for (std::size_t i = 1; i < score.size(); ++i) {
      if (score[i] > score[best]) best = i;
    }
    offset = std::max(0.0, offset - static_cast<double>(best));
  }
  const double range = options.sound_speed * offset / sample_rate;

  AnchorMeasurement m;
  m.anchor_id = azimuth_lib.anchor_id;
  m.bearing = wrap_angle(aoa.angle + anchor_orientation);
  m.range = range;
  double dz = range * std::sin(elev.angle);
  if (options.depth_clamp) {
    const double z =
        std::clamp(anchor_position.z + dz, 0.0, *options.depth_clamp);
    dz = std::clamp(z - anchor_position.z, -range, range);
  }
  m.depth = anchor_position.z + dz;
  m.horizontal_range = std::sqrt(std::max(0.0, range * range - dz * dz));
  m.w_ang = std::max(0.0, aoa.score);
  m.w_rng = acoustic.score;
  m.w_dep = std::max(0.0, elev.score);
  return m;
}

AnchorMeasurement measure_anchor(std::span<const double> samples,
                                 double sample_rate, const ChirpSpec& chirp,
                                 const Vec3& anchor_position,
                                 double anchor_orientation,
                                 const TemplateLibrary& azimuth_lib,
                                 const TemplateLibrary& elevation_lib,
                                 const MeasureOptions& options) {
  return measure_anchor(
      samples, sample_rate, chirp, anchor_position, anchor_orientation,
      azimuth_lib,
      [&](double) -> const TemplateLibrary& { return elevation_lib; }, options);
}

}  // namespace metablue
