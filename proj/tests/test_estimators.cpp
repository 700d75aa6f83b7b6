#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "metablue/channel.hpp"
#include "metablue/errors.hpp"
#include "metablue/estimators.hpp"
#include "test_support.hpp"

using namespace metablue;
using doctest::Approx;

namespace {

std::vector<double> degree_grid(double start_deg, double stop_deg,
                                double step_deg) {
  std::vector<double> g;
  for (double d = start_deg; d <= stop_deg + 1e-9; d += step_deg) {
    g.push_back(wrap_angle(deg2rad(d)));
  }
  std::sort(g.begin(), g.end());
  return g;
}

TemplateBuildOptions default_build_options() {
  TemplateBuildOptions opts;
  opts.suppression = testsupport::default_suppression();
  return opts;
}

// Tank-scale single-anchor scenario for template matching tests.
ScenarioConfig matching_scenario() {
  ScenarioConfig cfg = testsupport::pool_scenario();
  cfg.geometry.depth = 2.0;
  cfg.anchors[0].position = Vec3{0.0, 0.0, 1.0};
  cfg.receiver_path[0].position = Vec3{0.5, 0.0, 1.0};
  return cfg;
}

double query_error_deg(const ScenarioRuntime& rt, const TemplateLibrary& lib,
                       double angle, double range,
                       const TemplateBuildOptions& opts) {
  const AnchorModel& anchor = rt.anchors.front();
  const Vec3 rx = anchor.position +
                  Vec3{range * std::cos(angle), range * std::sin(angle), 0.0};
  const RxCapture cap = simulate_capture_at(rt, rx, rt.config.chirp);
  const auto peaks =
      correlation_peaks(cap.samples, rt.config.chirp, opts.score_floor);
  REQUIRE(!peaks.empty());
  const std::size_t onset = peaks.size() > 1 ? peaks[1].index : peaks[0].index;
  const std::size_t n = rt.config.chirp.sample_count();
  const std::span<const double> seg(cap.samples.data() + onset,
                                    std::min(n, cap.samples.size() - onset));
  const EnvelopeFeature feat =
      opts.mode == FeatureMode::Suppressed
          ? suppress_multipath(seg, rt.config.chirp, opts.suppression)
          : raw_spectrum_feature(seg, rt.config.chirp, opts.suppression);
  const AoaEstimate est = estimate_aoa(feat, lib);
  return rad2deg(std::abs(wrap_angle(est.angle - angle)));
}

}  // namespace

TEST_CASE("template libraries are unit-norm and reproducible") {
  const ScenarioRuntime rt = ScenarioRuntime::build(matching_scenario());
  const auto grid = degree_grid(0.0, 350.0, 10.0);
  const std::vector<double> ranges{0.4, 0.7};
  const TemplateBuildOptions opts = default_build_options();
  const TemplateLibrary a =
      build_templates(rt, 0, grid, ranges, TemplatePlane::Azimuth, opts);
  REQUIRE(a.entries.size() == grid.size());
  for (const auto& e : a.entries) {
    double norm = 0.0;
    for (double v : e.feature) norm += v * v;
    CHECK(std::sqrt(norm) == Approx(1.0).epsilon(1e-9));
  }
  const TemplateLibrary b =
      build_templates(rt, 0, grid, ranges, TemplatePlane::Azimuth, opts);
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].angle == b.entries[i].angle);
    for (std::size_t k = 0; k < a.entries[i].feature.size(); ++k) {
      CHECK(a.entries[i].feature[k] == b.entries[i].feature[k]);
    }
  }
}

TEST_CASE("a library entry queries back to its own angle with score one") {
  const ScenarioRuntime rt = ScenarioRuntime::build(matching_scenario());
  const auto grid = degree_grid(0.0, 350.0, 10.0);
  const std::vector<double> ranges{0.5};
  const TemplateLibrary lib = build_templates(rt, 0, grid, ranges,
                                              TemplatePlane::Azimuth,
                                              default_build_options());
  EnvelopeFeature feat;
  feat.grid_freqs = lib.grid_freqs;
  feat.resampled_spectrum = lib.entries[7].feature;
  const AoaEstimate est = estimate_aoa(feat, lib);
  CHECK(est.angle == lib.entries[7].angle);
  CHECK(est.score == Approx(1.0).epsilon(1e-12));
  CHECK(est.alternatives.size() == 5);
  CHECK(est.alternatives.front().second >= est.alternatives.back().second);
}

TEST_CASE("ties break toward the smaller angle") {
  TemplateLibrary lib;
  lib.plane = TemplatePlane::Azimuth;
  lib.grid_freqs = linspace(100e3, 200e3, 4);
  const std::vector<double> f{0.5, 0.5, 0.5, 0.5};
  for (int i = 0; i < 9; ++i) {
    lib.entries.push_back({deg2rad(10.0 * i), f});
  }
  EnvelopeFeature feat;
  feat.grid_freqs = lib.grid_freqs;
  feat.resampled_spectrum = {1.0, 1.0, 1.0, 1.0};
  const AoaEstimate est = estimate_aoa(feat, lib);
  CHECK(est.angle == 0.0);
}

TEST_CASE("aoa estimation is invariant to positive feature scaling") {
  const ScenarioRuntime rt = ScenarioRuntime::build(matching_scenario());
  const auto grid = degree_grid(0.0, 350.0, 10.0);
  const TemplateLibrary lib =
      build_templates(rt, 0, grid, std::vector<double>{0.5},
                      TemplatePlane::Azimuth, default_build_options());
  EnvelopeFeature feat;
  feat.grid_freqs = lib.grid_freqs;
  feat.resampled_spectrum = lib.entries[3].feature;
  for (auto& v : feat.resampled_spectrum) v = 0.9 * v + 0.01;
  const AoaEstimate base = estimate_aoa(feat, lib);
  for (auto& v : feat.resampled_spectrum) v *= 123.0;
  const AoaEstimate scaled = estimate_aoa(feat, lib);
  CHECK(base.angle == scaled.angle);
  CHECK(base.score == Approx(scaled.score).epsilon(1e-12));

  EnvelopeFeature zero;
  zero.grid_freqs = lib.grid_freqs;
  zero.resampled_spectrum.assign(lib.grid_freqs.size(), 0.0);
  CHECK_THROWS_AS(estimate_aoa(zero, lib), std::invalid_argument);
}

TEST_CASE("cross-range closed loop: 5 deg queries on a 2.5 deg library") {
  const ScenarioRuntime rt = ScenarioRuntime::build(matching_scenario());
  const TemplateBuildOptions opts = default_build_options();
  const auto lib_grid = degree_grid(0.0, 357.5, 2.5);
  const std::vector<double> lib_ranges{0.4, 0.7};
  const TemplateLibrary lib = build_templates(rt, 0, lib_grid, lib_ranges,
                                              TemplatePlane::Azimuth, opts);
  REQUIRE(lib.entries.size() == 144);

  double total = 0.0;
  int count = 0;
  for (double range : {0.5, 0.6}) {
    for (double deg = 0.0; deg < 360.0; deg += 20.0) {
      total += query_error_deg(rt, lib, deg2rad(deg), range, opts);
      ++count;
    }
  }
  const double mae = total / count;
  CHECK(mae <= 2.5);
}

TEST_CASE("suppression beats the raw spectrum under overlapping multipath") {
  // Controlled two-path channel, NLOS delays drawn from the 55-80% overlap
  // band, queries on the calibration protocol's grid. Paired evaluation of
  // the suppressed pipeline against the raw-spectrum baseline.
  const ChirpSpec chirp = testsupport::default_chirp();
  MetasurfaceConfig surf = testsupport::test_surface(60, 7);
  AnchorModel anchor;
  anchor.surface = surf;
  anchor.azimuth =
      build_gain_table(surf, default_angle_grid(),
                       linspace(chirp.f0, chirp.f0 + chirp.bandwidth, 101));
  const auto drive = synth_chirp(chirp);
  const SuppressionParams sp = testsupport::default_suppression();

  auto feature_of = [&](std::span<const double> x, bool suppressed) {
    const auto peaks = correlation_peaks(x, chirp, 0.3);
    REQUIRE(!peaks.empty());
    const std::size_t onset =
        peaks.size() > 1 ? peaks[1].index : peaks[0].index;
    const std::size_t nn = chirp.sample_count();
    const std::span<const double> seg(x.data() + onset,
                                      std::min(nn, x.size() - onset));
    return suppressed ? suppress_multipath(seg, chirp, sp)
                      : raw_spectrum_feature(seg, chirp, sp);
  };
  auto clean_capture = [&](double a) {
    const auto sig =
        shape_probe(anchor, drive, chirp.sample_rate, a, 0.0, true);
    std::vector<double> cap(sig.size() + 400, 0.0);
    for (std::size_t i = 0; i < sig.size(); ++i) cap[200 + i] = sig[i];
    return cap;
  };

  TemplateLibrary lib_s, lib_r;
  lib_s.plane = lib_r.plane = TemplatePlane::Azimuth;
  auto normalize = [](std::vector<double> v) {
    double e = 0.0;
    for (double x : v) e += x * x;
    for (double& x : v) x /= std::sqrt(e);
    return v;
  };
  for (double d = 0.0; d < 360.0; d += 2.5) {
    const double a = wrap_angle(deg2rad(d));
    const auto cap = clean_capture(a);
    const auto fs = feature_of(cap, true);
    const auto fr = feature_of(cap, false);
    lib_s.entries.push_back({a, normalize(fs.resampled_spectrum)});
    lib_r.entries.push_back({a, normalize(fr.resampled_spectrum)});
    if (lib_s.grid_freqs.empty()) {
      lib_s.grid_freqs = fs.grid_freqs;
      lib_r.grid_freqs = fr.grid_freqs;
    }
  }
  auto by_angle = [](const TemplateEntry& a, const TemplateEntry& b) {
    return a.angle < b.angle;
  };
  std::sort(lib_s.entries.begin(), lib_s.entries.end(), by_angle);
  std::sort(lib_r.entries.begin(), lib_r.entries.end(), by_angle);

  double err_sup = 0.0, err_raw = 0.0;
  Rng trial(42);
  const int trials = 60;
  for (int t = 0; t < trials; ++t) {
    const double ang = deg2rad(5.0 * static_cast<double>(trial.index(72)));
    const double t1 = trial.uniform(0.04e-3, 0.09e-3);
    const double alpha =
        (trial.uniform() < 0.5 ? -1.0 : 1.0) * trial.uniform(0.6, 0.95);
    auto sig = shape_probe(anchor, drive, chirp.sample_rate, ang, 0.0, true);
    const std::vector<PathArrival> paths{{1e-4, 1.0, 0, 0, 0},
                                         {1e-4 + t1, alpha, 1, 0, 0}};
    auto rx = render_paths(sig, paths, chirp.sample_rate, sig.size() + 800);
    double p = 0.0;
    std::size_t support = 0;
    for (double v : rx) {
      if (v != 0.0) {
        p += v * v;
        ++support;
      }
    }
    const double sigma = std::sqrt(p / support * 0.01);  // 20 dB
    Rng nz(derive_seed(7, "mp" + std::to_string(t)));
    for (auto& v : rx) v += sigma * nz.gaussian();
    err_sup += rad2deg(std::abs(
        wrap_angle(estimate_aoa(feature_of(rx, true), lib_s).angle - ang)));
    err_raw += rad2deg(std::abs(
        wrap_angle(estimate_aoa(feature_of(rx, false), lib_r).angle - ang)));
  }
  CHECK(err_sup / trials < err_raw / trials);
}

TEST_CASE("depth from elevation matching follows the tangent geometry") {
  // Library entries at known elevations; a query equal to an entry recovers
  // that elevation exactly, so depth reduces to the tangent relation.
  TemplateLibrary lib;
  lib.plane = TemplatePlane::Elevation;
  lib.grid_freqs = linspace(125e3, 375e3, 8);
  Rng rng(8);
  for (int i = -5; i <= 5; ++i) {
    std::vector<double> f(8);
    for (auto& v : f) v = rng.uniform(0.1, 1.0);
    lib.entries.push_back({deg2rad(1.91) * i, f});
  }
  const Vec3 anchor{0.0, 0.0, 2.0};

  EnvelopeFeature q;
  q.grid_freqs = lib.grid_freqs;

  // 5.71 degrees: 0.3 m offset at 3 m horizontal range.
  q.resampled_spectrum = lib.entries[8].feature;  // +3 steps = 5.73 deg
  const double z3 = estimate_depth(q, lib, anchor, 3.0);
  CHECK(z3 - anchor.z == Approx(3.0 * std::tan(deg2rad(3 * 1.91))).epsilon(1e-9));
  CHECK(z3 - anchor.z == Approx(0.3).epsilon(0.01));

  // 1.91 degrees: 0.3 m offset at 9 m horizontal range.
  q.resampled_spectrum = lib.entries[6].feature;  // +1 step
  const double z9 = estimate_depth(q, lib, anchor, 9.0);
  CHECK(z9 - anchor.z == Approx(0.3).epsilon(0.01));

  // Zero elevation: depth equals the anchor depth for any range.
  q.resampled_spectrum = lib.entries[5].feature;
  CHECK(estimate_depth(q, lib, anchor, 3.0) == anchor.z);
  CHECK(estimate_depth(q, lib, anchor, 123.0) == anchor.z);

  TemplateLibrary wrong = lib;
  wrong.plane = TemplatePlane::Azimuth;
  CHECK_THROWS_AS(estimate_depth(q, wrong, anchor, 3.0), std::invalid_argument);
}

TEST_CASE("elevation closed loop on the calibration arc") {
  ScenarioConfig cfg = matching_scenario();
  cfg.geometry.depth = 6.0;
  cfg.anchors[0].position = Vec3{0.0, 0.0, 3.0};
  const ScenarioRuntime rt = ScenarioRuntime::build(cfg);
  TemplateBuildOptions opts = default_build_options();

  const auto grid = degree_grid(-20.0, 20.0, 2.5);
  const std::vector<double> ranges{2.0, 3.0};
  const TemplateLibrary lib =
      build_templates(rt, 0, grid, ranges, TemplatePlane::Elevation, opts);
  REQUIRE(lib.entries.size() == grid.size());

  const AnchorModel& anchor = rt.anchors.front();
  double total = 0.0;
  int n = 0;
  for (double deg : {-15.0, -7.5, 0.0, 7.5, 15.0}) {
    const double eps = deg2rad(deg);
    const double r = 2.5;
    const Vec3 rx = anchor.position + Vec3{r * std::cos(eps), 0.0,
                                           r * std::sin(eps)};
    const RxCapture cap = simulate_capture_at(rt, rx, rt.config.chirp);
    const auto peaks = correlation_peaks(cap.samples, rt.config.chirp);
    REQUIRE(peaks.size() >= 2);
    const std::size_t onset = peaks[1].index;
    const std::span<const double> seg(
        cap.samples.data() + onset,
        std::min(rt.config.chirp.sample_count(), cap.samples.size() - onset));
    const EnvelopeFeature feat =
        suppress_multipath(seg, rt.config.chirp, opts.suppression);
    const AoaEstimate est = estimate_elevation(feat, lib);
    total += std::abs(rad2deg(est.angle) - deg);
    ++n;
  }
  CHECK(total / n <= 2.5);
}

TEST_CASE("ranging: 20 m noiseless capture within one sample") {
  ScenarioConfig cfg = testsupport::deep_scenario();
  cfg.ams_enabled = false;  // bare transducer: pure EM-acoustic timing
  const RxCapture cap = simulate_capture(cfg, 0, cfg.chirp);
  const double r = estimate_range(cap.samples, cap.sample_rate, cfg.chirp,
                                  cfg.geometry.sound_speed);
  const double one_sample = cfg.geometry.sound_speed / cap.sample_rate;
  CHECK(std::abs(r - 20.0) <= one_sample);
}

TEST_CASE("ranging: merged EM and acoustic peaks read as zero distance") {
  const ChirpSpec spec = testsupport::default_chirp();
  const auto chirp = synth_chirp(spec);
  std::vector<double> capture(4000, 0.0);
  for (std::size_t i = 0; i < chirp.size(); ++i) {
    capture[700 + i] = chirp[i] * (1.0 + 0.4);  // acoustic + EM, same instant
  }
  CHECK(estimate_range(capture, spec.sample_rate, spec) == 0.0);
}

TEST_CASE("ranging: missing arrivals raise a ranging error") {
  const ChirpSpec spec = testsupport::default_chirp();
  Rng rng(3);
  std::vector<double> noise(4000);
  for (auto& v : noise) v = rng.gaussian();
  CHECK_THROWS_AS(estimate_range(noise, spec.sample_rate, spec), RangingError);
}

TEST_CASE("ranging sweep fits a unit slope with negligible intercept") {
  ScenarioConfig cfg = testsupport::deep_scenario();
  cfg.ams_enabled = false;
  std::vector<double> xs, ys;
  for (int i = 0; i < 10; ++i) {
    const double d = 2.0 + 2.0 * i;
    cfg.receiver_path[0].position = Vec3{d, 0.0, 50.0};
    const RxCapture cap = simulate_capture(cfg, 0, cfg.chirp);
    xs.push_back(d);
    ys.push_back(estimate_range(cap.samples, cap.sample_rate, cfg.chirp,
                                cfg.geometry.sound_speed));
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  CHECK(slope == Approx(1.0).epsilon(0.001));
  CHECK(std::abs(intercept) <= cfg.geometry.sound_speed / cfg.chirp.sample_rate);
}

TEST_CASE("ranging Monte-Carlo at 15 dB over 0 to 9.3 m") {
  ScenarioConfig cfg = testsupport::deep_scenario();
  cfg.ams_enabled = false;
  cfg.noise_snr_db = 15.0;
  std::vector<double> errors;
  Rng rng(606);
  const ScenarioRuntime base = ScenarioRuntime::build(cfg);
  for (int t = 0; t < 60; ++t) {
    ScenarioRuntime rt = base;
    rt.config.seed = derive_seed(99, "rng-trial" + std::to_string(t));
    const double d = rng.uniform(1.0, 9.3);
    const Vec3 rx{d, 0.0, 50.0};
    const RxCapture cap = simulate_capture_at(rt, rx, rt.config.chirp,
                                              "t" + std::to_string(t));
    try {
      const double r = estimate_range(cap.samples, cap.sample_rate,
                                      rt.config.chirp);
      errors.push_back(std::abs(r - d));
    } catch (const RangingError&) {
      errors.push_back(9.9);
    }
  }
  std::sort(errors.begin(), errors.end());
  CHECK(errors[errors.size() / 2] <= 0.15);
}

TEST_CASE("measure_anchor produces a consistent feasible measurement") {
  ScenarioConfig cfg = matching_scenario();
  cfg.geometry.depth = 6.0;
  cfg.anchors[0].position = Vec3{0.0, 0.0, 3.0};
  const ScenarioRuntime rt = ScenarioRuntime::build(cfg);
  const TemplateBuildOptions opts = default_build_options();

  const TemplateLibrary az =
      build_templates(rt, 0, degree_grid(0.0, 357.5, 2.5),
                      std::vector<double>{2.0, 3.0}, TemplatePlane::Azimuth, opts);
  const TemplateLibrary el =
      build_templates(rt, 0, degree_grid(-20.0, 20.0, 2.5),
                      std::vector<double>{2.0, 3.0}, TemplatePlane::Elevation,
                      opts);

  const double bearing = deg2rad(40.0);
  const double range = 2.5;
  const Vec3 rx = rt.anchors[0].position +
                  Vec3{range * std::cos(bearing), range * std::sin(bearing), 0.15};
  const RxCapture cap = simulate_capture_at(rt, rx, rt.config.chirp);

  MeasureOptions mopts;
  mopts.suppression = opts.suppression;
  mopts.transit_reference = &rt.anchors[0];
  const AnchorMeasurement m = measure_anchor(
      cap.samples, cap.sample_rate, rt.config.chirp, rt.anchors[0].position,
      rt.anchors[0].orientation, az, el, mopts);

  CHECK(m.range >= std::abs(m.depth - rt.anchors[0].position.z));
  CHECK(m.horizontal_range ==
        Approx(std::sqrt(m.range * m.range -
                         std::pow(m.depth - rt.anchors[0].position.z, 2)))
            .epsilon(1e-9));
  const double true_bearing = std::atan2(rx.y - 0.0, rx.x - 0.0);
  CHECK(rad2deg(std::abs(wrap_angle(m.bearing - true_bearing))) <= 5.0);
  CHECK(std::abs(m.range - (rx - rt.anchors[0].position).norm()) <= 0.05);
  CHECK(m.w_ang >= 0.0);
  CHECK(m.w_rng >= 0.0);
  CHECK(m.w_dep >= 0.0);
}
