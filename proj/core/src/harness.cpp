#include "metablue/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "metablue/errors.hpp"
#include "metablue/io.hpp"

namespace metablue {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

std::string cell_key(const DistanceBin& bin, double snr, int anchors,
                     bool suppression, bool ams) {
  std::ostringstream ss;
  ss << "dist=" << format_double(bin.lo) << "-" << format_double(bin.hi)
     << ",snr=" << format_double(snr) << ",anchors=" << anchors
     << ",sup=" << (suppression ? "on" : "off")
     << ",ams=" << (ams ? "on" : "off");
  return ss.str();
}

std::string sanitize(const std::string& key) {
  std::string out = key;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  }
  return out;
}

}  // namespace

struct ElevationLibraryCache::Impl {
  const ScenarioRuntime& rt;
  int anchor_id;
  EstimationSetup setup;
  FeatureMode mode;
  std::mutex mutex;
  std::map<long, TemplateLibrary> cache;
};

ElevationLibraryCache::ElevationLibraryCache(const ScenarioRuntime& rt,
                                             int anchor_id,
                                             const EstimationSetup& setup,
                                             FeatureMode mode)
    : impl_(new Impl{rt, anchor_id, setup, mode, {}, {}}) {}

ElevationLibraryCache::~ElevationLibraryCache() = default;
ElevationLibraryCache::ElevationLibraryCache(ElevationLibraryCache&&) noexcept =
    default;

const TemplateLibrary& ElevationLibraryCache::at_bearing(double bearing_rel) {
  Impl& im = *impl_;
  const double bucket = deg2rad(im.setup.elevation_bucket_deg);
  const long idx = std::lround(wrap_angle(bearing_rel) / bucket);
  std::lock_guard<std::mutex> lock(im.mutex);
  auto it = im.cache.find(idx);
  if (it != im.cache.end()) return it->second;

  TemplateBuildOptions opts;
  opts.mode = im.mode;
  opts.suppression = im.setup.suppression;
  opts.score_floor = im.setup.score_floor;
  opts.elevation_azimuth = static_cast<double>(idx) * bucket;
  const std::vector<double> grid =
      linspace(-deg2rad(im.setup.elevation_span_deg),
               deg2rad(im.setup.elevation_span_deg),
               static_cast<std::size_t>(
                   std::round(2.0 * im.setup.elevation_span_deg /
                              im.setup.elevation_pitch_deg)) +
                   1);
  TemplateLibrary lib =
      build_templates(im.rt, im.anchor_id, grid, im.setup.calibration_ranges,
                      TemplatePlane::Elevation, opts);
  return im.cache.emplace(idx, std::move(lib)).first->second;
}

void ExperimentSpec::validate() const {
  scenario.validate();
  if (trials < 1) throw ConfigError("ExperimentSpec: trials must be >= 1");
  if (axes.distance_bins.empty() || axes.snr_db.empty() ||
      axes.anchor_counts.empty() || axes.suppression.empty() ||
      axes.ams.empty()) {
    throw ConfigError("ExperimentSpec: every sweep axis needs a value");
  }
  for (const auto& b : axes.distance_bins) {
    if (b.lo <= 0.0 || b.hi <= b.lo) {
      throw ConfigError("ExperimentSpec: bad distance bin");
    }
  }
  for (int k : axes.anchor_counts) {
    if (k < 1 || static_cast<std::size_t>(k) > scenario.anchors.size()) {
      throw ConfigError("ExperimentSpec: anchor count outside scenario");
    }
  }
}

PositionEstimate solve_wnls_trimmed(std::vector<AnchorMeasurement> measurements,
                                    std::vector<Vec3> anchors,
                                    const SolverWeights& weights) {
  const std::size_t k = measurements.size();
  if (k <= 2) return solve_wnls(measurements, anchors, weights);

  // Pair-hypothesis consensus: an occasional bearing flip produces a
  // measurement that is kilometers of residual away from any position the
  // other anchors agree on, so fit every anchor pair, count the anchors
  // consistent with that fix, and refit on the largest consistent set.
  const double inlier_tol = 0.5;  // m, combined residual per anchor

  std::vector<char> best_inliers;
  std::size_t best_count = 0;
  double best_residual = 1e300;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const std::vector<AnchorMeasurement> pair_m{measurements[i],
                                                  measurements[j]};
      const std::vector<Vec3> pair_a{anchors[i], anchors[j]};
      PositionEstimate hyp;
      try {
        hyp = solve_wnls(pair_m, pair_a, weights);
      } catch (const SolverError&) {
        continue;
      }
      std::vector<char> inliers(k, 0);
      std::size_t count = 0;
      double total = 0.0;
      for (std::size_t m = 0; m < k; ++m) {
        const ResidualTriple r = residuals(hyp.p, measurements[m], anchors[m]);
        const double norm =
            std::sqrt(r.ang * r.ang + r.rng * r.rng + r.dep * r.dep);
        if (norm <= inlier_tol) {
          inliers[m] = 1;
          ++count;
          total += norm;
        }
      }
      if (count > best_count ||
          (count == best_count && total < best_residual)) {
        best_count = count;
        best_residual = total;
        best_inliers = inliers;
      }
    }
  }
  if (best_count < 2) return solve_wnls(measurements, anchors, weights);

  std::vector<AnchorMeasurement> ms;
  std::vector<Vec3> as;
  for (std::size_t m = 0; m < k; ++m) {
    if (best_inliers[m]) {
      ms.push_back(measurements[m]);
      as.push_back(anchors[m]);
    }
  }
  return solve_wnls(ms, as, weights);
}

StatSummary StatSummary::from_samples(std::vector<double> samples) {
  StatSummary s;
  std::sort(samples.begin(), samples.end());
  s.sorted = std::move(samples);
  if (s.sorted.empty()) return s;
  auto rank = [&](double q) {
    const std::size_t n = s.sorted.size();
    const std::size_t r = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(n)));
    return s.sorted[std::min(n - 1, r == 0 ? 0 : r - 1)];
  };
  s.p50 = rank(0.50);
  s.p75 = rank(0.75);
  s.p90 = rank(0.90);
  return s;
}

MetricsReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const ScenarioConfig& base = spec.scenario;
  const double depth = base.geometry.depth;
  const double z_lo = spec.rx_depth_min > 0.0 ? spec.rx_depth_min : 0.2 * depth;
  const double z_hi = spec.rx_depth_max > 0.0 ? spec.rx_depth_max : 0.8 * depth;

  // TDMA slots sized so every acoustic arrival lands inside its own slot.
  double max_range = 0.0;
  for (const auto& b : spec.axes.distance_bins) max_range = std::max(max_range, b.hi);
  double anchor_span = 0.0;
  for (const auto& a : base.anchors) {
    for (const auto& b : base.anchors) {
      anchor_span = std::max(anchor_span, (a.position - b.position).norm());
    }
  }
  const double slot_s = (max_range + anchor_span + depth) /
                            base.geometry.sound_speed +
                        2.0 * base.chirp.duration + 1e-3;

  // One runtime per AMS mode; everything else is a cheap per-cell copy.
  std::map<bool, ScenarioRuntime> runtimes;
  for (bool ams : spec.axes.ams) {
    if (runtimes.count(ams)) continue;
    ScenarioConfig cfg = base;
    cfg.ams_enabled = ams;
    cfg.tdma_enabled = true;
    cfg.tdma_slot = slot_s;
    runtimes.emplace(ams, ScenarioRuntime::build(cfg));
  }

  // Azimuth template libraries per (ams, suppression, anchor).
  const std::size_t n_az = static_cast<std::size_t>(
      std::round(360.0 / spec.estimation.template_pitch_deg));
  std::vector<double> az_grid(n_az);
  for (std::size_t i = 0; i < n_az; ++i) {
    az_grid[i] = wrap_angle(deg2rad(spec.estimation.template_pitch_deg *
                                    static_cast<double>(i)));
  }
  std::sort(az_grid.begin(), az_grid.end());

  struct PipelineCtx {
    std::vector<TemplateLibrary> azimuth;
    std::vector<std::unique_ptr<ElevationLibraryCache>> elevation;
  };
  std::map<std::pair<bool, bool>, PipelineCtx> contexts;  // (ams, suppression)
  for (bool ams : spec.axes.ams) {
    for (bool sup : spec.axes.suppression) {
      const auto key = std::make_pair(ams, sup);
      if (contexts.count(key)) continue;
      const FeatureMode mode =
          sup ? FeatureMode::Suppressed : FeatureMode::RawSpectrum;
      PipelineCtx ctx;
      TemplateBuildOptions opts;
      opts.mode = mode;
      opts.suppression = spec.estimation.suppression;
      opts.score_floor = spec.estimation.score_floor;
      const ScenarioRuntime& rt = runtimes.at(ams);
      for (std::size_t a = 0; a < rt.anchors.size(); ++a) {
        ctx.azimuth.push_back(build_templates(
            rt, static_cast<int>(a), az_grid,
            spec.estimation.calibration_ranges, TemplatePlane::Azimuth, opts));
        ctx.elevation.push_back(std::make_unique<ElevationLibraryCache>(
            rt, static_cast<int>(a), spec.estimation, mode));
      }
      contexts.emplace(key, std::move(ctx));
    }
  }

  MetricsReport report;
  report.seed = spec.seed;
  report.trials = spec.trials;

  for (const auto& bin : spec.axes.distance_bins) {
    for (double snr : spec.axes.snr_db) {
      for (int anchors : spec.axes.anchor_counts) {
        for (bool sup : spec.axes.suppression) {
          for (bool ams : spec.axes.ams) {
            const std::string key = cell_key(bin, snr, anchors, sup, ams);
            const std::uint64_t cell_seed = derive_seed(spec.seed, key);

            const ScenarioRuntime& full_rt = runtimes.at(ams);
            ScenarioRuntime rt;
            rt.config = full_rt.config;
            rt.config.anchors.assign(full_rt.config.anchors.begin(),
                                     full_rt.config.anchors.begin() + anchors);
            rt.anchors.assign(full_rt.anchors.begin(),
                              full_rt.anchors.begin() + anchors);
            rt.config.noise_snr_db = snr;
            rt.config.seed = cell_seed;

            PipelineCtx& ctx = contexts.at(std::make_pair(ams, sup));
            MeasureOptions mopts;
            mopts.mode = sup ? FeatureMode::Suppressed : FeatureMode::RawSpectrum;
            mopts.suppression = spec.estimation.suppression;
            mopts.score_floor = spec.estimation.score_floor;
            mopts.sound_speed = base.geometry.sound_speed;
            mopts.depth_clamp = base.geometry.depth;

            CellMetrics cell;
            cell.key = key;
            cell.distance = bin;
            cell.snr_db = snr;
            cell.anchor_count = anchors;
            cell.suppression = sup;
            cell.ams = ams;

            std::vector<double> aoa_all, range_all, depth_all, p3d_all;
            for (int trial = 0; trial < spec.trials; ++trial) {
              const std::string tag = key + "|trial=" + std::to_string(trial);
              Rng rng(derive_seed(cell_seed, "placement|" + tag));
              const Vec3 a0 = rt.anchors.front().position;
              const double r = rng.uniform(bin.lo, bin.hi);
              const double phi = rng.uniform(0.0, kTwoPi);
              const double z = rng.uniform(z_lo, z_hi);
              const Vec3 rx{a0.x + r * std::cos(phi), a0.y + r * std::sin(phi),
                            z};

              try {
                const RxCapture cap =
                    simulate_capture_at(rt, rx, rt.config.chirp, tag);
                const std::size_t slot_samples = static_cast<std::size_t>(
                    std::llround(slot_s * cap.sample_rate));

                std::vector<AnchorMeasurement> ms;
                std::vector<Vec3> positions;
                for (int a = 0; a < anchors; ++a) {
                  const AnchorTruth& truth =
                      cap.truth.anchors[static_cast<std::size_t>(a)];
                  const std::size_t lo = truth.slot_index;
                  const std::size_t hi =
                      std::min(cap.samples.size(), lo + slot_samples);
                  const std::span<const double> slice(cap.samples.data() + lo,
                                                      hi - lo);
                  const AnchorModel& anchor =
                      rt.anchors[static_cast<std::size_t>(a)];
                  ElevationLibraryCache& ecache =
                      *ctx.elevation[static_cast<std::size_t>(a)];
                  AnchorMeasurement m = measure_anchor(
                      slice, cap.sample_rate, rt.config.chirp, anchor.position,
                      anchor.orientation, ctx.azimuth[static_cast<std::size_t>(a)],
                      [&](double b) -> const TemplateLibrary& {
                        return ecache.at_bearing(b);
                      },
                      mopts);
                  ms.push_back(m);
                  positions.push_back(anchor.position);

                  aoa_all.push_back(
                      rad2deg(std::abs(wrap_angle(m.bearing -
                                                  truth.bearing_world))));
                  range_all.push_back(std::abs(m.range - truth.slant_range));
                  depth_all.push_back(std::abs(m.depth - rx.z));
                }
                const PositionEstimate fix = solve_wnls_trimmed(ms, positions);
                p3d_all.push_back((fix.p - rx).norm());
                ++cell.ok;
              } catch (const std::exception&) {
                ++cell.failed;
              }
            }
            cell.aoa_deg = StatSummary::from_samples(std::move(aoa_all));
            cell.range_m = StatSummary::from_samples(std::move(range_all));
            cell.depth_m = StatSummary::from_samples(std::move(depth_all));
            cell.p3d_m = StatSummary::from_samples(std::move(p3d_all));
            report.cells.push_back(std::move(cell));
          }
        }
      }
    }
  }

  if (!spec.output_dir.empty()) {
    std::filesystem::create_directories(spec.output_dir);
    io::write_text_file(spec.output_dir + "/report.json",
                        report_to_json(report));
    export_plotdata(report, PlotKind::Cdf, spec.output_dir);
    export_plotdata(report, PlotKind::ErrorVsDistance, spec.output_dir);
  }
  return report;
}

namespace {

json stat_json(const StatSummary& s) {
  return json{{"p50", s.p50}, {"p75", s.p75}, {"p90", s.p90}, {"cdf", s.sorted}};
}

StatSummary stat_from(const json& j) {
  StatSummary s;
  s.p50 = j.at("p50").get<double>();
  s.p75 = j.at("p75").get<double>();
  s.p90 = j.at("p90").get<double>();
  s.sorted = j.at("cdf").get<std::vector<double>>();
  return s;
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"key", c.key},
                     {"distance_lo", c.distance.lo},
                     {"distance_hi", c.distance.hi},
                     {"snr_db", c.snr_db},
                     {"anchor_count", c.anchor_count},
                     {"suppression", c.suppression},
                     {"ams", c.ams},
                     {"ok", c.ok},
                     {"failed", c.failed},
                     {"aoa_deg", stat_json(c.aoa_deg)},
                     {"range_m", stat_json(c.range_m)},
                     {"depth_m", stat_json(c.depth_m)},
                     {"p3d_m", stat_json(c.p3d_m)}});
  }
  return json{{"seed", report.seed}, {"trials", report.trials},
              {"cells", cells}}
             .dump(2) +
         "\n";
}

MetricsReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid report JSON: ") + e.what());
  }
  MetricsReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.trials = j.at("trials").get<int>();
  for (const auto& c : j.at("cells")) {
    CellMetrics cm;
    cm.key = c.at("key").get<std::string>();
    cm.distance.lo = c.at("distance_lo").get<double>();
    cm.distance.hi = c.at("distance_hi").get<double>();
    cm.snr_db = c.at("snr_db").get<double>();
    cm.anchor_count = c.at("anchor_count").get<int>();
    cm.suppression = c.at("suppression").get<bool>();
    cm.ams = c.at("ams").get<bool>();
    cm.ok = c.at("ok").get<int>();
    cm.failed = c.at("failed").get<int>();
    cm.aoa_deg = stat_from(c.at("aoa_deg"));
    cm.range_m = stat_from(c.at("range_m"));
    cm.depth_m = stat_from(c.at("depth_m"));
    cm.p3d_m = stat_from(c.at("p3d_m"));
    r.cells.push_back(std::move(cm));
  }
  return r;
}

void export_plotdata(const MetricsReport& report, PlotKind kind,
                     const std::string& dir) {
  std::filesystem::create_directories(dir);
  const std::vector<std::pair<std::string, const StatSummary CellMetrics::*>>
      metrics = {{"aoa_deg", &CellMetrics::aoa_deg},
                 {"range_m", &CellMetrics::range_m},
                 {"depth_m", &CellMetrics::depth_m},
                 {"p3d_m", &CellMetrics::p3d_m}};

  if (kind == PlotKind::Cdf) {
    for (const auto& cell : report.cells) {
      for (const auto& [name, member] : metrics) {
        const StatSummary& s = cell.*member;
        std::ostringstream csv;
        csv << "value,probability\n";
        const std::size_t n = s.sorted.size();
        for (std::size_t i = 0; i < n; ++i) {
          csv << s.sorted[i] << ","
              << static_cast<double>(i + 1) / static_cast<double>(n) << "\n";
        }
        io::write_text_file(
            dir + "/cdf_" + name + "_" + sanitize(cell.key) + ".csv",
            csv.str());
      }
    }
    return;
  }

  if (kind == PlotKind::ErrorVsDistance) {
    // One file per metric per non-distance combination; rows sorted by bin.
    struct Combo {
      double snr;
      int anchors;
      bool sup, ams;
      bool operator<(const Combo& o) const {
        return std::tie(snr, anchors, sup, ams) <
               std::tie(o.snr, o.anchors, o.sup, o.ams);
      }
    };
    for (const auto& [name, member] : metrics) {
      std::map<Combo, std::vector<const CellMetrics*>> groups;
      for (const auto& cell : report.cells) {
        groups[{cell.snr_db, cell.anchor_count, cell.suppression, cell.ams}]
            .push_back(&cell);
      }
      for (auto& [combo, cells] : groups) {
        std::sort(cells.begin(), cells.end(),
                  [](const CellMetrics* a, const CellMetrics* b) {
                    return a->distance.lo < b->distance.lo;
                  });
        std::ostringstream csv;
        csv << "distance_m,statistic,value\n";
        for (const CellMetrics* cell : cells) {
          const double mid = 0.5 * (cell->distance.lo + cell->distance.hi);
          const StatSummary& s = cell->*member;
          csv << mid << ",p50," << s.p50 << "\n";
          csv << mid << ",p75," << s.p75 << "\n";
          csv << mid << ",p90," << s.p90 << "\n";
        }
        std::ostringstream fname;
        fname << dir << "/evd_" << name << "_snr" << combo.snr << "_a"
              << combo.anchors << (combo.sup ? "_supon" : "_supoff")
              << (combo.ams ? "_amson" : "_amsoff") << ".csv";
        io::write_text_file(fname.str(), csv.str());
      }
    }
    return;
  }
  throw ConfigError("export_plotdata: unknown plot kind");
}

ExperimentSpec experiment_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid experiment JSON: ") + e.what());
  }
  ExperimentSpec spec;
  if (j.contains("scenario_file")) {
    spec.scenario = io::read_scenario(
        io::read_text_file(j.at("scenario_file").get<std::string>()));
  } else if (j.contains("scenario")) {
    spec.scenario = io::read_scenario(j.at("scenario").dump());
  } else {
    throw ConfigError("experiment spec needs scenario or scenario_file");
  }
  const json& axes = j.at("axes");
  for (const auto& b : axes.at("distance_bins")) {
    spec.axes.distance_bins.push_back(
        {b.at(0).get<double>(), b.at(1).get<double>()});
  }
  spec.axes.snr_db = axes.at("snr_db").get<std::vector<double>>();
  spec.axes.anchor_counts = axes.at("anchor_counts").get<std::vector<int>>();
  if (axes.contains("suppression")) {
    spec.axes.suppression = axes.at("suppression").get<std::vector<bool>>();
  }
  if (axes.contains("ams")) {
    spec.axes.ams = axes.at("ams").get<std::vector<bool>>();
  }
  spec.trials = j.value("trials", 1);
  spec.seed = j.value("seed", 1ULL);
  spec.output_dir = j.value("output_dir", std::string{});
  if (j.contains("estimation")) {
    const json& e = j.at("estimation");
    spec.estimation.template_pitch_deg =
        e.value("template_pitch_deg", spec.estimation.template_pitch_deg);
    if (e.contains("calibration_ranges")) {
      spec.estimation.calibration_ranges =
          e.at("calibration_ranges").get<std::vector<double>>();
    }
    spec.estimation.elevation_pitch_deg =
        e.value("elevation_pitch_deg", spec.estimation.elevation_pitch_deg);
    spec.estimation.elevation_span_deg =
        e.value("elevation_span_deg", spec.estimation.elevation_span_deg);
    spec.estimation.elevation_bucket_deg =
        e.value("elevation_bucket_deg", spec.estimation.elevation_bucket_deg);
    if (e.contains("suppression")) {
      spec.estimation.suppression =
          io::read_suppression(e.at("suppression").dump());
    }
    spec.estimation.score_floor =
        e.value("score_floor", spec.estimation.score_floor);
  }
  spec.rx_depth_min = j.value("rx_depth_min", 0.0);
  spec.rx_depth_max = j.value("rx_depth_max", 0.0);
  spec.validate();
  return spec;
}

}  // namespace metablue
