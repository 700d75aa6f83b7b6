// Command-line front end: every subcommand reads a JSON config file plus
// --set key.path=value overrides; nothing is interactive. Exit codes:
// 0 success, 2 configuration error, 3 pipeline failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "metablue/ams_optimizer.hpp"
#include "metablue/channel.hpp"
#include "metablue/errors.hpp"
#include "metablue/estimators.hpp"
#include "metablue/harness.hpp"
#include "metablue/io.hpp"
#include "metablue/localizer.hpp"
#include "metablue/tracking.hpp"

namespace {

using namespace metablue;
using nlohmann::json;

constexpr const char* kVersion = "0.1.0";

std::string load_config(const std::string& path,
                        const std::vector<std::string>& overrides) {
  std::string text = io::read_text_file(path);
  if (!overrides.empty()) text = io::apply_overrides(text, overrides);
  return text;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

void write_manifest(const std::string& dir, std::uint64_t seed,
                    const std::vector<std::pair<std::string, std::string>>& inputs) {
  json in = json::object();
  for (const auto& [name, path] : inputs) {
    in[name] = {{"path", path}, {"fnv1a64", io::file_hash_hex(path)}};
  }
  const json manifest{{"tool", "metablue"},
                      {"version", kVersion},
                      {"seed", seed},
                      {"inputs", in}};
  io::write_text_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

// ---- optimize-ams ----

int run_optimize(const std::string& config_path,
                 const std::vector<std::string>& overrides,
                 const std::string& out_path, const std::string& log_path) {
  const json cfg = parse_json(load_config(config_path, overrides));
  const MetasurfaceConfig tpl =
      io::read_metasurface(cfg.at("template").dump());

  OptimizerParams params;
  if (cfg.contains("params")) {
    const json& p = cfg.at("params");
    params.beta = p.value("beta", params.beta);
    params.max_iters = p.value("max_iters", params.max_iters);
    params.init_temperature = p.value("init_temperature", params.init_temperature);
    params.cooling_rate = p.value("cooling_rate", params.cooling_rate);
    params.seed = p.value("seed", params.seed);
    params.d_max = p.value("d_max_mm", params.d_max * 1000.0) / 1000.0;
  }

  auto grid = [&](const char* key, std::size_t def_angles, std::size_t def_freqs) {
    std::size_t n_angles = def_angles, n_freqs = def_freqs;
    double f_lo = 100e3, f_hi = 200e3;
    if (cfg.contains(key)) {
      const json& g = cfg.at(key);
      n_angles = g.value("angles", n_angles);
      n_freqs = g.value("freqs", n_freqs);
      f_lo = g.value("freq_lo", f_lo);
      f_hi = g.value("freq_hi", f_hi);
    }
    std::vector<double> angles(n_angles);
    for (std::size_t i = 0; i < n_angles; ++i) {
      angles[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(n_angles);
    }
    return std::make_pair(angles, linspace(f_lo, f_hi, n_freqs));
  };
  const auto [search_angles, search_freqs] = grid("search_grid", 72, 26);
  const auto [final_angles, final_freqs] = grid("final_grid", 360, 101);

  const OptimizeResult result = optimize(params, tpl, search_angles,
                                         search_freqs, final_angles, final_freqs);
  io::write_text_file(out_path, io::write_json(result.config));

  std::ostringstream csv;
  csv << "iter,objective,temperature\n";
  for (const auto& rec : result.log) {
    csv << rec.iter << "," << rec.objective << "," << rec.temperature << "\n";
  }
  io::write_text_file(log_path, csv.str());

  std::cout << "initial objective " << result.initial_objective
            << ", final objective " << result.final_objective << "\n"
            << "config written to " << out_path << ", log to " << log_path
            << "\n";
  return 0;
}

// ---- simulate ----

int run_simulate(const std::string& scenario_path,
                 const std::vector<std::string>& overrides, std::size_t rx_index,
                 bool frame_probe, const std::string& out_path) {
  const ScenarioConfig scn =
      io::read_scenario(load_config(scenario_path, overrides));
  ProbeSignal probe = scn.chirp;
  if (frame_probe) {
    AnchorFrame frame;
    frame.preamble = scn.chirp;
    frame.preamble.duration = 0.4e-3;
    probe = frame;
  }
  const RxCapture cap = simulate_capture(scn, rx_index, probe);
  io::save_capture(cap, out_path);
  std::cout << "capture with " << cap.samples.size() << " samples at "
            << cap.sample_rate << " Hz written to " << out_path << "\n";
  return 0;
}

// ---- suppress ----

int run_suppress(const std::string& capture_path,
                 const std::string& params_path,
                 const std::vector<std::string>& overrides,
                 const std::string& chirp_path, const std::string& out_path) {
  const RxCapture cap = io::load_capture(capture_path);
  const ChirpSpec chirp = io::read_chirp(io::read_text_file(chirp_path));
  const SuppressionParams params =
      io::read_suppression(load_config(params_path, overrides));
  params.validate(chirp);

  const auto peaks = correlation_peaks(cap.samples, chirp);
  if (peaks.empty()) throw NotFoundError("no chirp found in capture");
  const std::size_t onset = peaks.size() > 1 ? peaks[1].index : peaks[0].index;
  const std::size_t n = chirp.sample_count();
  const std::span<const double> segment(
      cap.samples.data() + onset, std::min(n, cap.samples.size() - onset));
  const EnvelopeFeature feature = suppress_multipath(segment, chirp, params);
  io::write_text_file(out_path, io::write_json(feature));
  std::cout << "feature with " << feature.resampled_spectrum.size()
            << " grid bins written to " << out_path << "\n";
  return 0;
}

// ---- estimate ----

int run_estimate(const std::string& scenario_path,
                 const std::vector<std::string>& overrides,
                 const std::vector<std::string>& captures,
                 const std::string& templates_dir, bool raw_features,
                 const std::string& out_path) {
  const ScenarioConfig scn =
      io::read_scenario(load_config(scenario_path, overrides));
  const ScenarioRuntime rt = ScenarioRuntime::build(scn);

  EstimationSetup setup;
  setup.suppression.t_min = 0.04e-3;
  setup.suppression.f_cut = 45e3;

  TemplateBuildOptions opts;
  opts.mode = raw_features ? FeatureMode::RawSpectrum : FeatureMode::Suppressed;
  opts.suppression = setup.suppression;
  const std::size_t n_az = static_cast<std::size_t>(
      std::round(360.0 / setup.template_pitch_deg));
  std::vector<double> az_grid(n_az);
  for (std::size_t i = 0; i < n_az; ++i) {
    az_grid[i] =
        wrap_angle(deg2rad(setup.template_pitch_deg * static_cast<double>(i)));
  }
  std::sort(az_grid.begin(), az_grid.end());

  std::vector<TemplateLibrary> azimuth;
  std::vector<ElevationLibraryCache> elevation;
  const FeatureMode mode = opts.mode;
  for (std::size_t a = 0; a < rt.anchors.size(); ++a) {
    const std::string az_file =
        templates_dir + "/az_" + std::to_string(a) + ".json";
    if (!templates_dir.empty() && std::filesystem::exists(az_file)) {
      azimuth.push_back(io::read_templates(io::read_text_file(az_file)));
    } else {
      azimuth.push_back(build_templates(rt, static_cast<int>(a), az_grid,
                                        setup.calibration_ranges,
                                        TemplatePlane::Azimuth, opts));
      if (!templates_dir.empty()) {
        std::filesystem::create_directories(templates_dir);
        io::write_text_file(az_file, io::write_json(azimuth.back()));
      }
    }
    elevation.emplace_back(rt, static_cast<int>(a), setup, mode);
  }

  MeasureOptions mopts;
  mopts.mode = opts.mode;
  mopts.suppression = opts.suppression;
  mopts.sound_speed = scn.geometry.sound_speed;

  std::ostringstream out;
  const double probe_len = scn.chirp.duration;
  const double slot_s =
      scn.tdma_enabled ? std::max(scn.tdma_slot, probe_len) : 0.0;
  int epoch = 0;
  for (const std::string& path : captures) {
    const RxCapture cap = io::load_capture(path);
    const std::size_t slot_samples =
        static_cast<std::size_t>(std::llround(slot_s * cap.sample_rate));
    for (std::size_t a = 0; a < rt.anchors.size(); ++a) {
      const std::size_t lo = std::min(cap.samples.size(), a * slot_samples);
      const std::size_t hi = slot_samples == 0
                                 ? cap.samples.size()
                                 : std::min(cap.samples.size(), lo + slot_samples);
      if (hi <= lo) continue;
      const std::span<const double> slice(cap.samples.data() + lo, hi - lo);
      mopts.transit_reference = &rt.anchors[a];
      try {
        ElevationLibraryCache& ecache = elevation[a];
        const AnchorMeasurement m = measure_anchor(
            slice, cap.sample_rate, scn.chirp, rt.anchors[a].position,
            rt.anchors[a].orientation, azimuth[a],
            [&](double b) -> const TemplateLibrary& {
              return ecache.at_bearing(b);
            },
            mopts);
        json line = json::parse(io::write_json(m));
        line["epoch"] = epoch;
        out << line.dump() << "\n";
      } catch (const std::exception& e) {
        std::cerr << "anchor " << a << " in " << path << ": " << e.what()
                  << "\n";
      }
    }
    ++epoch;
  }
  io::write_text_file(out_path, out.str());
  std::cout << "measurements written to " << out_path << "\n";
  return 0;
}

// ---- localize / track ----

int run_localize(const std::string& measurements_path,
                 const std::string& scenario_path,
                 const std::vector<std::string>& overrides, double interval,
                 const std::string& out_path) {
  const ScenarioConfig scn =
      io::read_scenario(load_config(scenario_path, overrides));
  std::vector<Vec3> anchor_positions;
  for (const auto& a : scn.anchors) anchor_positions.push_back(a.position);

  std::ifstream in(measurements_path);
  if (!in) throw IoError("cannot open " + measurements_path);
  std::map<int, std::vector<AnchorMeasurement>> epochs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = parse_json(line);
    epochs[j.value("epoch", 0)].push_back(io::read_measurement(line));
  }

  std::ostringstream out;
  for (const auto& [epoch, ms] : epochs) {
    std::vector<Vec3> anchors;
    for (const auto& m : ms) {
      if (m.anchor_id < 0 ||
          static_cast<std::size_t>(m.anchor_id) >= anchor_positions.size()) {
        throw ConfigError("measurement references unknown anchor id " +
                          std::to_string(m.anchor_id));
      }
      anchors.push_back(anchor_positions[static_cast<std::size_t>(m.anchor_id)]);
    }
    const PositionEstimate est = ms.size() >= 3
                                     ? solve_wnls_trimmed(ms, anchors)
                                     : solve_wnls(ms, anchors);
    const json j{{"epoch", epoch},
                 {"t", interval * static_cast<double>(epoch)},
                 {"x", est.p.x},
                 {"y", est.p.y},
                 {"z", est.p.z},
                 {"residual_norm", est.residual_norm},
                 {"iterations", est.iterations}};
    out << j.dump() << "\n";
  }
  io::write_text_file(out_path, out.str());
  std::cout << epochs.size() << " fixes written to " << out_path << "\n";
  return 0;
}

int run_track(const std::string& fixes_path, const std::string& imu_path,
              double q, double r, const std::string& out_path) {
  std::ifstream in(fixes_path);
  if (!in) throw IoError("cannot open " + fixes_path);
  std::vector<TimedFix> fixes;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = parse_json(line);
    fixes.push_back({j.at("t").get<double>(),
                     Vec3{j.at("x").get<double>(), j.at("y").get<double>(),
                          j.at("z").get<double>()}});
  }

  std::vector<ImuSample> imu;
  if (!imu_path.empty()) {
    std::ifstream imu_in(imu_path);
    if (!imu_in) throw IoError("cannot open " + imu_path);
    std::getline(imu_in, line);  // header t,ax,ay,az
    while (std::getline(imu_in, line)) {
      if (line.empty()) continue;
      std::istringstream row(line);
      std::string cell;
      double vals[4] = {0, 0, 0, 0};
      for (int c = 0; c < 4 && std::getline(row, cell, ','); ++c) {
        vals[c] = std::stod(cell);
      }
      imu.push_back({vals[0], Vec3{vals[1], vals[2], vals[3]}});
    }
  }

  FusionParams params;
  params.process_accel_noise = q;
  params.fix_noise = r;
  const auto track = fuse_track(fixes, imu, params);

  std::ostringstream out;
  out << "t,x,y,z,err\n";
  for (std::size_t i = 0; i < track.size(); ++i) {
    const Vec3 p = track[i].position();
    out << track[i].timestamp << "," << p.x << "," << p.y << "," << p.z << ","
        << (p - fixes[i].p).norm() << "\n";
  }
  io::write_text_file(out_path, out.str());
  std::cout << track.size() << " track states written to " << out_path << "\n";
  return 0;
}

// ---- sweep / export ----

int run_sweep(const std::string& spec_path,
              const std::vector<std::string>& overrides,
              const std::string& out_dir) {
  const std::string text = load_config(spec_path, overrides);
  ExperimentSpec spec = experiment_from_json(text);
  if (!out_dir.empty()) spec.output_dir = out_dir;
  if (spec.output_dir.empty()) {
    throw ConfigError("sweep needs an output directory (spec output_dir or --out)");
  }
  const MetricsReport report = run_experiment(spec);
  write_manifest(spec.output_dir, spec.seed, {{"spec", spec_path}});
  std::cout << report.cells.size() << " cells written to " << spec.output_dir
            << "\n";
  return 0;
}

int run_export(const std::string& report_path, const std::string& kind,
               const std::string& out_dir) {
  PlotKind pk;
  if (kind == "cdf") {
    pk = PlotKind::Cdf;
  } else if (kind == "error-vs-distance") {
    pk = PlotKind::ErrorVsDistance;
  } else {
    throw ConfigError("unknown export kind: " + kind +
                      " (use cdf or error-vs-distance)");
  }
  const MetricsReport report =
      report_from_json(io::read_text_file(report_path));
  export_plotdata(report, pk, out_dir);
  std::cout << "plot data written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metablue: metasurface-assisted underwater localization toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::vector<std::string> overrides;
  app.add_option("--set", overrides,
                 "config override key.path=value (repeatable)")
      ->take_all();

  std::string config, out, log = "optimize_log.csv";
  auto* cmd_opt = app.add_subcommand("optimize-ams",
                                     "search for a high-diversity surface");
  cmd_opt->add_option("--config", config, "optimizer JSON")->required();
  cmd_opt->add_option("--out", out, "optimized surface JSON")->required();
  cmd_opt->add_option("--log", log, "iteration CSV");

  std::string scenario, capture_out = "capture.mbsg";
  std::size_t rx_index = 0;
  bool frame_probe = false;
  auto* cmd_sim = app.add_subcommand("simulate", "render one receiver capture");
  cmd_sim->add_option("--scenario", scenario, "scenario JSON")->required();
  cmd_sim->add_option("--rx", rx_index, "receiver path index");
  cmd_sim->add_flag("--frame", frame_probe, "send TDMA id frames instead of chirps");
  cmd_sim->add_option("--out", capture_out, "capture output (MBSG + sidecar)");

  std::string capture_in, sup_params, chirp_file, feature_out = "feature.json";
  auto* cmd_sup = app.add_subcommand("suppress",
                                     "recover the directional envelope");
  cmd_sup->add_option("--capture", capture_in, "capture MBSG")->required();
  cmd_sup->add_option("--params", sup_params, "suppression JSON")->required();
  cmd_sup->add_option("--chirp", chirp_file, "chirp JSON")->required();
  cmd_sup->add_option("--out", feature_out, "feature JSON");

  std::vector<std::string> capture_files;
  std::string templates_dir, meas_out = "measurements.jsonl";
  bool raw_features = false;
  auto* cmd_est = app.add_subcommand("estimate",
                                     "per-anchor bearing/range/depth");
  cmd_est->add_option("--scenario", scenario, "scenario JSON")->required();
  cmd_est->add_option("--captures", capture_files, "capture files")
      ->required()
      ->take_all();
  cmd_est->add_option("--templates-dir", templates_dir,
                      "library cache directory");
  cmd_est->add_flag("--raw", raw_features, "raw-spectrum baseline features");
  cmd_est->add_option("--out", meas_out, "measurement JSON lines");

  std::string measurements, fixes_out = "fixes.jsonl";
  double interval = 1.0;
  auto* cmd_loc = app.add_subcommand("localize", "solve positions from measurements");
  cmd_loc->add_option("--measurements", measurements, "JSON lines")->required();
  cmd_loc->add_option("--scenario", scenario, "scenario JSON")->required();
  cmd_loc->add_option("--interval", interval, "seconds between epochs");
  cmd_loc->add_option("--out", fixes_out, "fix JSON lines");

  std::string fixes_in, imu_file, track_out = "track.csv";
  double q = 0.05, r = 0.3;
  auto* cmd_trk = app.add_subcommand("track", "fuse fixes with inertial data");
  cmd_trk->add_option("--fixes", fixes_in, "fix JSON lines")->required();
  cmd_trk->add_option("--imu", imu_file, "IMU CSV (t,ax,ay,az)");
  cmd_trk->add_option("--q", q, "process accel noise");
  cmd_trk->add_option("--r", r, "fix position noise");
  cmd_trk->add_option("--out", track_out, "track CSV");

  std::string spec_file, sweep_out;
  auto* cmd_swp = app.add_subcommand("sweep", "run a Monte-Carlo experiment");
  cmd_swp->add_option("--spec", spec_file, "experiment JSON")->required();
  cmd_swp->add_option("--out", sweep_out, "run directory override");

  std::string report_file, kind = "cdf", export_out = "plots";
  auto* cmd_exp = app.add_subcommand("export", "plot-ready CSVs from a report");
  cmd_exp->add_option("--report", report_file, "report JSON")->required();
  cmd_exp->add_option("--kind", kind, "cdf or error-vs-distance");
  cmd_exp->add_option("--out", export_out, "output directory");

  // --set may appear after the subcommand name as well.
  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_opt->parsed()) return run_optimize(config, overrides, out, log);
    if (cmd_sim->parsed()) {
      return run_simulate(scenario, overrides, rx_index, frame_probe, capture_out);
    }
    if (cmd_sup->parsed()) {
      return run_suppress(capture_in, sup_params, overrides, chirp_file,
                          feature_out);
    }
    if (cmd_est->parsed()) {
      return run_estimate(scenario, overrides, capture_files, templates_dir,
                          raw_features, meas_out);
    }
    if (cmd_loc->parsed()) {
      return run_localize(measurements, scenario, overrides, interval, fixes_out);
    }
    if (cmd_trk->parsed()) return run_track(fixes_in, imu_file, q, r, track_out);
    if (cmd_swp->parsed()) return run_sweep(spec_file, overrides, sweep_out);
    if (cmd_exp->parsed()) return run_export(report_file, kind, export_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
