#include "metablue/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metablue/errors.hpp"

namespace metablue {

void WaterGeometry::validate() const {
  if (depth <= 0.0) throw std::invalid_argument("WaterGeometry: depth must be > 0");
  if (sound_speed <= 0.0) {
    throw std::invalid_argument("WaterGeometry: sound_speed must be > 0");
  }
}

std::string PathArrival::type_label() const {
  if (is_los()) return "los";
  if (wall_bounces > 0) return "wall";
  if (surface_bounces > 0 && bottom_bounces > 0) return "mixed";
  return surface_bounces > 0 ? "surface" : "bottom";
}

namespace {

struct MirrorImage {
  double coord = 0.0;
  int lo_hits = 0;  // reflections off the lo plane
  int hi_hits = 0;  // reflections off the hi plane
};

// Images of coordinate p between two parallel mirrors at lo and hi, up to
// max_bounces reflections. Index 0 is the identity.
std::vector<MirrorImage> mirror_images(double p, double lo, double hi,
                                       int max_bounces) {
  std::vector<MirrorImage> out;
  out.push_back({p, 0, 0});
  // Chain that reflects off lo first, then alternates.
  double c = p;
  int lo_hits = 0, hi_hits = 0;
  for (int b = 1; b <= max_bounces; ++b) {
    if (b % 2 == 1) {
      c = 2.0 * lo - c;
      ++lo_hits;
    } else {
      c = 2.0 * hi - c;
      ++hi_hits;
    }
    out.push_back({c, lo_hits, hi_hits});
  }
  // Chain that reflects off hi first.
  c = p;
  lo_hits = hi_hits = 0;
  for (int b = 1; b <= max_bounces; ++b) {
    if (b % 2 == 1) {
      c = 2.0 * hi - c;
      ++hi_hits;
    } else {
      c = 2.0 * lo - c;
      ++lo_hits;
    }
    out.push_back({c, lo_hits, hi_hits});
  }
  return out;
}

}  // namespace

std::vector<PathArrival> path_set(const Vec3& tx, const Vec3& rx,
                                  const WaterGeometry& geom,
                                  int max_reflections,
                                  const std::optional<TankWalls>& walls,
                                  double surface_coeff, double bottom_coeff) {
  geom.validate();
  if (tx.z < 0.0 || tx.z > geom.depth || rx.z < 0.0 || rx.z > geom.depth) {
    throw std::invalid_argument("path_set: positions must lie in the water column");
  }
  if ((tx - rx).norm() == 0.0) {
    throw std::invalid_argument("path_set: degenerate geometry, tx == rx");
  }
  if (max_reflections < 0) max_reflections = 0;

  const std::vector<MirrorImage> z_images =
      mirror_images(tx.z, 0.0, geom.depth, max_reflections);

  std::vector<MirrorImage> x_images{{tx.x, 0, 0}};
  std::vector<MirrorImage> y_images{{tx.y, 0, 0}};
  if (walls) {
    x_images = mirror_images(tx.x, walls->x_min, walls->x_max, max_reflections);
    y_images = mirror_images(tx.y, walls->y_min, walls->y_max, max_reflections);
  }

  std::vector<PathArrival> out;
  for (const auto& zi : z_images) {
    const int z_bounces = zi.lo_hits + zi.hi_hits;
    for (const auto& xi : x_images) {
      for (const auto& yi : y_images) {
        const int wall_bounces =
            xi.lo_hits + xi.hi_hits + yi.lo_hits + yi.hi_hits;
        if (z_bounces + wall_bounces > max_reflections) continue;
        const double dx = xi.coord - rx.x;
        const double dy = yi.coord - rx.y;
        const double dz = zi.coord - rx.z;
        const double length = std::sqrt(dx * dx + dy * dy + dz * dz);
        double amp = 1.0 / length;
        amp *= std::pow(surface_coeff, zi.lo_hits);
        amp *= std::pow(bottom_coeff, zi.hi_hits);
        if (walls && wall_bounces > 0) amp *= std::pow(walls->coeff, wall_bounces);
        PathArrival p;
        p.delay = length / geom.sound_speed;
        p.amplitude = amp;
        p.surface_bounces = zi.lo_hits;
        p.bottom_bounces = zi.hi_hits;
        p.wall_bounces = wall_bounces;
        out.push_back(p);
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const PathArrival& a, const PathArrival& b) {
              return a.delay < b.delay;
            });
  return out;
}

std::vector<std::vector<double>> min_tdoa_map(const WaterGeometry& geom,
                                              const Vec3& tx,
                                              std::span<const double> rx_depths,
                                              std::span<const double> ranges,
                                              int max_reflections) {
  if (rx_depths.empty() || ranges.empty()) {
    throw std::invalid_argument("min_tdoa_map: empty grid");
  }
  std::vector<std::vector<double>> map(rx_depths.size(),
                                       std::vector<double>(ranges.size(), 0.0));
  for (std::size_t di = 0; di < rx_depths.size(); ++di) {
    for (std::size_t ri = 0; ri < ranges.size(); ++ri) {
      const Vec3 rx{tx.x + ranges[ri], tx.y, rx_depths[di]};
      const auto paths = path_set(tx, rx, geom, max_reflections);
      double los = 0.0;
      double best = 1e300;
      for (const auto& p : paths) {
        if (p.is_los()) los = p.delay;
      }
      for (const auto& p : paths) {
        if (!p.is_los()) best = std::min(best, p.delay - los);
      }
      map[di][ri] = best;
    }
  }
  return map;
}

void ScenarioConfig::validate() const {
  geometry.validate();
  if (anchors.empty()) throw ConfigError("ScenarioConfig: no anchors");
  if (receiver_path.empty()) {
    throw ConfigError("ScenarioConfig: empty receiver path");
  }
  chirp.validate();
  for (const auto& a : anchors) {
    if (a.position.z < 0.0 || a.position.z > geometry.depth) {
      throw ConfigError("ScenarioConfig: anchor outside the water column");
    }
    a.surface.validate();
  }
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    for (std::size_t j = i + 1; j < anchors.size(); ++j) {
      if ((anchors[i].position - anchors[j].position).norm() == 0.0) {
        throw ConfigError("ScenarioConfig: coincident anchors");
      }
    }
  }
  for (const auto& p : receiver_path) {
    if (p.position.z < 0.0 || p.position.z > geometry.depth) {
      throw ConfigError("ScenarioConfig: receiver outside the water column");
    }
  }
  if (max_reflections < 0) {
    throw ConfigError("ScenarioConfig: max_reflections must be >= 0");
  }
}

ScenarioRuntime ScenarioRuntime::build(const ScenarioConfig& cfg) {
  cfg.validate();
  ScenarioRuntime rt;
  rt.config = cfg;
  const std::vector<double> freqs =
      linspace(cfg.chirp.f0, cfg.chirp.f0 + cfg.chirp.bandwidth,
               cfg.table_freq_bins);
  const std::vector<double> az_grid = default_angle_grid();
  rt.anchors.resize(cfg.anchors.size());
  for (std::size_t i = 0; i < cfg.anchors.size(); ++i) {
    AnchorModel& m = rt.anchors[i];
    m.anchor_id = static_cast<int>(i);
    m.position = cfg.anchors[i].position;
    m.orientation = cfg.anchors[i].orientation;
    m.surface = cfg.anchors[i].surface;
    m.isotropic = !cfg.ams_enabled;
    m.azimuth = cfg.ams_enabled
                    ? build_gain_table(cfg.anchors[i].surface, az_grid, freqs)
                    : DirectionalGainTable::isotropic(az_grid, freqs);
  }
  return rt;
}

std::vector<double> render_paths(std::span<const double> shaped,
                                 std::span<const PathArrival> paths, double fs,
                                 std::size_t out_len, std::size_t offset) {
  std::vector<double> out(out_len, 0.0);
  for (const auto& p : paths) {
    const std::size_t start =
        offset + static_cast<std::size_t>(std::llround(p.delay * fs));
    for (std::size_t i = 0; i < shaped.size(); ++i) {
      const std::size_t idx = start + i;
      if (idx >= out_len) break;
      out[idx] += p.amplitude * shaped[i];
    }
  }
  return out;
}

namespace {

double probe_duration(const ProbeSignal& probe) {
  if (std::holds_alternative<ChirpSpec>(probe)) {
    return std::get<ChirpSpec>(probe).duration;
  }
  return std::get<AnchorFrame>(probe).total_duration();
}

std::vector<double> probe_samples(const ProbeSignal& probe, int anchor_id) {
  if (std::holds_alternative<ChirpSpec>(probe)) {
    return synth_chirp(std::get<ChirpSpec>(probe));
  }
  AnchorFrame f = std::get<AnchorFrame>(probe);
  f.anchor_id = anchor_id;
  return encode_frame(f);
}

}  // namespace

std::vector<double> shape_probe(const AnchorModel& anchor,
                                std::span<const double> drive, double fs,
                                double bearing_relative, double elevation,
                                bool use_elevation) {
  std::vector<double> padded(drive.begin(), drive.end());
  padded.resize(drive.size() + drive.size() / 2, 0.0);
  if (anchor.isotropic) return padded;
  // The physical surface responds continuously in angle; captures evaluate
  // the model at the exact bearing instead of a tabulated row.
  DirectionalGainTable row;
  row.angles = {bearing_relative};
  row.freqs = anchor.azimuth.freqs;
  row.gains = vertical_gain_row(anchor.surface, bearing_relative,
                                use_elevation ? elevation : 0.0, row.freqs);
  return shape_samples(padded, fs, row, bearing_relative);
}

RxCapture simulate_capture(const ScenarioRuntime& rt, std::size_t rx_index,
                           const ProbeSignal& probe) {
  if (rx_index >= rt.config.receiver_path.size()) {
    throw std::invalid_argument("simulate_capture: rx_index out of range");
  }
  return simulate_capture_at(rt, rt.config.receiver_path[rx_index].position,
                             probe, "capture:" + std::to_string(rx_index));
}

RxCapture simulate_capture_at(const ScenarioRuntime& rt, const Vec3& rx,
                              const ProbeSignal& probe,
                              const std::string& noise_seed_tag) {
  const ScenarioConfig& cfg = rt.config;
  const double fs = cfg.chirp.sample_rate;

  const double probe_len_s = probe_duration(probe);
  double slot_s = cfg.tdma_enabled ? std::max(cfg.tdma_slot, probe_len_s) : 0.0;

  RxCapture cap;
  cap.sample_rate = fs;
  cap.truth.rx_position = rx;

  // Precompute per-anchor channel and shaping, and size the capture.
  struct Prepared {
    std::vector<double> drive;
    std::vector<double> shaped;
    std::vector<PathArrival> paths;
    std::size_t slot_index = 0;
  };
  std::vector<Prepared> prepared(rt.anchors.size());
  double total_s = 0.0;
  for (std::size_t i = 0; i < rt.anchors.size(); ++i) {
    const AnchorModel& anchor = rt.anchors[i];
    Prepared& pre = prepared[i];
    pre.drive = probe_samples(probe, anchor.anchor_id);

    const Vec3 d = rx - anchor.position;
    const double bearing_world = std::atan2(d.y, d.x);
    const double bearing_rel = wrap_angle(bearing_world - anchor.orientation);
    const double elevation = std::atan2(d.z, d.horizontal_norm());

    pre.shaped = shape_probe(anchor, pre.drive, fs, bearing_rel, elevation,
                             cfg.elevation_shaping);
    pre.paths = path_set(anchor.position, rx, cfg.geometry, cfg.max_reflections,
                         cfg.walls, cfg.surface_coeff, cfg.bottom_coeff);

    const double slot_start = slot_s * static_cast<double>(i);
    pre.slot_index = static_cast<std::size_t>(std::llround(slot_start * fs));

    AnchorTruth t;
    t.anchor_id = anchor.anchor_id;
    t.slot_start = slot_start;
    t.slot_index = pre.slot_index;
    for (const auto& p : pre.paths) {
      if (p.is_los()) t.los_delay = p.delay;
    }
    t.bearing_world = bearing_world;
    t.bearing_relative = bearing_rel;
    t.elevation = elevation;
    t.slant_range = d.norm();
    cap.truth.anchors.push_back(t);

    const double tail = pre.paths.back().delay + 1.5 * probe_len_s + 1e-3;
    total_s = std::max(total_s, slot_start + tail);
  }

  if (!cfg.tdma_enabled && rt.anchors.size() > 1) cap.collision = true;

  const std::size_t n = static_cast<std::size_t>(std::ceil(total_s * fs)) + 1;
  cap.samples.assign(n, 0.0);
  const double em_scale = std::pow(10.0, -cfg.em_atten_db / 20.0);
  for (std::size_t i = 0; i < rt.anchors.size(); ++i) {
    const Prepared& pre = prepared[i];
    const std::vector<double> acoustic =
        render_paths(pre.shaped, pre.paths, fs, n, pre.slot_index);
    for (std::size_t s = 0; s < n; ++s) cap.samples[s] += acoustic[s];
    // EM leakage: unshaped drive at the transmit instant (t_EM ~ 0).
    for (std::size_t s = 0; s < pre.drive.size(); ++s) {
      const std::size_t idx = pre.slot_index + s;
      if (idx >= n) break;
      cap.samples[idx] += em_scale * pre.drive[s];
    }
  }
  cap.em_marker_index = prepared.front().slot_index;

  if (cfg.noise_snr_db) {
    double power = 0.0;
    std::size_t support = 0;
    for (double v : cap.samples) {
      if (v != 0.0) {
        power += v * v;
        ++support;
      }
    }
    if (support > 0) {
      power /= static_cast<double>(support);
      const double sigma =
          std::sqrt(power * std::pow(10.0, -(*cfg.noise_snr_db) / 10.0));
      Rng rng(derive_seed(cfg.seed, noise_seed_tag));
      for (auto& v : cap.samples) v += sigma * rng.gaussian();
    }
  }
  return cap;
}

RxCapture simulate_capture(const ScenarioConfig& cfg, std::size_t rx_index,
                           const ProbeSignal& probe) {
  return simulate_capture(ScenarioRuntime::build(cfg), rx_index, probe);
}

ScenarioRuntime single_anchor_view(const ScenarioRuntime& rt,
                                   std::size_t anchor_index) {
  if (anchor_index >= rt.anchors.size()) {
    throw std::invalid_argument("single_anchor_view: anchor index out of range");
  }
  ScenarioRuntime view;
  view.config = rt.config;
  view.config.anchors = {rt.config.anchors[anchor_index]};
  view.anchors = {rt.anchors[anchor_index]};
  return view;
}

}  // namespace metablue
