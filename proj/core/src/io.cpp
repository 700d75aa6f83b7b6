#include "metablue/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "metablue/errors.hpp"

namespace metablue::io {

namespace {

using nlohmann::json;

constexpr std::uint16_t kFormatVersion = 1;

void put_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u16(std::ostream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>(v >> 8)};
  put_bytes(os, b, 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  put_bytes(os, b, 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

void get_bytes(std::istream& is, void* p, std::size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!is) throw IoError(std::string("truncated file while reading ") + what);
}

std::uint16_t get_u16(std::istream& is, const char* what) {
  unsigned char b[2];
  get_bytes(is, b, 2, what);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  get_bytes(is, b, 4, what);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint64_t get_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  get_bytes(is, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

double get_f64(std::istream& is, const char* what) {
  const std::uint64_t bits = get_u64(is, what);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

float get_f32(std::istream& is, const char* what) {
  const std::uint32_t bits = get_u32(is, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  return is;
}

void expect_magic(std::istream& is, const char* magic, const std::string& path) {
  char buf[4];
  get_bytes(is, buf, 4, "magic");
  if (std::memcmp(buf, magic, 4) != 0) {
    throw IoError("bad magic in " + path + ", expected " + magic);
  }
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

template <typename T>
T require(const json& j, const char* key) {
  if (!j.contains(key)) {
    throw ConfigError(std::string("missing JSON field: ") + key);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad JSON field ") + key + ": " + e.what());
  }
}

json metasurface_json(const MetasurfaceConfig& cfg) {
  json cells = json::array();
  for (const auto& c : cfg.cells) cells.push_back(c.solid_len * 1000.0);
  const double cell_len =
      cfg.cells.empty() ? 0.0 : cfg.cells.front().total_len * 1000.0;
  return json{{"cells_mm", cells},
              {"cell_len_mm", cell_len},
              {"outer_radius_mm", cfg.outer_radius * 1000.0},
              {"c_solid", cfg.materials.c_solid},
              {"c_water", cfg.materials.c_water},
              {"atten_prefactor", cfg.materials.atten_prefactor},
              {"atten_exponent", cfg.materials.atten_exponent}};
}

MetasurfaceConfig metasurface_from(const json& j) {
  MetasurfaceConfig cfg;
  const auto cells_mm = require<std::vector<double>>(j, "cells_mm");
  const double cell_len = require<double>(j, "cell_len_mm") / 1000.0;
  cfg.outer_radius = require<double>(j, "outer_radius_mm") / 1000.0;
  cfg.materials.c_solid = require<double>(j, "c_solid");
  cfg.materials.c_water = require<double>(j, "c_water");
  cfg.materials.atten_prefactor = require<double>(j, "atten_prefactor");
  cfg.materials.atten_exponent = require<double>(j, "atten_exponent");
  const std::size_t n = cells_mm.size();
  cfg.cells.resize(n);
  cfg.cell_angles.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    cfg.cells[i] = UnitCellSpec{cells_mm[i] / 1000.0, cell_len};
    cfg.cell_angles[i] = kTwoPi * static_cast<double>(i) / static_cast<double>(n);
  }
  cfg.validate();
  return cfg;
}

json chirp_json(const ChirpSpec& s) {
  return json{{"amplitude", s.amplitude},
              {"f0", s.f0},
              {"bandwidth", s.bandwidth},
              {"duration", s.duration},
              {"sample_rate", s.sample_rate}};
}

ChirpSpec chirp_from(const json& j) {
  ChirpSpec s;
  s.amplitude = require<double>(j, "amplitude");
  s.f0 = require<double>(j, "f0");
  s.bandwidth = require<double>(j, "bandwidth");
  s.duration = require<double>(j, "duration");
  s.sample_rate = require<double>(j, "sample_rate");
  s.validate();
  return s;
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw ConfigError("position must be a [x, y, z] array");
  }
  return Vec3{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

void save_gain_table(const DirectionalGainTable& table, const std::string& path) {
  table.validate();
  auto os = open_out(path);
  put_bytes(os, "MBGT", 4);
  put_u16(os, kFormatVersion);
  put_u32(os, static_cast<std::uint32_t>(table.angle_count()));
  put_u32(os, static_cast<std::uint32_t>(table.freq_count()));
  for (double a : table.angles) put_f64(os, a);
  for (double f : table.freqs) put_f64(os, f);
  for (const auto& g : table.gains) {
    put_f64(os, g.real());
    put_f64(os, g.imag());
  }
  if (!os) throw IoError("write failed: " + path);
}

DirectionalGainTable load_gain_table(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "MBGT", path);
  const std::uint16_t version = get_u16(is, "version");
  if (version != kFormatVersion) {
    throw IoError("unsupported MBGT version in " + path);
  }
  const std::uint32_t m = get_u32(is, "angle count");
  const std::uint32_t l = get_u32(is, "freq count");
  DirectionalGainTable t;
  t.angles.resize(m);
  t.freqs.resize(l);
  t.gains.resize(static_cast<std::size_t>(m) * l);
  for (auto& a : t.angles) a = get_f64(is, "angle");
  for (auto& f : t.freqs) f = get_f64(is, "freq");
  for (auto& g : t.gains) {
    const double re = get_f64(is, "gain");
    const double im = get_f64(is, "gain");
    g = {re, im};
  }
  t.validate();
  return t;
}

void save_samples(std::span<const double> samples, double sample_rate,
                  const std::string& path) {
  auto os = open_out(path);
  put_bytes(os, "MBSG", 4);
  put_u16(os, kFormatVersion);
  put_f64(os, sample_rate);
  put_u64(os, samples.size());
  for (double v : samples) put_f32(os, static_cast<float>(v));
  if (!os) throw IoError("write failed: " + path);
}

LoadedSamples load_samples(const std::string& path) {
  auto is = open_in(path);
  expect_magic(is, "MBSG", path);
  const std::uint16_t version = get_u16(is, "version");
  if (version != kFormatVersion) {
    throw IoError("unsupported MBSG version in " + path);
  }
  LoadedSamples out;
  out.sample_rate = get_f64(is, "sample_rate");
  const std::uint64_t count = get_u64(is, "count");
  out.samples.resize(count);
  for (auto& v : out.samples) v = static_cast<double>(get_f32(is, "sample"));
  return out;
}

void save_capture(const RxCapture& capture, const std::string& path) {
  save_samples(capture.samples, capture.sample_rate, path);
  json truth_anchors = json::array();
  for (const auto& a : capture.truth.anchors) {
    truth_anchors.push_back({{"anchor_id", a.anchor_id},
                             {"slot_start", a.slot_start},
                             {"slot_index", a.slot_index},
                             {"los_delay", a.los_delay},
                             {"bearing_world", a.bearing_world},
                             {"bearing_relative", a.bearing_relative},
                             {"elevation", a.elevation},
                             {"slant_range", a.slant_range}});
  }
  const json side{{"em_marker_index", capture.em_marker_index},
                  {"collision", capture.collision},
                  {"truth",
                   {{"rx_position", vec3_json(capture.truth.rx_position)},
                    {"anchors", truth_anchors}}}};
  write_text_file(path + ".json", side.dump(2) + "\n");
}

RxCapture load_capture(const std::string& path) {
  RxCapture cap;
  LoadedSamples s = load_samples(path);
  cap.samples = std::move(s.samples);
  cap.sample_rate = s.sample_rate;
  const json side = parse(read_text_file(path + ".json"));
  cap.em_marker_index = require<std::size_t>(side, "em_marker_index");
  cap.collision = side.value("collision", false);
  if (side.contains("truth")) {
    const json& t = side.at("truth");
    cap.truth.rx_position = vec3_from(t.at("rx_position"));
    for (const auto& a : t.at("anchors")) {
      AnchorTruth at;
      at.anchor_id = require<int>(a, "anchor_id");
      at.slot_start = require<double>(a, "slot_start");
      at.slot_index = require<std::size_t>(a, "slot_index");
      at.los_delay = require<double>(a, "los_delay");
      at.bearing_world = require<double>(a, "bearing_world");
      at.bearing_relative = require<double>(a, "bearing_relative");
      at.elevation = require<double>(a, "elevation");
      at.slant_range = require<double>(a, "slant_range");
      cap.truth.anchors.push_back(at);
    }
  }
  return cap;
}

std::string write_json(const MetasurfaceConfig& cfg) {
  return metasurface_json(cfg).dump(2) + "\n";
}

MetasurfaceConfig read_metasurface(const std::string& text) {
  return metasurface_from(parse(text));
}

std::string write_json(const ChirpSpec& spec) {
  return chirp_json(spec).dump(2) + "\n";
}

ChirpSpec read_chirp(const std::string& text) { return chirp_from(parse(text)); }

std::string write_json(const AnchorFrame& frame) {
  return json{{"anchor_id", frame.anchor_id},
              {"preamble", chirp_json(frame.preamble)},
              {"bit_duration", frame.bit_duration},
              {"guard", frame.guard}}
             .dump(2) +
         "\n";
}

AnchorFrame read_frame(const std::string& text) {
  const json j = parse(text);
  AnchorFrame f;
  f.anchor_id = require<int>(j, "anchor_id");
  f.preamble = chirp_from(j.at("preamble"));
  f.bit_duration = require<double>(j, "bit_duration");
  f.guard = require<double>(j, "guard");
  f.validate();
  return f;
}

std::string write_json(const SuppressionParams& p) {
  return json{{"f_cut", p.f_cut},
              {"filter_taps", p.filter_taps},
              {"t_min", p.t_min},
              {"grid_bins", p.grid_bins},
              {"trim_fraction", p.trim_fraction}}
             .dump(2) +
         "\n";
}

SuppressionParams read_suppression(const std::string& text) {
  const json j = parse(text);
  SuppressionParams p;
  p.f_cut = require<double>(j, "f_cut");
  p.filter_taps = j.value("filter_taps", p.filter_taps);
  p.t_min = require<double>(j, "t_min");
  p.grid_bins = j.value("grid_bins", p.grid_bins);
  p.trim_fraction = j.value("trim_fraction", p.trim_fraction);
  return p;
}

std::string write_json(const ScenarioConfig& cfg) {
  json anchors = json::array();
  for (const auto& a : cfg.anchors) {
    anchors.push_back({{"position", vec3_json(a.position)},
                       {"orientation_rad", a.orientation},
                       {"metasurface", metasurface_json(a.surface)}});
  }
  json path = json::array();
  for (const auto& p : cfg.receiver_path) {
    path.push_back({{"t", p.t}, {"position", vec3_json(p.position)}});
  }
  json j{{"geometry",
          {{"depth_m", cfg.geometry.depth},
           {"sound_speed", cfg.geometry.sound_speed}}},
         {"anchors", anchors},
         {"receiver_path", path},
         {"chirp", chirp_json(cfg.chirp)},
         {"em_atten_db", cfg.em_atten_db},
         {"max_reflections", cfg.max_reflections},
         {"seed", cfg.seed},
         {"tdma_enabled", cfg.tdma_enabled},
         {"tdma_slot_s", cfg.tdma_slot},
         {"elevation_shaping", cfg.elevation_shaping},
         {"ams_enabled", cfg.ams_enabled},
         {"surface_coeff", cfg.surface_coeff},
         {"bottom_coeff", cfg.bottom_coeff},
         {"table_freq_bins", cfg.table_freq_bins}};
  if (cfg.noise_snr_db) {
    j["noise_snr_db"] = *cfg.noise_snr_db;
  } else {
    j["noise_snr_db"] = nullptr;
  }
  if (cfg.walls) {
    j["walls"] = {{"x_min", cfg.walls->x_min}, {"x_max", cfg.walls->x_max},
                  {"y_min", cfg.walls->y_min}, {"y_max", cfg.walls->y_max},
                  {"coeff", cfg.walls->coeff}};
  } else {
    j["walls"] = nullptr;
  }
  return j.dump(2) + "\n";
}

ScenarioConfig read_scenario(const std::string& text) {
  const json j = parse(text);
  ScenarioConfig cfg;
  const json& g = j.at("geometry");
  cfg.geometry.depth = require<double>(g, "depth_m");
  cfg.geometry.sound_speed = g.value("sound_speed", kSoundSpeedWater);
  for (const auto& a : j.at("anchors")) {
    AnchorPlacement p;
    p.position = vec3_from(a.at("position"));
    p.orientation = a.value("orientation_rad", 0.0);
    p.surface = metasurface_from(a.at("metasurface"));
    cfg.anchors.push_back(std::move(p));
  }
  for (const auto& p : j.at("receiver_path")) {
    cfg.receiver_path.push_back({p.value("t", 0.0), vec3_from(p.at("position"))});
  }
  cfg.chirp = chirp_from(j.at("chirp"));
  if (j.contains("noise_snr_db") && !j.at("noise_snr_db").is_null()) {
    cfg.noise_snr_db = j.at("noise_snr_db").get<double>();
  }
  cfg.em_atten_db = j.value("em_atten_db", cfg.em_atten_db);
  cfg.max_reflections = j.value("max_reflections", cfg.max_reflections);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.tdma_enabled = j.value("tdma_enabled", cfg.tdma_enabled);
  cfg.tdma_slot = j.value("tdma_slot_s", cfg.tdma_slot);
  cfg.elevation_shaping = j.value("elevation_shaping", cfg.elevation_shaping);
  cfg.ams_enabled = j.value("ams_enabled", cfg.ams_enabled);
  cfg.surface_coeff = j.value("surface_coeff", cfg.surface_coeff);
  cfg.bottom_coeff = j.value("bottom_coeff", cfg.bottom_coeff);
  cfg.table_freq_bins = j.value("table_freq_bins", cfg.table_freq_bins);
  if (j.contains("walls") && !j.at("walls").is_null()) {
    const json& w = j.at("walls");
    TankWalls walls;
    walls.x_min = require<double>(w, "x_min");
    walls.x_max = require<double>(w, "x_max");
    walls.y_min = require<double>(w, "y_min");
    walls.y_max = require<double>(w, "y_max");
    walls.coeff = w.value("coeff", walls.coeff);
    cfg.walls = walls;
  }
  cfg.validate();
  return cfg;
}

std::string write_json(const TemplateLibrary& lib) {
  json entries = json::array();
  for (const auto& e : lib.entries) {
    entries.push_back({{"angle", e.angle}, {"feature", e.feature}});
  }
  return json{{"anchor_id", lib.anchor_id},
              {"plane", lib.plane == TemplatePlane::Azimuth ? "azimuth"
                                                            : "elevation"},
              {"calibration_ranges", lib.calibration_ranges},
              {"grid_freqs", lib.grid_freqs},
              {"entries", entries}}
             .dump() +
         "\n";
}

TemplateLibrary read_templates(const std::string& text) {
  const json j = parse(text);
  TemplateLibrary lib;
  lib.anchor_id = require<int>(j, "anchor_id");
  const auto plane = require<std::string>(j, "plane");
  if (plane == "azimuth") {
    lib.plane = TemplatePlane::Azimuth;
  } else if (plane == "elevation") {
    lib.plane = TemplatePlane::Elevation;
  } else {
    throw ConfigError("template library plane must be azimuth or elevation");
  }
  lib.calibration_ranges = require<std::vector<double>>(j, "calibration_ranges");
  lib.grid_freqs = require<std::vector<double>>(j, "grid_freqs");
  for (const auto& e : j.at("entries")) {
    lib.entries.push_back(
        {require<double>(e, "angle"), require<std::vector<double>>(e, "feature")});
  }
  lib.validate();
  return lib;
}

std::string write_json(const EnvelopeFeature& f) {
  return json{{"envelope", f.envelope},
              {"grid_freqs", f.grid_freqs},
              {"resampled_spectrum", f.resampled_spectrum}}
             .dump() +
         "\n";
}

EnvelopeFeature read_feature(const std::string& text) {
  const json j = parse(text);
  EnvelopeFeature f;
  f.envelope = require<std::vector<double>>(j, "envelope");
  f.grid_freqs = require<std::vector<double>>(j, "grid_freqs");
  f.resampled_spectrum = require<std::vector<double>>(j, "resampled_spectrum");
  return f;
}

std::string write_json(const AnchorMeasurement& m) {
  return json{{"anchor_id", m.anchor_id}, {"bearing", m.bearing},
              {"range", m.range},         {"depth", m.depth},
              {"horizontal_range", m.horizontal_range},
              {"w_ang", m.w_ang},         {"w_rng", m.w_rng},
              {"w_dep", m.w_dep}}
      .dump() + "\n";
}

AnchorMeasurement read_measurement(const std::string& text) {
  const json j = parse(text);
  AnchorMeasurement m;
  m.anchor_id = require<int>(j, "anchor_id");
  m.bearing = require<double>(j, "bearing");
  m.range = require<double>(j, "range");
  m.depth = require<double>(j, "depth");
  m.horizontal_range = require<double>(j, "horizontal_range");
  m.w_ang = j.value("w_ang", 1.0);
  m.w_rng = j.value("w_rng", 1.0);
  m.w_dep = j.value("w_dep", 1.0);
  return m;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << content;
  if (!os) throw IoError("write failed: " + path);
}

std::string file_hash_hex(const std::string& path) {
  const std::string bytes = read_text_file(path);
  const std::uint64_t h = fnv1a64(bytes);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string apply_overrides(const std::string& text,
                            std::span<const std::string> overrides) {
  json j = parse(text);
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError("override must look like key.path=value: " + ov);
    }
    const std::string key = ov.substr(0, eq);
    const std::string value = ov.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::exception&) {
      parsed = value;  // plain string
    }
    json* node = &j;
    std::size_t start = 0;
    for (;;) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot - start);
      if (part.empty()) throw ConfigError("bad override key: " + key);
      if (dot == std::string::npos) {
        (*node)[part] = parsed;
        break;
      }
      node = &(*node)[part];
      start = dot + 1;
    }
  }
  return j.dump(2) + "\n";
}

}  // namespace metablue::io
