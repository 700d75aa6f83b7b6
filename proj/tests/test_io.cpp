#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "metablue/errors.hpp"
#include "metablue/io.hpp"
#include "test_support.hpp"

using namespace metablue;
using doctest::Approx;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("metablue_io_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("gain table binary round trip is bit exact") {
  const MetasurfaceConfig cfg = testsupport::test_surface(24, 3);
  const DirectionalGainTable table = build_gain_table(
      cfg, linspace(0.0, 6.2, 48), linspace(100e3, 375e3, 33));
  TempDir dir;
  io::save_gain_table(table, dir.file("t.mbgt"));
  const DirectionalGainTable loaded = io::load_gain_table(dir.file("t.mbgt"));
  REQUIRE(loaded.angles.size() == table.angles.size());
  REQUIRE(loaded.freqs.size() == table.freqs.size());
  for (std::size_t i = 0; i < table.gains.size(); ++i) {
    CHECK(loaded.gains[i] == table.gains[i]);
  }
  CHECK(loaded.angles == table.angles);
  CHECK(loaded.freqs == table.freqs);
}

TEST_CASE("gain table file rejects a bad magic") {
  TempDir dir;
  io::write_text_file(dir.file("bad.mbgt"), "NOPExxxxxxxxxxxxxxxx");
  CHECK_THROWS_AS(io::load_gain_table(dir.file("bad.mbgt")), IoError);
}

TEST_CASE("sample file round trip at f32 precision") {
  const ChirpSpec spec = testsupport::default_chirp();
  std::vector<double> s = synth_chirp(spec);
  // Quantize to f32 first so the round trip is exact.
  for (auto& v : s) v = static_cast<double>(static_cast<float>(v));
  TempDir dir;
  io::save_samples(s, spec.sample_rate, dir.file("s.mbsg"));
  const io::LoadedSamples loaded = io::load_samples(dir.file("s.mbsg"));
  CHECK(loaded.sample_rate == spec.sample_rate);
  REQUIRE(loaded.samples.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(loaded.samples[i] == s[i]);
}

TEST_CASE("capture persists with its sidecar truth block") {
  ScenarioConfig cfg = testsupport::pool_scenario();
  const RxCapture cap = simulate_capture(cfg, 0, cfg.chirp);
  TempDir dir;
  io::save_capture(cap, dir.file("cap.mbsg"));
  CHECK(std::filesystem::exists(dir.file("cap.mbsg.json")));
  const RxCapture loaded = io::load_capture(dir.file("cap.mbsg"));
  CHECK(loaded.em_marker_index == cap.em_marker_index);
  CHECK(loaded.sample_rate == cap.sample_rate);
  REQUIRE(loaded.truth.anchors.size() == cap.truth.anchors.size());
  CHECK(loaded.truth.anchors[0].los_delay ==
        Approx(cap.truth.anchors[0].los_delay));
  CHECK(loaded.truth.rx_position.x == Approx(cap.truth.rx_position.x));
  CHECK(loaded.samples.size() == cap.samples.size());
}

TEST_CASE("metasurface JSON round trip") {
  const MetasurfaceConfig cfg = testsupport::test_surface(60, 9);
  const std::string text = io::write_json(cfg);
  const MetasurfaceConfig back = io::read_metasurface(text);
  REQUIRE(back.cells.size() == cfg.cells.size());
  for (std::size_t i = 0; i < cfg.cells.size(); ++i) {
    CHECK(back.cells[i].solid_len == Approx(cfg.cells[i].solid_len).epsilon(1e-12));
    CHECK(back.cells[i].total_len == Approx(cfg.cells[i].total_len).epsilon(1e-12));
  }
  CHECK(back.outer_radius == Approx(cfg.outer_radius));
  CHECK(back.materials.c_solid == cfg.materials.c_solid);
  CHECK(back.materials.atten_exponent == cfg.materials.atten_exponent);
}

TEST_CASE("scenario JSON round trip preserves the channel knobs") {
  ScenarioConfig cfg = testsupport::pool_scenario();
  cfg.noise_snr_db = 17.5;
  cfg.walls = TankWalls{0.0, 2.0, 0.0, 1.5, 0.7};
  cfg.tdma_slot = 0.01;
  const ScenarioConfig back = io::read_scenario(io::write_json(cfg));
  CHECK(back.geometry.depth == cfg.geometry.depth);
  CHECK(back.noise_snr_db.has_value());
  CHECK(*back.noise_snr_db == 17.5);
  REQUIRE(back.walls.has_value());
  CHECK(back.walls->coeff == 0.7);
  CHECK(back.tdma_slot == 0.01);
  CHECK(back.anchors.size() == cfg.anchors.size());
  CHECK(back.receiver_path.size() == cfg.receiver_path.size());
}

TEST_CASE("chirp, frame and suppression JSON round trips") {
  const ChirpSpec chirp = testsupport::default_chirp();
  const ChirpSpec c2 = io::read_chirp(io::write_json(chirp));
  CHECK(c2.f0 == chirp.f0);
  CHECK(c2.bandwidth == chirp.bandwidth);

  AnchorFrame frame;
  frame.anchor_id = 93;
  const AnchorFrame f2 = io::read_frame(io::write_json(frame));
  CHECK(f2.anchor_id == 93);
  CHECK(f2.bit_duration == frame.bit_duration);

  SuppressionParams sp = testsupport::default_suppression();
  const SuppressionParams sp2 = io::read_suppression(io::write_json(sp));
  CHECK(sp2.f_cut == sp.f_cut);
  CHECK(sp2.t_min == sp.t_min);
  CHECK(sp2.grid_bins == sp.grid_bins);
}

TEST_CASE("template library JSON round trip") {
  const ScenarioRuntime rt = ScenarioRuntime::build(testsupport::pool_scenario());
  TemplateBuildOptions opts;
  opts.suppression = testsupport::default_suppression();
  std::vector<double> grid;
  for (double d = 0; d < 360; d += 30) grid.push_back(wrap_angle(deg2rad(d)));
  std::sort(grid.begin(), grid.end());
  const TemplateLibrary lib =
      build_templates(rt, 0, grid, std::vector<double>{2.0},
                      TemplatePlane::Azimuth, opts);
  const TemplateLibrary back = io::read_templates(io::write_json(lib));
  REQUIRE(back.entries.size() == lib.entries.size());
  CHECK(back.plane == lib.plane);
  for (std::size_t i = 0; i < lib.entries.size(); ++i) {
    CHECK(back.entries[i].angle == lib.entries[i].angle);
    CHECK(back.entries[i].feature == lib.entries[i].feature);
  }
}

TEST_CASE("measurement JSON line round trip") {
  AnchorMeasurement m;
  m.anchor_id = 2;
  m.bearing = 0.7;
  m.range = 5.25;
  m.depth = 1.1;
  m.horizontal_range = 5.11;
  m.w_ang = 0.9;
  const AnchorMeasurement back = io::read_measurement(io::write_json(m));
  CHECK(back.anchor_id == 2);
  CHECK(back.bearing == m.bearing);
  CHECK(back.range == m.range);
  CHECK(back.w_ang == m.w_ang);
}

TEST_CASE("overrides patch nested keys and reject malformed input") {
  const std::string base = R"({"a": {"b": 1.0}, "c": true})";
  const std::vector<std::string> ovs{"a.b=2.5", "c=false", "d.e=\"hi\""};
  const std::string patched = io::apply_overrides(base, ovs);
  CHECK(patched.find("2.5") != std::string::npos);
  CHECK(patched.find("false") != std::string::npos);
  CHECK(patched.find("hi") != std::string::npos);

  const std::vector<std::string> bad{"novalue"};
  CHECK_THROWS_AS(io::apply_overrides(base, bad), ConfigError);
}

TEST_CASE("file hash is stable and content sensitive") {
  TempDir dir;
  io::write_text_file(dir.file("x"), "hello");
  io::write_text_file(dir.file("y"), "hello");
  io::write_text_file(dir.file("z"), "hello!");
  CHECK(io::file_hash_hex(dir.file("x")) == io::file_hash_hex(dir.file("y")));
  CHECK(io::file_hash_hex(dir.file("x")) != io::file_hash_hex(dir.file("z")));
  CHECK(io::file_hash_hex(dir.file("x")).size() == 16);
}
