#pragma once

#include <span>
#include <string>
#include <vector>

#include "metablue/ams_model.hpp"
#include "metablue/ams_optimizer.hpp"
#include "metablue/channel.hpp"
#include "metablue/estimators.hpp"
#include "metablue/receiver_dsp.hpp"
#include "metablue/waveform.hpp"

namespace metablue::io {

// ---- binary formats ----

/// Gain table file: magic "MBGT", version u16, M u32, L u32 (little-endian),
/// angle grid f64, freq grid f64, then M*L (re, im) f64 pairs row-major by
/// angle.
void save_gain_table(const DirectionalGainTable& table, const std::string& path);
DirectionalGainTable load_gain_table(const std::string& path);

/// Sample file: magic "MBSG", version u16, sample_rate f64, count u64, then
/// f32 little-endian samples.
void save_samples(std::span<const double> samples, double sample_rate,
                  const std::string& path);

struct LoadedSamples {
  std::vector<double> samples;
  double sample_rate = 0.0;
};
LoadedSamples load_samples(const std::string& path);

/// Capture persists as an MBSG file plus a "<path>.json" sidecar carrying
/// em_marker_index, the collision flag, and the truth block.
void save_capture(const RxCapture& capture, const std::string& path);
RxCapture load_capture(const std::string& path);

// ---- JSON ----

std::string write_json(const MetasurfaceConfig& cfg);
MetasurfaceConfig read_metasurface(const std::string& json);

std::string write_json(const ChirpSpec& spec);
ChirpSpec read_chirp(const std::string& json);

std::string write_json(const AnchorFrame& frame);
AnchorFrame read_frame(const std::string& json);

std::string write_json(const SuppressionParams& params);
SuppressionParams read_suppression(const std::string& json);

std::string write_json(const ScenarioConfig& cfg);
ScenarioConfig read_scenario(const std::string& json);

std::string write_json(const TemplateLibrary& lib);
TemplateLibrary read_templates(const std::string& json);

std::string write_json(const EnvelopeFeature& feature);
EnvelopeFeature read_feature(const std::string& json);

std::string write_json(const AnchorMeasurement& m);
AnchorMeasurement read_measurement(const std::string& json);

// ---- files ----

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// FNV-1a 64 hash of a file's bytes, as a hex string. Used in run manifests.
std::string file_hash_hex(const std::string& path);

/// Applies "a.b.c=value" style overrides onto a JSON document. Values parse
/// as JSON when possible, otherwise as strings.
std::string apply_overrides(const std::string& json,
                            std::span<const std::string> overrides);

}  // namespace metablue::io
