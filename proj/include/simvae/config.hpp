#pragma once

// Run configuration: flat `key = value` lines grouped under [section]
// headers. `#` starts a comment. Every key has a default, so an empty file is
// a valid config; serialize() always writes the full canonical form.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "simvae/metrics.hpp"
#include "simvae/models.hpp"
#include "simvae/simulators.hpp"
#include "simvae/trainer.hpp"

namespace simvae {

struct RunConfig {
  std::uint64_t seed = 0;
  /// Relative paths are resolved against the config file's directory.
  std::string output_dir = "run";
  bool record_time = false;

  sim::SimulatorOptions simulator;
  ModelConfig model;
  StageConfig decoder = default_stage(Stage::Decoder);
  StageConfig encoder = default_stage(Stage::Encoder);
  StageConfig baseline = default_stage(Stage::Baseline);
  metrics::BinningConfig metrics;
  metrics::RlcFilter rlc_filter;

  static StageConfig default_stage(Stage s);

  /// Stage settings with the per-stage seed derived from the root seed.
  StageConfig stage(Stage s) const;

  /// Throws std::invalid_argument for an unknown simulator or any invalid
  /// stage, model or binning setting.
  void validate() const;
};

bool operator==(const RunConfig& a, const RunConfig& b);

/// Throws FormatError (with the line number) on malformed lines, unknown
/// sections or keys, and unparseable values.
RunConfig parse_config(std::string_view text);
std::string serialize_config(const RunConfig& cfg);

RunConfig load_config(const std::filesystem::path& path);

/// FNV-1a of the canonical serialization, stored in checkpoint metadata.
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace simvae
