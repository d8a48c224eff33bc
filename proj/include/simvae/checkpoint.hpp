#pragma once

// Binary checkpoint layout (all integers little-endian):
//
//   "SIMVAE1\n"
//   repeated:  u32 name_len, name bytes (UTF-8), u32 rank, rank × u32 dims,
//              prod(dims) × f64 values
//   u32 0      (end of tensor records)
//   metadata   JSON text to end of file (step, seed, config_hash, ...)

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "simvae/adam.hpp"
#include "simvae/tape.hpp"
#include "simvae/tensor.hpp"

namespace simvae {

struct NamedTensor {
  std::string name;
  Tensor value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  std::vector<NamedTensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();

  const Tensor* find(std::string_view name) const;
  void put(std::string name, Tensor value);

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Stores every parameter value under its own name.
void export_parameters(const ParameterSet& params, Checkpoint& ckpt);
/// Copies values for every parameter in `params`; all must be present with
/// matching shapes.
void import_parameters(ParameterSet& params, const Checkpoint& ckpt);

/// Optimizer moments go under "adam.m/<param>" and "adam.v/<param>", the
/// step counter under metadata["adam_t"].
void export_adam(const Adam& adam, const ParameterSet& params, Checkpoint& ckpt);
void import_adam(Adam& adam, const ParameterSet& params, const Checkpoint& ckpt);

}  // namespace simvae
