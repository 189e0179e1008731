#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "gldb/network.hpp"
#include "gldb/optim.hpp"
#include "gldb/params.hpp"

// GLDB1 checkpoint: a text header followed by a raw little-endian float32
// payload.
//
//   GLDB1
//   [config]            NetworkConfig as `key = value` lines
//   [state]             iteration = N, adam_steps = N
//   [manifest]          one `name rank dims... offset` line per tensor
//   [payload] BYTES
//   <BYTES of float32 data>
//
// Offsets are in bytes from the start of the payload. Optimizer moments are
// stored as extra tensors named `adam.m/<param>` and `adam.v/<param>`.
namespace gldb::checkpoint {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Missing or wrong "GLDB1" magic.
class MagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Manifest entries outside the payload, overlapping, or a truncated file.
class BoundsError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Stored tensors do not match the parameters of the requested config.
class ShapeMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

/// Malformed header text.
class FormatError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

struct Checkpoint {
  network::NetworkConfig config;
  ParameterSet<float> params;
  std::optional<optim::AdamState<float>> adam;
  std::uint64_t iteration = 0;
};

void save(const std::string& path, const Checkpoint& checkpoint);

/// Loads and validates a checkpoint. With `expected`, the stored config must
/// produce the same parameter names and shapes.
Checkpoint load(const std::string& path, const std::optional<network::NetworkConfig>& expected = std::nullopt);

}  // namespace gldb::checkpoint
