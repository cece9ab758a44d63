#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "abc/network.hpp"
#include "abc/optim.hpp"

namespace abc {

// Binary layout, all integers little-endian:
//   "ABCK"  u32 version(=1)
//   u32 count, then per tensor: u16 name_len, name bytes, u8 rank,
//       u32 dims[rank], f32 payload[prod(dims)]        (parameters)
//   u32 count, same framing                             (optimizer moments)
//   u64 step

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointErrorCode { io, bad_magic, version_mismatch, truncated_payload, malformed, parameter_mismatch };

std::string to_string(CheckpointErrorCode code);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& what)
      : std::runtime_error(to_string(code) + ": " + what), code_(code) {}
  CheckpointErrorCode code() const { return code_; }

 private:
  CheckpointErrorCode code_;
};

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::vector<StoredTensor> parameters;
  std::vector<StoredTensor> moments;  // "adam.m.<param>" then "adam.v.<param>"
  std::uint64_t step = 0;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes);

Checkpoint make_checkpoint(const AbcNet& model, const AdamWState& state);
/// Copies parameters and moments into `model` / `state`; names and shapes
/// must match the model exactly.
void restore_checkpoint(const Checkpoint& ckpt, AbcNet& model, AdamWState& state);

void save_checkpoint(const AbcNet& model, const AdamWState& state, const std::filesystem::path& path);
void load_checkpoint(const std::filesystem::path& path, AbcNet& model, AdamWState& state);
Checkpoint read_checkpoint_file(const std::filesystem::path& path);

}  // namespace abc
