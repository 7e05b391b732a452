#pragma once

#include "dudf/common.hpp"
#include "dudf/field_math.hpp"
#include "dudf/siren.hpp"

#include <cstdint>
#include <filesystem>

namespace dudf {

struct Checkpoint {
  SirenNetwork network;
  ScalingParams alpha{100.0};
  std::uint64_t seed = 0;
};

/// Header line "DUDF1 <hidden_layers> <width> <omega0> <alpha> <seed>", then
/// every parameter as a little-endian float32 in flatten_parameters order.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

/// Throws CheckpointError on a bad magic, truncated payload or a payload
/// whose length does not match the header dims.
Checkpoint load_checkpoint(const std::filesystem::path& path);

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// The network with every parameter rounded to float32, i.e. what a
/// save/load round trip yields.
SirenNetwork quantize_to_float(const SirenNetwork& net);

}  // namespace dudf
