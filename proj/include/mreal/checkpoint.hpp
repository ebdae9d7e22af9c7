#pragma once

#include <filesystem>

#include "mreal/data.hpp"
#include "mreal/model.hpp"
#include "mreal/training.hpp"

namespace mreal {

/// On-disk training snapshot. A checkpoint is a directory holding
///   manifest.txt  - `meta <key> <value>` and `tensor <name> <dtype> <shape> <offset>` lines
///   tensors.bin   - little-endian payload (f32 for parameters, i32 for the epoch order)
/// The EMA generator stored under `ema.` is the evaluation generator.
struct Checkpoint {
  ArchConfig arch;
  TrainConfig config;
  NormStats stats;
  TrainingState state;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace mreal
