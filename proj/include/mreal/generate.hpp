#pragma once

#include <cstdint>
#include <filesystem>

#include "mreal/checkpoint.hpp"
#include "mreal/data.hpp"

namespace mreal {

struct GenerateRequest {
  int n_samples = 1;
  std::uint64_t seed = 0;
  bool require_operation = false;
  /// Watts; a sample shows an operation when some appliance peaks at or above it.
  double operation_threshold = 10.0;
  int max_resamples = 100;
};

/// Runs the EMA generator in eval mode on unit-norm latents and maps the
/// output back to watts. Negative values (possible only with a tanh output
/// under six-sigma scaling) are clipped to zero.
LoadDataset generate_samples(const Checkpoint& ckpt, const GenerateRequest& req);

bool has_operation(const LoadDay& day, double threshold);

/// One `<sample_id>.csv` per sample with columns step, a0, a1, ...
void write_plot_files(const LoadDataset& ds, const std::filesystem::path& dir);

}  // namespace mreal
