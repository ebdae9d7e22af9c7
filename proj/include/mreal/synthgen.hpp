#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mreal/data.hpp"

namespace mreal {

/// Two-appliance ground truth: a washer pulse on some days and, after it,
/// sometimes a dryer pulse. Durations and lags are in time steps, powers in watts.
struct SynthConfig {
  int n_samples = 1000;
  int steps = kStepsPerDay;
  double op_prob = 0.3;
  double wm_power_min = 400.0;
  double wm_power_max = 2200.0;
  double td_power_min = 1500.0;
  double td_power_max = 2500.0;
  int wm_duration_min = 30;
  int wm_duration_max = 60;
  int td_duration_min = 30;
  int td_duration_max = 60;
  double follow_prob = 0.6;
  int lag_min = 0;
  int lag_max = 60;
  /// Per-step floor drawn uniform on [0, noise_floor].
  double noise_floor = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
  /// Applies `key = value` entries named like the fields; throws on unknown keys.
  void apply(const std::map<std::string, std::string>& kv);
};

/// Sample i is drawn from its own stream derived from (seed, i).
LoadDataset generate_synthetic(const SynthConfig& cfg);

}  // namespace mreal
