#include "mreal/synthgen.hpp"

#include <charconv>
#include <cstdio>

#include "mreal/config.hpp"
#include "mreal/error.hpp"
#include "mreal/rng.hpp"

namespace mreal {

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error("invalid synthetic config: " + what);
  };
  require(n_samples >= 0, "n_samples must be nonnegative");
  require(steps >= 1, "steps must be positive");
  require(op_prob >= 0.0 && op_prob <= 1.0, "op_prob must lie in [0, 1]");
  require(follow_prob >= 0.0 && follow_prob <= 1.0, "follow_prob must lie in [0, 1]");
  require(wm_power_min >= 0.0 && wm_power_min <= wm_power_max, "washer power range is invalid");
  require(td_power_min >= 0.0 && td_power_min <= td_power_max, "dryer power range is invalid");
  require(wm_duration_min >= 1 && wm_duration_min <= wm_duration_max, "washer duration range is invalid");
  require(td_duration_min >= 1 && td_duration_min <= td_duration_max, "dryer duration range is invalid");
  require(wm_duration_max <= steps, "washer duration " + std::to_string(wm_duration_max) + " exceeds the day");
  require(td_duration_max <= steps, "dryer duration " + std::to_string(td_duration_max) + " exceeds the day");
  require(lag_min >= 0 && lag_min <= lag_max, "lag range is invalid");
  require(noise_floor >= 0.0, "noise_floor must be nonnegative");
}

void SynthConfig::apply(const std::map<std::string, std::string>& kv) {
  for (const auto& [key, value] : kv) {
    auto as_int = [&] { return static_cast<int>(parse_int(key, value)); };
    if (key == "n_samples") n_samples = as_int();
    else if (key == "steps") steps = as_int();
    else if (key == "op_prob") op_prob = parse_real(key, value);
    else if (key == "wm_power_min") wm_power_min = parse_real(key, value);
    else if (key == "wm_power_max") wm_power_max = parse_real(key, value);
    else if (key == "td_power_min") td_power_min = parse_real(key, value);
    else if (key == "td_power_max") td_power_max = parse_real(key, value);
    else if (key == "wm_duration_min") wm_duration_min = as_int();
    else if (key == "wm_duration_max") wm_duration_max = as_int();
    else if (key == "td_duration_min") td_duration_min = as_int();
    else if (key == "td_duration_max") td_duration_max = as_int();
    else if (key == "follow_prob") follow_prob = parse_real(key, value);
    else if (key == "lag_min") lag_min = as_int();
    else if (key == "lag_max") lag_max = as_int();
    else if (key == "noise_floor") noise_floor = parse_real(key, value);
    else if (key == "seed") {
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
      if (ec != std::errc() || ptr != value.data() + value.size())
        throw Error("config key 'seed': expected an unsigned integer, got '" + value + "'");
    } else {
      throw Error("unknown synthetic config key '" + key + "'");
    }
  }
}

namespace {

int uniform_int(Rng& rng, int lo, int hi) { return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))); }

double uniform_real(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

LoadDay synth_day(const SynthConfig& cfg, int index) {
  char id[32];
  std::snprintf(id, sizeof id, "syn_%06d", index);
  LoadDay day(id, 2, cfg.steps, index % 7 >= 5 ? DayType::weekend : DayType::weekday);
  Rng rng = Rng::derive(cfg.seed, static_cast<std::uint64_t>(index));
  if (rng.uniform() < cfg.op_prob) {
    const int wm_len = uniform_int(rng, cfg.wm_duration_min, cfg.wm_duration_max);
    const int wm_start = uniform_int(rng, 0, cfg.steps - wm_len);
    const double wm_power = uniform_real(rng, cfg.wm_power_min, cfg.wm_power_max);
    for (int t = wm_start; t < wm_start + wm_len; ++t) day.at(0, t) = wm_power;
    if (rng.uniform() < cfg.follow_prob) {
      const int lag = uniform_int(rng, cfg.lag_min, cfg.lag_max);
      const int td_len = uniform_int(rng, cfg.td_duration_min, cfg.td_duration_max);
      const double td_power = uniform_real(rng, cfg.td_power_min, cfg.td_power_max);
      const int td_start = wm_start + wm_len + lag;
      for (int t = td_start; t < std::min(cfg.steps, td_start + td_len); ++t) day.at(1, t) = td_power;
    }
  }
  if (cfg.noise_floor > 0.0)
    for (auto& v : day.values) v += cfg.noise_floor * rng.uniform();
  return day;
}

}  // namespace

LoadDataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  LoadDataset ds;
  ds.samples.resize(cfg.n_samples);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < cfg.n_samples; ++i) ds.samples[i] = synth_day(cfg, i);
  return ds;
}

}  // namespace mreal
