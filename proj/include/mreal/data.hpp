#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mreal {

/// Number of 2-minute steps in a day.
inline constexpr int kStepsPerDay = 720;

enum class DayType { weekday, weekend, unknown };

std::string to_string(DayType d);
DayType parse_day_type(const std::string& s);

/// One day of load for every appliance, stored appliance-major
/// (values[j * steps + t]).
struct LoadDay {
  std::string sample_id;
  DayType day_type = DayType::unknown;
  int n_app = 0;
  int steps = kStepsPerDay;
  std::vector<double> values;

  LoadDay() = default;
  LoadDay(std::string id, int n_app, int steps = kStepsPerDay, DayType day = DayType::unknown)
      : sample_id(std::move(id)), day_type(day), n_app(n_app), steps(steps),
        values(static_cast<std::size_t>(n_app) * steps, 0.0) {}

  double& at(int appliance, int t) { return values[static_cast<std::size_t>(appliance) * steps + t]; }
  double at(int appliance, int t) const { return values[static_cast<std::size_t>(appliance) * steps + t]; }
  const double* channel(int appliance) const { return values.data() + static_cast<std::size_t>(appliance) * steps; }
  double* channel(int appliance) { return values.data() + static_cast<std::size_t>(appliance) * steps; }
};

enum class NormScheme { six_sigma, minmax_tanh };

struct NormStats {
  NormScheme scheme = NormScheme::six_sigma;
  /// Population standard deviation of each appliance's load values (watts).
  std::vector<double> sigma;
  /// Per-appliance range, used only by the minmax_tanh scheme.
  std::vector<double> min;
  std::vector<double> max;

  bool empty() const { return sigma.empty(); }
};

struct LoadDataset {
  std::vector<LoadDay> samples;
  NormStats stats;
  bool normalized = false;

  std::size_t size() const { return samples.size(); }
  int n_app() const { return samples.empty() ? 0 : samples.front().n_app; }
  int steps() const { return samples.empty() ? kStepsPerDay : samples.front().steps; }
};

/// Reads the wide-form CSV dataset. Throws IngestError naming the offending line.
LoadDataset ingest_csv(const std::filesystem::path& path);
LoadDataset read_csv(std::istream& in);

/// Writes the canonical CSV form: values with at most 6 decimals, trailing
/// zeros trimmed. Canonical files re-serialize byte-identically.
void write_csv(const LoadDataset& ds, const std::filesystem::path& path);
void write_csv(const LoadDataset& ds, std::ostream& out);

/// Canonical text form of one load value.
std::string format_value(double v);

NormStats compute_stats(const LoadDataset& ds, NormScheme scheme = NormScheme::six_sigma);
LoadDataset normalize(const LoadDataset& ds, const NormStats& stats);
LoadDataset denormalize(const LoadDataset& ds);

/// Stats file: one `appliance_index,sigma` line per appliance
/// (`appliance_index,sigma,min,max` under minmax_tanh).
void write_stats(const NormStats& stats, const std::filesystem::path& path);
NormStats read_stats(const std::filesystem::path& path);

/// Throws if samples disagree in shape or hold raw values that are negative or non-finite.
void validate(const LoadDataset& ds);

}  // namespace mreal
