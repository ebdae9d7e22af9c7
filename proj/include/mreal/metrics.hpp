#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mreal/data.hpp"
#include "mreal/rng.hpp"

namespace mreal {

/// Points of a common dimension, stored row-major (point i occupies
/// values[i * dim .. i * dim + dim)).
struct PointCloud {
  int dim = 1;
  std::vector<double> values;

  PointCloud() = default;
  PointCloud(int d, std::vector<double> v) : dim(d), values(std::move(v)) {}

  std::size_t count() const { return dim > 0 ? values.size() / static_cast<std::size_t>(dim) : 0; }
  const double* point(std::size_t i) const { return values.data() + i * dim; }
};

using CorrMatrix = Eigen::MatrixXd;

/// Pearson correlation across samples between appliance `app_a` at step i and
/// appliance `app_b` at step j, after adding N(0, noise_var) noise to every
/// value. With pool > 1 each profile is average-pooled first.
CorrMatrix cross_corr_matrix(const LoadDataset& ds, int app_a, int app_b, double noise_var, Rng& rng, int pool = 1);

/// 1 - tr(c1^T c2) / (|c1|_F |c2|_F).
double corr_matrix_distance(const CorrMatrix& c1, const CorrMatrix& c2);

/// Exact 1-D Wasserstein-1 distance between two empirical distributions.
double wasserstein1_1d(std::span<const double> a, std::span<const double> b);

/// `n` unit directions in R^dim (normalized Gaussian vectors), row-major.
std::vector<double> random_directions(int dim, int n, Rng& rng);

/// Mean 1-D Wasserstein-1 distance over the given projection directions.
double sliced_wasserstein(const PointCloud& a, const PointCloud& b, std::span<const double> directions);
double sliced_wasserstein(const PointCloud& a, const PointCloud& b, int n_proj, Rng& rng);

struct Subsequences {
  PointCloud cloud;
  std::vector<int> profile;  // source sample of each window
  std::vector<int> offset;   // start step of each window
};

/// `count` windows of `length` steps per profile, start uniform on [0, T - length].
Subsequences extract_subsequences(const LoadDataset& ds, int appliance, int count, int length, Rng& rng);

/// One point per profile: means over consecutive windows of `pool` steps.
PointCloud avg_pool_profiles(const LoadDataset& ds, int appliance, int pool);

/// Every load value of one appliance as a 1-D cloud.
std::vector<double> load_values(const LoadDataset& ds, int appliance);

struct ApplianceMetrics {
  double load_values_w1 = 0.0;
  double subsequences_swd = 0.0;
  double profiles_swd = 0.0;
};

struct MetricReport {
  /// Absent when the datasets hold a single appliance.
  std::optional<double> interdependency;
  std::vector<ApplianceMetrics> per_appliance;
};

struct EvalOptions {
  std::uint64_t seed = 0;
  double noise_var = 1e-5;
  int interdependency_pool = 1;
  int subsequence_count = 32;
  int subsequence_length = 45;
  int subsequence_projections = 128;
  int profile_pool = 5;
  int profile_projections = 512;
  /// Use the same noise and window streams for both datasets, so that a
  /// dataset compared with itself scores exactly zero.
  bool shared_streams = false;
};

/// Both datasets must be raw (watts) with matching appliance count and day length.
MetricReport evaluate(const LoadDataset& real, const LoadDataset& generated, const EvalOptions& options);

/// `metric,appliance,value` rows.
void write_report(const MetricReport& report, std::ostream& out);
void write_report(const MetricReport& report, const std::filesystem::path& path);

}  // namespace mreal
