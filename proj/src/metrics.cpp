#include "mreal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "mreal/config.hpp"
#include "mreal/error.hpp"

namespace mreal {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_appliance(const LoadDataset& ds, int app) {
  if (app < 0 || app >= ds.n_app())
    throw Error("appliance index " + std::to_string(app) + " out of range for " + std::to_string(ds.n_app()) +
                " appliances");
}

void check_pool(int steps, int pool) {
  if (pool < 1 || steps % pool != 0)
    throw Error("pool size " + std::to_string(pool) + " does not divide the day length " + std::to_string(steps));
}

// Centers each column and scales it to unit Euclidean norm.
void standardize_columns(Eigen::MatrixXd& m, int app) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    auto col = m.col(c);
    col.array() -= col.mean();
    const double norm = col.norm();
    if (!(norm > 0.0))
      throw Error("step " + std::to_string(c) + " of appliance " + std::to_string(app) +
                  " has zero variance across samples; the correlation is undefined");
    col /= norm;
  }
}

Eigen::MatrixXd pooled(const Eigen::MatrixXd& m, int pool) {
  if (pool == 1) return m;
  Eigen::MatrixXd out(m.rows(), m.cols() / pool);
  for (Eigen::Index c = 0; c < out.cols(); ++c) out.col(c) = m.middleCols(c * pool, pool).rowwise().mean();
  return out;
}

}  // namespace

CorrMatrix cross_corr_matrix(const LoadDataset& ds, int app_a, int app_b, double noise_var, Rng& rng, int pool) {
  if (ds.size() < 2) throw Error("correlation needs at least 2 samples");
  check_appliance(ds, app_a);
  check_appliance(ds, app_b);
  if (!(noise_var >= 0.0)) throw Error("noise variance must be nonnegative");
  const int steps = ds.steps();
  check_pool(steps, pool);
  const auto n = static_cast<Eigen::Index>(ds.size());
  const double sd = std::sqrt(noise_var);

  Eigen::MatrixXd a(n, steps);
  Eigen::MatrixXd b(n, steps);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto& day = ds.samples[s];
    for (int t = 0; t < steps; ++t) a(s, t) = day.at(app_a, t) + (sd > 0.0 ? sd * rng.normal() : 0.0);
    if (app_b == app_a) continue;
    for (int t = 0; t < steps; ++t) b(s, t) = day.at(app_b, t) + (sd > 0.0 ? sd * rng.normal() : 0.0);
  }
  if (app_b == app_a) b = a;
  a = pooled(a, pool);
  b = pooled(b, pool);
  standardize_columns(a, app_a);
  standardize_columns(b, app_b);
  CorrMatrix c = a.transpose() * b;
  return c.cwiseMax(-1.0).cwiseMin(1.0);
}

double corr_matrix_distance(const CorrMatrix& c1, const CorrMatrix& c2) {
  if (c1.rows() != c2.rows() || c1.cols() != c2.cols()) throw ShapeError("correlation matrices differ in shape");
  const double n1 = c1.norm();
  const double n2 = c2.norm();
  if (!(n1 > 0.0) || !(n2 > 0.0)) throw Error("correlation matrix has zero norm");
  const double d = 1.0 - c1.cwiseProduct(c2).sum() / (n1 * n2);
  return std::max(0.0, d);
}

double wasserstein1_1d(std::span<const double> a_in, std::span<const double> b_in) {
  if (a_in.empty() || b_in.empty()) throw Error("Wasserstein distance needs nonempty samples");
  std::vector<double> a(a_in.begin(), a_in.end());
  std::vector<double> b(b_in.begin(), b_in.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::uint64_t n = a.size();
  const std::uint64_t m = b.size();
  if (n == m) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::abs(a[i] - b[i]);
    return s / static_cast<double>(n);
  }
  // Quantile q in (i/n, (i+1)/n] maps to a[i]; on the common grid of
  // multiples of 1/(n*m) the breakpoints are i*m and j*n.
  double s = 0.0;
  std::uint64_t i = 0, j = 0, pos = 0;
  while (i < n && j < m) {
    const std::uint64_t next_a = (i + 1) * m;
    const std::uint64_t next_b = (j + 1) * n;
    const std::uint64_t next = std::min(next_a, next_b);
    s += static_cast<double>(next - pos) * std::abs(a[i] - b[j]);
    pos = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return s / (static_cast<double>(n) * static_cast<double>(m));
}

std::vector<double> random_directions(int dim, int n, Rng& rng) {
  if (dim < 1 || n < 1) throw Error("projection count and dimension must be positive");
  std::vector<double> dirs(static_cast<std::size_t>(dim) * n);
  for (int p = 0; p < n; ++p) {
    double* u = dirs.data() + static_cast<std::size_t>(p) * dim;
    double sq = 0.0;
    do {
      sq = 0.0;
      for (int k = 0; k < dim; ++k) {
        u[k] = rng.normal();
        sq += u[k] * u[k];
      }
    } while (!(sq > 0.0));
    const double inv = 1.0 / std::sqrt(sq);
    for (int k = 0; k < dim; ++k) u[k] *= inv;
  }
  return dirs;
}

double sliced_wasserstein(const PointCloud& a, const PointCloud& b, std::span<const double> directions) {
  if (a.dim != b.dim) throw ShapeError("point clouds differ in dimension");
  if (a.count() == 0 || b.count() == 0) throw Error("point clouds must be nonempty");
  const int dim = a.dim;
  if (directions.empty() || directions.size() % dim != 0) throw ShapeError("directions do not match the dimension");
  const auto n_proj = static_cast<Eigen::Index>(directions.size() / dim);
  const Eigen::Map<const RowMatrix> pa(a.values.data(), static_cast<Eigen::Index>(a.count()), dim);
  const Eigen::Map<const RowMatrix> pb(b.values.data(), static_cast<Eigen::Index>(b.count()), dim);
  const Eigen::Map<const RowMatrix> dirs(directions.data(), n_proj, dim);

  std::vector<double> per_proj(n_proj);
  constexpr Eigen::Index kChunk = 32;
  for (Eigen::Index start = 0; start < n_proj; start += kChunk) {
    const Eigen::Index len = std::min(kChunk, n_proj - start);
    const Eigen::MatrixXd ya = pa * dirs.middleRows(start, len).transpose();
    const Eigen::MatrixXd yb = pb * dirs.middleRows(start, len).transpose();
#pragma omp parallel for schedule(dynamic)
    for (Eigen::Index p = 0; p < len; ++p) {
      per_proj[start + p] = wasserstein1_1d(std::span<const double>(ya.col(p).data(), ya.rows()),
                                            std::span<const double>(yb.col(p).data(), yb.rows()));
    }
  }
  double s = 0.0;
  for (double v : per_proj) s += v;
  return s / static_cast<double>(n_proj);
}

double sliced_wasserstein(const PointCloud& a, const PointCloud& b, int n_proj, Rng& rng) {
  if (a.dim != b.dim) throw ShapeError("point clouds differ in dimension");
  return sliced_wasserstein(a, b, random_directions(a.dim, n_proj, rng));
}

Subsequences extract_subsequences(const LoadDataset& ds, int appliance, int count, int length, Rng& rng) {
  check_appliance(ds, appliance);
  const int steps = ds.steps();
  if (length < 1 || length > steps)
    throw Error("sub-sequence length " + std::to_string(length) + " exceeds the day length " + std::to_string(steps));
  if (count < 1) throw Error("sub-sequence count must be positive");
  Subsequences out;
  out.cloud.dim = length;
  const std::size_t total = ds.size() * static_cast<std::size_t>(count);
  out.cloud.values.resize(total * length);
  out.profile.reserve(total);
  out.offset.reserve(total);
  const auto span = static_cast<std::uint64_t>(steps - length + 1);
  double* dst = out.cloud.values.data();
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const double* src = ds.samples[s].channel(appliance);
    for (int k = 0; k < count; ++k) {
      const int off = static_cast<int>(rng.below(span));
      std::copy(src + off, src + off + length, dst);
      dst += length;
      out.profile.push_back(static_cast<int>(s));
      out.offset.push_back(off);
    }
  }
  return out;
}

PointCloud avg_pool_profiles(const LoadDataset& ds, int appliance, int pool) {
  check_appliance(ds, appliance);
  const int steps = ds.steps();
  check_pool(steps, pool);
  const int dim = steps / pool;
  PointCloud out(dim, std::vector<double>(ds.size() * static_cast<std::size_t>(dim)));
  for (std::size_t s = 0; s < ds.size(); ++s) {
    const double* src = ds.samples[s].channel(appliance);
    for (int w = 0; w < dim; ++w) {
      double sum = 0.0;
      for (int t = 0; t < pool; ++t) sum += src[w * pool + t];
      out.values[s * dim + w] = sum / pool;
    }
  }
  return out;
}

std::vector<double> load_values(const LoadDataset& ds, int appliance) {
  check_appliance(ds, appliance);
  std::vector<double> out;
  out.reserve(ds.size() * static_cast<std::size_t>(ds.steps()));
  for (const auto& day : ds.samples) out.insert(out.end(), day.channel(appliance), day.channel(appliance) + day.steps);
  return out;
}

MetricReport evaluate(const LoadDataset& real, const LoadDataset& generated, const EvalOptions& options) {
  if (real.normalized || generated.normalized) throw Error("evaluation needs raw-scale datasets");
  if (real.size() == 0 || generated.size() == 0) throw Error("evaluation needs nonempty datasets");
  if (real.n_app() != generated.n_app() || real.steps() != generated.steps())
    throw ShapeError("datasets differ in shape: " + std::to_string(real.n_app()) + "x" + std::to_string(real.steps()) +
                     " vs " + std::to_string(generated.n_app()) + "x" + std::to_string(generated.steps()));
  if (real.size() != generated.size())
    throw Error("datasets differ in sample count: " + std::to_string(real.size()) + " vs " +
                std::to_string(generated.size()));
  const std::uint64_t seed = options.seed;
  const bool shared = options.shared_streams;
  MetricReport report;

  if (real.n_app() >= 2) {
    Rng noise_real = Rng::derive(seed, 1);
    Rng noise_gen = Rng::derive(seed, shared ? 1 : 2);
    const auto c_real = cross_corr_matrix(real, 0, 1, options.noise_var, noise_real, options.interdependency_pool);
    const auto c_gen = cross_corr_matrix(generated, 0, 1, options.noise_var, noise_gen, options.interdependency_pool);
    report.interdependency = corr_matrix_distance(c_real, c_gen);
  }

  for (int j = 0; j < real.n_app(); ++j) {
    ApplianceMetrics m;
    m.load_values_w1 = wasserstein1_1d(load_values(real, j), load_values(generated, j));

    Rng win_real = Rng::derive(seed, 10 + 2 * static_cast<std::uint64_t>(j));
    Rng win_gen = Rng::derive(seed, (shared ? 10 : 11) + 2 * static_cast<std::uint64_t>(j));
    const auto sub_real = extract_subsequences(real, j, options.subsequence_count, options.subsequence_length, win_real);
    const auto sub_gen =
        extract_subsequences(generated, j, options.subsequence_count, options.subsequence_length, win_gen);
    Rng dir_sub = Rng::derive(seed, 1000 + static_cast<std::uint64_t>(j));
    m.subsequences_swd = sliced_wasserstein(sub_real.cloud, sub_gen.cloud, options.subsequence_projections, dir_sub);

    Rng dir_prof = Rng::derive(seed, 2000 + static_cast<std::uint64_t>(j));
    m.profiles_swd = sliced_wasserstein(avg_pool_profiles(real, j, options.profile_pool),
                                        avg_pool_profiles(generated, j, options.profile_pool),
                                        options.profile_projections, dir_prof);
    report.per_appliance.push_back(m);
  }
  return report;
}

void write_report(const MetricReport& report, std::ostream& out) {
  out << "metric,appliance,value\n";
  if (report.interdependency) out << "interdependency,all," << format_real(*report.interdependency) << '\n';
  for (std::size_t j = 0; j < report.per_appliance.size(); ++j) {
    const auto& m = report.per_appliance[j];
    out << "load_values_w1," << j << ',' << format_real(m.load_values_w1) << '\n';
    out << "subsequences_swd," << j << ',' << format_real(m.subsequences_swd) << '\n';
    out << "profiles_swd," << j << ',' << format_real(m.profiles_swd) << '\n';
  }
}

void write_report(const MetricReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_report(report, out);
}

}  // namespace mreal
