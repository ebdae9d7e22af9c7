#include "mreal/generate.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include <spdlog/spdlog.h>

#include "mreal/error.hpp"

namespace mreal {

namespace {

constexpr int kGenerateBatch = 64;

// Raw-scale days for the given unit-norm latents.
std::vector<LoadDay> run_generator(const Checkpoint& ckpt, const BatchTensor<float>& z) {
  const auto& arch = ckpt.arch;
  LoadDataset ds;
  ds.normalized = true;
  ds.stats = ckpt.stats;
  ds.samples.reserve(z.batch);
  for (int start = 0; start < z.batch; start += kGenerateBatch) {
    const int n = std::min(kGenerateBatch, z.batch - start);
    BatchTensor<float> zb(n, arch.latent_dim, 1);
    std::copy(z.sample(start), z.sample(start) + n * z.sample_size(), zb.data.begin());
    const auto out = generator_forward(arch, ckpt.state.ema.shadow, zb, Mode::eval);
    for (int b = 0; b < n; ++b) {
      LoadDay day("", arch.n_app, arch.length());
      std::copy(out.sample(b), out.sample(b) + out.sample_size(), day.values.begin());
      ds.samples.push_back(std::move(day));
    }
  }
  auto raw = denormalize(ds);
  for (auto& day : raw.samples)
    for (auto& v : day.values) v = std::max(0.0, v);
  return std::move(raw.samples);
}

}  // namespace

bool has_operation(const LoadDay& day, double threshold) {
  return std::any_of(day.values.begin(), day.values.end(), [&](double v) { return v >= threshold; });
}

LoadDataset generate_samples(const Checkpoint& ckpt, const GenerateRequest& req) {
  if (req.n_samples < 1) throw Error("the number of samples must be positive");
  if (!(req.operation_threshold >= 0.0)) throw Error("operation threshold must be nonnegative");
  if (req.max_resamples < 0) throw Error("max_resamples must be nonnegative");
  if (ckpt.stats.empty()) throw Error("checkpoint holds no normalization statistics");
  if (static_cast<int>(ckpt.stats.sigma.size()) != ckpt.arch.n_app)
    throw Error("checkpoint statistics do not match the appliance count");

  Rng rng(req.seed);
  const auto z = sample_latents<float>(req.n_samples, ckpt.arch.latent_dim, rng);
  auto days = run_generator(ckpt, z);

  if (req.require_operation) {
    std::vector<int> pending;
    for (int i = 0; i < req.n_samples; ++i)
      if (!has_operation(days[i], req.operation_threshold)) pending.push_back(i);
    for (int round = 0; round < req.max_resamples && !pending.empty(); ++round) {
      const auto zr = sample_latents<float>(static_cast<int>(pending.size()), ckpt.arch.latent_dim, rng);
      auto redo = run_generator(ckpt, zr);
      std::vector<int> still;
      for (std::size_t k = 0; k < pending.size(); ++k) {
        days[pending[k]] = std::move(redo[k]);
        if (!has_operation(days[pending[k]], req.operation_threshold)) still.push_back(pending[k]);
      }
      pending = std::move(still);
    }
    if (!pending.empty())
      spdlog::warn("{} samples show no operation after {} resamples; keeping the last draw", pending.size(),
                   req.max_resamples);
  }

  LoadDataset ds;
  ds.stats = ckpt.stats;
  ds.samples = std::move(days);
  for (int i = 0; i < req.n_samples; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "gen_%06d", i);
    ds.samples[i].sample_id = id;
    ds.samples[i].day_type = DayType::unknown;
  }
  return ds;
}

void write_plot_files(const LoadDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& day : ds.samples) {
    const auto path = dir / (day.sample_id + ".csv");
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "step";
    for (int j = 0; j < day.n_app; ++j) out << ",a" << j;
    out << '\n';
    for (int t = 0; t < day.steps; ++t) {
      out << t;
      for (int j = 0; j < day.n_app; ++j) out << ',' << format_value(day.at(j, t));
      out << '\n';
    }
  }
}

}  // namespace mreal
