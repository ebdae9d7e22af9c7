#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mreal/augment.hpp"
#include "mreal/data.hpp"
#include "mreal/model.hpp"
#include "mreal/rng.hpp"

namespace mreal {

struct TrainConfig {
  double lambda_gp = 10.0;
  double beta_drift = 1e-3;
  double learning_rate = 1e-5;
  int minibatch = 64;
  int n_dstep = 5;
  std::int64_t total_steps = 100000;
  double aug_rho = 1024.0;
  double aug_eta = 200.0;
  bool aug_rho_is_variance = true;
  bool aug_eta_is_rate = true;
  double ema_decay = 0.999;
  double rmsprop_smoothing = 0.9;
  double rmsprop_epsilon = 1e-8;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_interval = 1000;

  void validate() const;
  AugmentParams augment() const { return {aug_rho, aug_eta, aug_rho_is_variance, aug_eta_is_rate}; }

  /// Applies `key = value` entries; throws on unknown keys or bad values.
  /// Keys that are not training keys are returned untouched.
  std::map<std::string, std::string> apply(const std::map<std::string, std::string>& kv);
  std::map<std::string, std::string> to_map() const;
};

struct StepReport {
  std::int64_t step = 0;
  double w_tilde = 0.0;
  double grad_penalty = 0.0;
  double drift_penalty = 0.0;
  double gen_loss = 0.0;
};

// ---------------------------------------------------------------------------
// Loss terms.

/// mean(real) - mean(fake).
template <typename S>
double w_distance(std::span<const S> real, std::span<const S> fake);

/// beta * (mean(real) + mean(fake))^2.
template <typename S>
double drift_penalty(std::span<const S> real, std::span<const S> fake, double beta);

/// Per-sample convex combination eps[b] * real + (1 - eps[b]) * fake.
template <typename S>
BatchTensor<S> interpolate(const BatchTensor<S>& real, const BatchTensor<S>& fake, std::span<const double> eps);
LoadDay interpolate(const LoadDay& real, const LoadDay& fake, double eps);

/// lambda * max(0, w_tilde) * mean_b max(0, |grad_x D(x_hat_b)|_2 - 1)^2.
/// Throws TrainingError if an input gradient is non-finite.
template <typename S>
double gradient_penalty(const ArchConfig& arch, const DiscriminatorParams<S>& d, const BatchTensor<S>& x_hat,
                        double w_tilde, double lambda);

struct DiscriminatorLoss {
  double total = 0.0;
  double w_tilde = 0.0;
  double grad_penalty = 0.0;
  double drift_penalty = 0.0;
};

/// -W + P_g + P_c on already-augmented batches, with the full parameter
/// gradient (including the dependence of the penalty scale on W) accumulated
/// into `grads` when non-null.
template <typename S>
DiscriminatorLoss discriminator_loss(const ArchConfig& arch, const DiscriminatorParams<S>& d,
                                     const BatchTensor<S>& real, const BatchTensor<S>& fake,
                                     const BatchTensor<S>& x_hat, double lambda_gp, double beta_drift,
                                     DiscriminatorParams<S>* grads);

/// Augmentation applied to generated samples inside the generator loss:
/// rotation by `delta`, then additive `noise` (same shape as the output).
template <typename S>
struct FakeAugmentation {
  int delta = 0;
  BatchTensor<S> noise;
};

/// -mean D(aug(G(z))) with G in train mode. Accumulates generator gradients
/// into `grads` when non-null; `trace` receives the generator trace.
template <typename S>
double generator_loss(const ArchConfig& arch, const GeneratorParams<S>& g, const DiscriminatorParams<S>& d,
                      const BatchTensor<S>& z, const FakeAugmentation<S>& aug, GeneratorParams<S>* grads,
                      GeneratorTrace<S>* trace = nullptr);

/// acc <- s * acc + (1 - s) * g^2;  param <- param - lr * g / sqrt(acc + eps).
template <typename S>
void rmsprop_update(std::span<S> param, std::span<const S> grad, std::span<S> acc, double lr, double smoothing,
                    double eps);

/// RMSProp over every trainable tensor of a parameter group.
template <typename P>
void rmsprop_step(P& params, const P& grads, P& acc, double lr, double smoothing, double eps);

// ---------------------------------------------------------------------------
// Training loop.

/// Everything needed to continue training bit-exactly.
struct TrainingState {
  ModelParams<float> params;
  EmaState<float> ema;
  GeneratorParams<float> gen_acc;
  DiscriminatorParams<float> disc_acc;
  std::int64_t step = 0;
  std::string rng_state;
  std::vector<std::int32_t> order;  // current epoch permutation
  std::int64_t cursor = 0;          // next position in `order`
};

/// Runs the alternating discriminator/generator updates on a normalized dataset.
class Trainer {
 public:
  Trainer(const TrainConfig& config, const ArchConfig& arch, const LoadDataset& normalized);
  Trainer(const TrainConfig& config, const LoadDataset& normalized, TrainingState state);

  /// One train step: one time shift, n_dstep discriminator updates, one
  /// generator update, one EMA update.
  StepReport step();

  /// Snapshot with the current RNG state.
  TrainingState state() const;
  const ModelParams<float>& params() const { return state_.params; }
  const EmaState<float>& ema() const { return state_.ema; }
  std::int64_t step_count() const { return state_.step; }
  const TrainConfig& config() const { return config_; }

  Rng& rng() { return rng_; }
  /// Number of real samples fetched so far.
  std::int64_t real_reads() const { return real_reads_; }

 private:
  /// Copies the next real sample of the epoch ordering into batch slot `slot`.
  void fetch_real(int slot, BatchTensor<float>& out);
  void load_dataset(const LoadDataset& ds);

  TrainConfig config_;
  TrainingState state_;
  Rng rng_;
  BatchTensor<float> data_;
  std::int64_t real_reads_ = 0;
};

struct TrainOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume;
  std::function<void(const StepReport&)> on_step;
};

/// Trains to config.total_steps, writing `ckpt_XXXXXXXX` checkpoints every
/// checkpoint_interval steps, a `final` checkpoint, and `train_log.csv`.
/// Returns the final checkpoint directory.
std::filesystem::path train(const TrainConfig& config, const ArchConfig& arch, const LoadDataset& normalized,
                            const TrainOptions& options);

}  // namespace mreal
