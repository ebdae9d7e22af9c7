#include "mreal/training.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mreal/checkpoint.hpp"
#include "mreal/config.hpp"
#include "mreal/error.hpp"
#include "mreal/log.hpp"

namespace mreal {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(std::string("invalid training config: ") + what);
  };
  require(lambda_gp >= 0.0 && std::isfinite(lambda_gp), "lambda_gp must be nonnegative");
  require(beta_drift >= 0.0 && std::isfinite(beta_drift), "beta_drift must be nonnegative");
  require(learning_rate >= 0.0 && std::isfinite(learning_rate), "learning_rate must be nonnegative");
  require(minibatch >= 2, "minibatch must be at least 2");
  require(n_dstep >= 1, "n_dstep must be positive");
  require(total_steps >= 0, "total_steps must be nonnegative");
  require(aug_rho > 0.0 && std::isfinite(aug_rho), "aug_rho must be positive");
  require(aug_eta > 0.0 && std::isfinite(aug_eta), "aug_eta must be positive");
  require(ema_decay >= 0.0 && ema_decay <= 1.0, "ema_decay must lie in [0, 1]");
  require(rmsprop_smoothing >= 0.0 && rmsprop_smoothing < 1.0, "rmsprop_smoothing must lie in [0, 1)");
  require(rmsprop_epsilon > 0.0, "rmsprop_epsilon must be positive");
  require(checkpoint_interval >= 1, "checkpoint_interval must be positive");
}

std::map<std::string, std::string> TrainConfig::apply(const std::map<std::string, std::string>& kv) {
  std::map<std::string, std::string> rest;
  for (const auto& [key, value] : kv) {
    if (key == "lambda_gp") lambda_gp = parse_real(key, value);
    else if (key == "beta_drift") beta_drift = parse_real(key, value);
    else if (key == "learning_rate") learning_rate = parse_real(key, value);
    else if (key == "minibatch") minibatch = static_cast<int>(parse_int(key, value));
    else if (key == "n_dstep") n_dstep = static_cast<int>(parse_int(key, value));
    else if (key == "total_steps") total_steps = parse_int(key, value);
    else if (key == "aug_rho") aug_rho = parse_real(key, value);
    else if (key == "aug_eta") aug_eta = parse_real(key, value);
    else if (key == "aug_rho_is_variance") aug_rho_is_variance = parse_bool(key, value);
    else if (key == "aug_eta_is_rate") aug_eta_is_rate = parse_bool(key, value);
    else if (key == "ema_decay") ema_decay = parse_real(key, value);
    else if (key == "rmsprop_smoothing") rmsprop_smoothing = parse_real(key, value);
    else if (key == "rmsprop_epsilon") rmsprop_epsilon = parse_real(key, value);
    else if (key == "checkpoint_interval") checkpoint_interval = parse_int(key, value);
    else if (key == "seed") {
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
      if (ec != std::errc() || ptr != value.data() + value.size())
        throw Error("config key 'seed': expected an unsigned integer, got '" + value + "'");
    } else {
      rest[key] = value;
    }
  }
  return rest;
}

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {
      {"lambda_gp", format_real(lambda_gp)},
      {"beta_drift", format_real(beta_drift)},
      {"learning_rate", format_real(learning_rate)},
      {"minibatch", std::to_string(minibatch)},
      {"n_dstep", std::to_string(n_dstep)},
      {"total_steps", std::to_string(total_steps)},
      {"aug_rho", format_real(aug_rho)},
      {"aug_eta", format_real(aug_eta)},
      {"aug_rho_is_variance", aug_rho_is_variance ? "true" : "false"},
      {"aug_eta_is_rate", aug_eta_is_rate ? "true" : "false"},
      {"ema_decay", format_real(ema_decay)},
      {"rmsprop_smoothing", format_real(rmsprop_smoothing)},
      {"rmsprop_epsilon", format_real(rmsprop_epsilon)},
      {"seed", std::to_string(seed)},
      {"checkpoint_interval", std::to_string(checkpoint_interval)},
  };
}

namespace {

template <typename S>
double mean_of(std::span<const S> v) {
  double s = 0.0;
  for (S x : v) s += static_cast<double>(x);
  return s / static_cast<double>(v.size());
}

template <typename S>
void check_score_batches(std::span<const S> real, std::span<const S> fake) {
  if (real.empty() || fake.empty()) throw Error("score batch is empty");
  if (real.size() != fake.size()) throw ShapeError("real and fake score batches differ in size");
}

template <typename S>
bool all_finite(const std::vector<S>& v) {
  for (S x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// Per-sample Euclidean norms of the input gradient.
template <typename S>
std::vector<double> sample_norms(const BatchTensor<S>& g) {
  std::vector<double> n(g.batch);
  for (int b = 0; b < g.batch; ++b) {
    const S* p = g.sample(b);
    double s = 0.0;
    for (std::size_t i = 0; i < g.sample_size(); ++i) s += static_cast<double>(p[i]) * p[i];
    n[b] = std::sqrt(s);
  }
  return n;
}

template <typename S>
double penalty_mean(const std::vector<double>& norms) {
  double s = 0.0;
  for (double n : norms) {
    const double e = std::max(0.0, n - 1.0);
    s += e * e;
  }
  return s / static_cast<double>(norms.size());
}

template <typename S>
BatchTensor<S> apply_fake_augmentation(const BatchTensor<S>& x, const FakeAugmentation<S>& aug) {
  if (!aug.noise.same_shape(x)) throw ShapeError("augmentation noise must match the generator output");
  BatchTensor<S> out(x.batch, x.channels, x.length);
  for (int b = 0; b < x.batch; ++b)
    for (int c = 0; c < x.channels; ++c) {
      const std::size_t off = b * x.sample_size() + static_cast<std::size_t>(c) * x.length;
      rotate(x.data.data() + off, x.length, aug.delta, out.data.data() + off);
      for (int t = 0; t < x.length; ++t) out.data[off + t] += aug.noise.data[off + t];
    }
  return out;
}

template <typename P>
std::vector<bool> trainable_flags(const P& p) {
  std::vector<bool> flags;
  auto push = [&](const std::string&, const auto&, bool trainable) { flags.push_back(trainable); };
  if constexpr (requires { p.norms; }) {
    visit_generator(p, push);
  } else {
    visit_discriminator(p, push);
  }
  return flags;
}

}  // namespace

template <typename S>
double w_distance(std::span<const S> real, std::span<const S> fake) {
  check_score_batches(real, fake);
  return mean_of(real) - mean_of(fake);
}

template <typename S>
double drift_penalty(std::span<const S> real, std::span<const S> fake, double beta) {
  check_score_batches(real, fake);
  const double s = mean_of(real) + mean_of(fake);
  return beta * s * s;
}

template <typename S>
BatchTensor<S> interpolate(const BatchTensor<S>& real, const BatchTensor<S>& fake, std::span<const double> eps) {
  if (!real.same_shape(fake)) throw ShapeError("interpolation inputs differ in shape");
  if (static_cast<int>(eps.size()) != real.batch) throw ShapeError("one interpolation weight per sample expected");
  BatchTensor<S> out(real.batch, real.channels, real.length);
  for (int b = 0; b < real.batch; ++b) {
    const double e = eps[b];
    if (!(e >= 0.0 && e <= 1.0)) throw Error("interpolation weight must lie in [0, 1]");
    const S* r = real.sample(b);
    const S* f = fake.sample(b);
    S* o = out.sample(b);
    for (std::size_t i = 0; i < real.sample_size(); ++i) o[i] = static_cast<S>(e * r[i] + (1.0 - e) * f[i]);
  }
  return out;
}

LoadDay interpolate(const LoadDay& real, const LoadDay& fake, double eps) {
  if (real.n_app != fake.n_app || real.steps != fake.steps || real.values.size() != fake.values.size())
    throw ShapeError("interpolation inputs differ in shape");
  if (!(eps >= 0.0 && eps <= 1.0)) throw Error("interpolation weight must lie in [0, 1]");
  LoadDay out = real;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = eps * real.values[i] + (1.0 - eps) * fake.values[i];
  return out;
}

template <typename S>
double gradient_penalty(const ArchConfig& arch, const DiscriminatorParams<S>& d, const BatchTensor<S>& x_hat,
                        double w_tilde, double lambda) {
  if (x_hat.batch < 1) throw Error("gradient penalty needs at least one sample");
  if (!(w_tilde > 0.0)) return 0.0;
  DiscriminatorTrace<S> trace;
  discriminator_forward(arch, d, x_hat, &trace);
  const std::vector<S> ones(x_hat.batch, S(1));
  const auto g = discriminator_backward<S>(arch, d, trace, ones, nullptr, true);
  if (!all_finite(g.data)) throw TrainingError("non-finite discriminator input gradient");
  return lambda * w_tilde * penalty_mean<S>(sample_norms(g));
}

template <typename S>
DiscriminatorLoss discriminator_loss(const ArchConfig& arch, const DiscriminatorParams<S>& d,
                                     const BatchTensor<S>& real, const BatchTensor<S>& fake,
                                     const BatchTensor<S>& x_hat, double lambda_gp, double beta_drift,
                                     DiscriminatorParams<S>* grads) {
  if (!real.same_shape(fake) || !real.same_shape(x_hat)) throw ShapeError("discriminator loss inputs differ in shape");
  const int m = real.batch;
  DiscriminatorTrace<S> tr_real, tr_fake, tr_hat;
  const auto s_real = discriminator_forward(arch, d, real, grads ? &tr_real : nullptr);
  const auto s_fake = discriminator_forward(arch, d, fake, grads ? &tr_fake : nullptr);
  discriminator_forward(arch, d, x_hat, &tr_hat);

  DiscriminatorLoss out;
  out.w_tilde = w_distance<S>(s_real, s_fake);
  out.drift_penalty = drift_penalty<S>(s_real, s_fake, beta_drift);

  const std::vector<S> ones(m, S(1));
  std::vector<BatchTensor<S>> deltas;
  const auto g = discriminator_backward<S>(arch, d, tr_hat, ones, nullptr, true, grads ? &deltas : nullptr);
  if (!all_finite(g.data)) throw TrainingError("non-finite discriminator input gradient");
  const auto norms = sample_norms(g);
  const double phi = penalty_mean<S>(norms);
  const double scale = std::max(0.0, out.w_tilde);
  out.grad_penalty = lambda_gp * scale * phi;
  out.total = -out.w_tilde + out.grad_penalty + out.drift_penalty;
  if (!std::isfinite(out.total)) throw TrainingError("non-finite discriminator loss");
  if (!grads) return out;

  // dL/dW through -W and the penalty scale; the drift term depends on both means.
  const double dw = -1.0 + (out.w_tilde > 0.0 ? lambda_gp * phi : 0.0);
  const double dsum = 2.0 * beta_drift * (mean_of<S>(s_real) + mean_of<S>(s_fake));
  std::vector<S> w_real(m, static_cast<S>((dw + dsum) / m));
  std::vector<S> w_fake(m, static_cast<S>((-dw + dsum) / m));
  discriminator_backward<S>(arch, d, tr_real, w_real, grads, false);
  discriminator_backward<S>(arch, d, tr_fake, w_fake, grads, false);

  if (scale > 0.0) {
    BatchTensor<S> cot(g.batch, g.channels, g.length);
    for (int b = 0; b < m; ++b) {
      const double n = norms[b];
      if (!(n > 1.0)) continue;
      const double f = lambda_gp * scale / m * 2.0 * (n - 1.0) / n;
      const S* gb = g.sample(b);
      S* cb = cot.sample(b);
      for (std::size_t i = 0; i < g.sample_size(); ++i) cb[i] = static_cast<S>(f * gb[i]);
    }
    discriminator_input_grad_backward(arch, d, tr_hat, deltas, cot, *grads);
  }
  return out;
}

template <typename S>
double generator_loss(const ArchConfig& arch, const GeneratorParams<S>& g, const DiscriminatorParams<S>& d,
                      const BatchTensor<S>& z, const FakeAugmentation<S>& aug, GeneratorParams<S>* grads,
                      GeneratorTrace<S>* trace) {
  GeneratorTrace<S> local;
  GeneratorTrace<S>* tr = trace ? trace : &local;
  const auto fake = generator_forward(arch, g, z, Mode::train, tr);
  const auto augmented = apply_fake_augmentation(fake, aug);
  DiscriminatorTrace<S> dtr;
  const auto scores = discriminator_forward(arch, d, augmented, grads ? &dtr : nullptr);
  const double loss = -mean_of<S>(scores);
  if (!std::isfinite(loss)) throw TrainingError("non-finite generator loss");
  if (!grads) return loss;

  const std::vector<S> w(fake.batch, static_cast<S>(-1.0 / fake.batch));
  const auto dx = discriminator_backward<S>(arch, d, dtr, w, nullptr, true);
  BatchTensor<S> dfake(fake.batch, fake.channels, fake.length);
  for (int b = 0; b < fake.batch; ++b)
    for (int c = 0; c < fake.channels; ++c) {
      const std::size_t off = b * fake.sample_size() + static_cast<std::size_t>(c) * fake.length;
      rotate_backward(dx.data.data() + off, fake.length, aug.delta, dfake.data.data() + off);
    }
  generator_backward(arch, g, *tr, dfake, *grads);
  return loss;
}

template <typename S>
void rmsprop_update(std::span<S> param, std::span<const S> grad, std::span<S> acc, double lr, double smoothing,
                    double eps) {
  if (param.size() != grad.size() || param.size() != acc.size()) throw ShapeError("RMSProp buffers differ in size");
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double a = smoothing * acc[i] + (1.0 - smoothing) * g * g;
    acc[i] = static_cast<S>(a);
    param[i] = static_cast<S>(param[i] - lr * g / std::sqrt(a + eps));
  }
}

template <typename P>
void rmsprop_step(P& params, const P& grads, P& acc, double lr, double smoothing, double eps) {
  auto p = tensor_list(params);
  const auto g = tensor_list(grads);
  auto a = tensor_list(acc);
  const auto trainable = trainable_flags(params);
  if (p.size() != g.size() || p.size() != a.size()) throw ShapeError("RMSProp parameter groups differ");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!trainable[i]) continue;
    rmsprop_update(p[i].second->span(), g[i].second->span(), a[i].second->span(), lr, smoothing, eps);
  }
}

// ---------------------------------------------------------------------------

Trainer::Trainer(const TrainConfig& config, const ArchConfig& arch, const LoadDataset& normalized)
    : config_(config), rng_(config.seed) {
  config_.validate();
  arch.validate();
  state_.params = init_params(arch, config_.seed);
  load_dataset(normalized);
  state_.ema = make_ema(state_.params.gen, config_.ema_decay);
  state_.gen_acc = zeros_like(state_.params.gen);
  state_.disc_acc = zeros_like(state_.params.disc);
  state_.order.resize(normalized.size());
  std::iota(state_.order.begin(), state_.order.end(), 0);
  state_.cursor = static_cast<std::int64_t>(normalized.size());
  state_.rng_state = rng_.state();
}

Trainer::Trainer(const TrainConfig& config, const LoadDataset& normalized, TrainingState state)
    : config_(config), state_(std::move(state)) {
  config_.validate();
  audit_shapes(state_.params);
  load_dataset(normalized);
  if (state_.order.size() != normalized.size())
    throw Error("checkpoint was taken on a dataset of " + std::to_string(state_.order.size()) + " samples, got " +
                std::to_string(normalized.size()));
  rng_.restore(state_.rng_state);
  state_.ema.decay = config_.ema_decay;
}

void Trainer::load_dataset(const LoadDataset& ds) {
  const auto& arch = state_.params.arch;
  if (!ds.normalized) throw Error("training needs a normalized dataset");
  if (ds.size() == 0) throw Error("training dataset is empty");
  if (ds.size() > static_cast<std::size_t>(INT32_MAX)) throw Error("training dataset is too large");
  if (ds.n_app() != arch.n_app || ds.steps() != arch.length())
    throw ShapeError("dataset samples are " + std::to_string(ds.n_app()) + "x" + std::to_string(ds.steps()) +
                     ", the model produces " + std::to_string(arch.n_app) + "x" + std::to_string(arch.length()));
  auto& data = data_;
  data = BatchTensor<float>(static_cast<int>(ds.size()), arch.n_app, arch.length());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& s = ds.samples[i];
    if (s.n_app != arch.n_app || s.steps != arch.length()) throw ShapeError("sample " + s.sample_id + " has the wrong shape");
    std::copy(s.values.begin(), s.values.end(), data.sample(static_cast<int>(i)));
  }
}

void Trainer::fetch_real(int slot, BatchTensor<float>& out) {
  const auto n = static_cast<std::int64_t>(state_.order.size());
  if (state_.cursor >= n) {
    rng_.note(DrawKind::shuffle);
    for (std::int64_t i = n - 1; i > 0; --i) {
      const auto j = static_cast<std::int64_t>(rng_.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(state_.order[i], state_.order[j]);
    }
    state_.cursor = 0;
  }
  const int idx = state_.order[state_.cursor++];
  std::copy(data_.sample(idx), data_.sample(idx) + data_.sample_size(), out.sample(slot));
  ++real_reads_;
}

StepReport Trainer::step() {
  const auto& arch = state_.params.arch;
  auto& params = state_.params;
  const int m = config_.minibatch;
  const int len = arch.length();
  const auto aug = config_.augment();
  const int delta = sample_shift(aug, rng_);

  auto noise_into = [&](BatchTensor<float>& dst, int b) {
    const double scale = sample_noise_scale(aug, rng_);
    const auto q = draw_sample_noise(arch.n_app, len, scale, rng_);
    std::copy(q.begin(), q.end(), dst.sample(b));
  };
  auto latent_into = [&](BatchTensor<float>& z, int b) {
    const auto one = sample_latents<float>(1, arch.latent_dim, rng_);
    std::copy(one.data.begin(), one.data.end(), z.sample(b));
  };

  StepReport report;
  for (int k = 0; k < config_.n_dstep; ++k) {
    BatchTensor<float> real(m, arch.n_app, len);
    BatchTensor<float> z(m, arch.latent_dim, 1);
    BatchTensor<float> noise_real(m, arch.n_app, len);
    BatchTensor<float> noise_fake(m, arch.n_app, len);
    std::vector<double> eps(m);
    for (int i = 0; i < m; ++i) {
      fetch_real(i, real);
      latent_into(z, i);
      noise_into(noise_real, i);
      noise_into(noise_fake, i);
      rng_.note(DrawKind::epsilon);
      eps[i] = rng_.uniform();
    }
    GeneratorTrace<float> gtrace;
    const auto fake = generator_forward(arch, params.gen, z, Mode::train, &gtrace);
    update_running_stats(params.gen, gtrace);
    gtrace = {};

    const auto real_aug = apply_fake_augmentation(real, FakeAugmentation<float>{delta, std::move(noise_real)});
    const auto fake_aug = apply_fake_augmentation(fake, FakeAugmentation<float>{delta, std::move(noise_fake)});
    const auto x_hat = interpolate<float>(real_aug, fake_aug, eps);

    auto grads = zeros_like(params.disc);
    const auto loss =
        discriminator_loss(arch, params.disc, real_aug, fake_aug, x_hat, config_.lambda_gp, config_.beta_drift, &grads);
    for (const auto& [name, t] : tensor_list(grads))
      if (!all_finite(t->data)) throw TrainingError("non-finite gradient in " + name + " at step " + std::to_string(state_.step));
    rmsprop_step(params.disc, grads, state_.disc_acc, config_.learning_rate, config_.rmsprop_smoothing,
                 config_.rmsprop_epsilon);
    report.w_tilde = loss.w_tilde;
    report.grad_penalty = loss.grad_penalty;
    report.drift_penalty = loss.drift_penalty;
  }

  BatchTensor<float> z(m, arch.latent_dim, 1);
  FakeAugmentation<float> fake_aug{delta, BatchTensor<float>(m, arch.n_app, len)};
  for (int i = 0; i < m; ++i) {
    latent_into(z, i);
    noise_into(fake_aug.noise, i);
  }
  auto ggrads = zeros_like(params.gen);
  GeneratorTrace<float> gtrace;
  report.gen_loss = generator_loss(arch, params.gen, params.disc, z, fake_aug, &ggrads, &gtrace);
  for (const auto& [name, t] : tensor_list(ggrads))
    if (!all_finite(t->data)) throw TrainingError("non-finite gradient in " + name + " at step " + std::to_string(state_.step));
  update_running_stats(params.gen, gtrace);
  rmsprop_step(params.gen, ggrads, state_.gen_acc, config_.learning_rate, config_.rmsprop_smoothing,
               config_.rmsprop_epsilon);

  ema_update(state_.ema, params.gen);
  // Averaged weights do not produce the activations that averaged running
  // stats describe, so the EMA generator tracks its own from the same latents.
  GeneratorTrace<float> etrace;
  generator_forward(arch, state_.ema.shadow, z, Mode::train, &etrace);
  update_running_stats(state_.ema.shadow, etrace);
  ++state_.step;
  report.step = state_.step;
  return report;
}

TrainingState Trainer::state() const {
  TrainingState s = state_;
  s.rng_state = rng_.state();
  return s;
}

// ---------------------------------------------------------------------------

namespace {

std::string checkpoint_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%08lld", static_cast<long long>(step));
  return buf;
}

// Keeps the header and every row up to `step`, so a resumed run appends
// exactly the rows a straight run would have written.
void truncate_log(const fs::path& path, std::int64_t step) {
  std::ifstream in(path);
  if (!in) return;
  std::ostringstream kept;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      kept << line << '\n';
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::int64_t s = 0;
    std::from_chars(line.data(), line.data() + line.size(), s);
    if (s <= step) kept << line << '\n';
  }
  in.close();
  std::ofstream(path, std::ios::trunc) << kept.str();
}

}  // namespace

fs::path train(const TrainConfig& config, const ArchConfig& arch, const LoadDataset& normalized,
               const TrainOptions& options) {
  config.validate();
  fs::create_directories(options.out_dir);
  const fs::path log_path = options.out_dir / "train_log.csv";

  Checkpoint ckpt;
  ckpt.stats = normalized.stats;
  std::optional<Trainer> trainer;
  if (options.resume) {
    auto loaded = load_checkpoint(*options.resume);
    ckpt.arch = loaded.arch;
    ckpt.config = loaded.config;
    ckpt.config.total_steps = config.total_steps;
    ckpt.config.checkpoint_interval = config.checkpoint_interval;
    trainer.emplace(ckpt.config, normalized, std::move(loaded.state));
    truncate_log(log_path, trainer->step_count());
    spdlog::info("resuming from {} at step {}", options.resume->string(), trainer->step_count());
  } else {
    ckpt.arch = arch;
    ckpt.config = config;
    trainer.emplace(config, arch, normalized);
    std::ofstream(log_path, std::ios::trunc) << "step,w_tilde,grad_penalty,drift_penalty,gen_loss\n";
  }

  std::ofstream log(log_path, std::ios::app);
  if (!log) throw Error("cannot write " + log_path.string());
  auto save = [&](const fs::path& dir) {
    ckpt.state = trainer->state();
    save_checkpoint(ckpt, dir);
  };

  const auto& cfg = trainer->config();
  while (trainer->step_count() < cfg.total_steps) {
    const auto r = trainer->step();
    log << r.step << ',' << format_real(r.w_tilde) << ',' << format_real(r.grad_penalty) << ','
        << format_real(r.drift_penalty) << ',' << format_real(r.gen_loss) << '\n';
    log.flush();
    if (options.on_step) options.on_step(r);
    if (r.step % cfg.checkpoint_interval == 0) {
      save(options.out_dir / checkpoint_name(r.step));
      spdlog::info("step {}: W={:.4g} Pg={:.4g} Pc={:.4g} LG={:.4g}", r.step, r.w_tilde, r.grad_penalty,
                     r.drift_penalty, r.gen_loss);
    }
  }
  const fs::path final_dir = options.out_dir / "final";
  save(final_dir);
  return final_dir;
}

#define MREAL_INSTANTIATE(S)                                                                                     \
  template double w_distance<S>(std::span<const S>, std::span<const S>);                                         \
  template double drift_penalty<S>(std::span<const S>, std::span<const S>, double);                              \
  template BatchTensor<S> interpolate<S>(const BatchTensor<S>&, const BatchTensor<S>&, std::span<const double>); \
  template double gradient_penalty<S>(const ArchConfig&, const DiscriminatorParams<S>&, const BatchTensor<S>&,   \
                                      double, double);                                                           \
  template DiscriminatorLoss discriminator_loss<S>(const ArchConfig&, const DiscriminatorParams<S>&,             \
                                                   const BatchTensor<S>&, const BatchTensor<S>&,                 \
                                                   const BatchTensor<S>&, double, double,                        \
                                                   DiscriminatorParams<S>*);                                     \
  template double generator_loss<S>(const ArchConfig&, const GeneratorParams<S>&, const DiscriminatorParams<S>&, \
                                    const BatchTensor<S>&, const FakeAugmentation<S>&, GeneratorParams<S>*,      \
                                    GeneratorTrace<S>*);                                                         \
  template void rmsprop_update<S>(std::span<S>, std::span<const S>, std::span<S>, double, double, double);       \
  template void rmsprop_step<GeneratorParams<S>>(GeneratorParams<S>&, const GeneratorParams<S>&,                 \
                                                 GeneratorParams<S>&, double, double, double);                   \
  template void rmsprop_step<DiscriminatorParams<S>>(DiscriminatorParams<S>&, const DiscriminatorParams<S>&,     \
                                                     DiscriminatorParams<S>&, double, double, double);

MREAL_INSTANTIATE(float)
MREAL_INSTANTIATE(double)
#undef MREAL_INSTANTIATE

}  // namespace mreal
