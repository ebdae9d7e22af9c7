#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mreal/rng.hpp"
#include "mreal/tensor.hpp"

namespace mreal {

enum class OutputActivation { relu, tanh };

/// Forward-pass mode. Only the generator's batch norms distinguish the two.
enum class Mode { train, eval };

std::string to_string(OutputActivation a);
OutputActivation parse_output_activation(const std::string& s);

struct ArchConfig {
  int n_blocks = 4;
  int latent_dim = 128;
  int base_len = 45;
  int channels = 512;
  int kernel_len = 15;
  int n_app = 2;
  double leaky_slope = 0.2;
  OutputActivation output_activation = OutputActivation::relu;

  /// Output length of the generator, base_len * 2^n_blocks.
  int length() const { return base_len << n_blocks; }
  /// Throws ShapeError on non-positive sizes or an even kernel.
  void validate() const;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.9;

template <typename S>
struct Conv1d {
  Tensor<S> weight;  // [out][in][k]
  Tensor<S> bias;    // [out]
};

template <typename S>
struct BatchNorm {
  Tensor<S> gamma;
  Tensor<S> beta;
  Tensor<S> running_mean;
  Tensor<S> running_var;
};

template <typename S>
struct Dense {
  Tensor<S> weight;  // [in][out]
  Tensor<S> bias;    // [out]
};

/// Block 0 owns three norms (one on the dense output, one after each conv);
/// blocks 1..n own two. Every block owns two convs.
template <typename S>
struct GeneratorParams {
  Dense<S> fc;
  std::vector<BatchNorm<S>> norms;
  std::vector<Conv1d<S>> convs;
  Conv1d<S> out;
};

/// Convs are stored in forward order: D_n conv1, D_n conv2, ..., D_0 conv1, D_0 conv2.
template <typename S>
struct DiscriminatorParams {
  Conv1d<S> in;
  std::vector<Conv1d<S>> convs;
  Dense<S> fc;
};

template <typename S>
struct ModelParams {
  ArchConfig arch;
  GeneratorParams<S> gen;
  DiscriminatorParams<S> disc;
};

// ---------------------------------------------------------------------------
// Named tensor visitation. `f(name, tensor, trainable)`; running batch-norm
// statistics are the only non-trainable tensors.

template <typename G, typename F>
void visit_generator(G& g, F&& f) {
  f("G.fc.weight", g.fc.weight, true);
  f("G.fc.bias", g.fc.bias, true);
  const int blocks = static_cast<int>(g.convs.size()) / 2;
  auto norm = [&](const std::string& prefix, auto& bn) {
    f(prefix + ".gamma", bn.gamma, true);
    f(prefix + ".beta", bn.beta, true);
    f(prefix + ".running_mean", bn.running_mean, false);
    f(prefix + ".running_var", bn.running_var, false);
  };
  auto conv = [&](const std::string& prefix, auto& c) {
    f(prefix + ".weight", c.weight, true);
    f(prefix + ".bias", c.bias, true);
  };
  for (int i = 0; i < blocks; ++i) {
    const std::string p = "G.b" + std::to_string(i);
    if (i == 0) {
      norm(p + ".bn1", g.norms[0]);
      conv(p + ".conv1", g.convs[0]);
      norm(p + ".bn2", g.norms[1]);
      conv(p + ".conv2", g.convs[1]);
      norm(p + ".bn3", g.norms[2]);
    } else {
      const std::size_t n0 = 3 + 2 * static_cast<std::size_t>(i - 1);
      conv(p + ".conv1", g.convs[2 * i]);
      norm(p + ".bn1", g.norms[n0]);
      conv(p + ".conv2", g.convs[2 * i + 1]);
      norm(p + ".bn2", g.norms[n0 + 1]);
    }
  }
  conv("G.out.conv", g.out);
}

template <typename D, typename F>
void visit_discriminator(D& d, F&& f) {
  f("D.in.conv.weight", d.in.weight, true);
  f("D.in.conv.bias", d.in.bias, true);
  const int blocks = static_cast<int>(d.convs.size()) / 2;
  for (int p = 0; p < static_cast<int>(d.convs.size()); ++p) {
    const int block = blocks - 1 - p / 2;
    const std::string prefix = "D.b" + std::to_string(block) + ".conv" + std::to_string(p % 2 + 1);
    f(prefix + ".weight", d.convs[p].weight, true);
    f(prefix + ".bias", d.convs[p].bias, true);
  }
  f("D.fc.weight", d.fc.weight, true);
  f("D.fc.bias", d.fc.bias, true);
}

/// Pointers to every tensor of `p` in visitation order.
template <typename P>
auto tensor_list(P& p) {
  using T = std::remove_reference_t<decltype((p.fc.weight))>;
  std::vector<std::pair<std::string, T*>> out;
  auto push = [&](const std::string& name, T& t, bool) { out.emplace_back(name, &t); };
  if constexpr (requires { p.norms; }) {
    visit_generator(p, push);
  } else {
    visit_discriminator(p, push);
  }
  return out;
}

/// Same structure with every tensor set to zero (gradient/optimizer buffers).
template <typename P>
P zeros_like(const P& p) {
  P z = p;
  for (auto& [name, t] : tensor_list(z)) std::fill(t->data.begin(), t->data.end(), 0);
  return z;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p);
template <typename To, typename From>
GeneratorParams<To> cast_generator(const GeneratorParams<From>& g);

/// Every tensor name with its shape, as implied by `arch`.
std::vector<std::pair<std::string, Shape>> expected_shapes(const ArchConfig& arch);

/// Throws ShapeError unless every tensor of `params` matches expected_shapes.
template <typename S>
void audit_shapes(const ModelParams<S>& params);

/// Glorot-uniform weights (conv fans k*in / k*out), zero biases, unit BN
/// scale, zero BN shift, running mean 0 and variance 1.
ModelParams<float> init_params(const ArchConfig& arch, std::uint64_t seed);

/// All-zero parameters with the shapes implied by `arch`.
ModelParams<float> zero_params(const ArchConfig& arch);

// ---------------------------------------------------------------------------
// Forward and backward passes.

enum class OpKind { dense, conv, batchnorm, leaky_relu, upsample, avgpool, output_activation };

/// `index` addresses convs/norms; -1 selects the dedicated in/out conv.
struct Op {
  OpKind kind;
  int index = -1;
};

std::vector<Op> generator_ops(const ArchConfig& arch);
std::vector<Op> discriminator_ops(const ArchConfig& arch);

template <typename S>
struct BatchNormCache {
  std::vector<S> xhat;
  std::vector<S> mean;
  std::vector<S> var;
  std::vector<S> inv_std;
};

/// values[0] is the network input and values[k + 1] the output of op k.
template <typename S>
struct GeneratorTrace {
  std::vector<BatchTensor<S>> values;
  std::vector<BatchNormCache<S>> norms;
};

template <typename S>
struct DiscriminatorTrace {
  std::vector<BatchTensor<S>> values;
};

/// z is [batch][latent_dim][1]; returns [batch][n_app][length]. In train
/// mode batch statistics are used and recorded in `trace` (if given); running
/// statistics are only changed by update_running_stats.
template <typename S>
BatchTensor<S> generator_forward(const ArchConfig& arch, const GeneratorParams<S>& g, const BatchTensor<S>& z,
                                 Mode mode, GeneratorTrace<S>* trace = nullptr);

/// Accumulates parameter gradients of <grad_out, G(z)> into `grads`.
template <typename S>
void generator_backward(const ArchConfig& arch, const GeneratorParams<S>& g, const GeneratorTrace<S>& trace,
                        const BatchTensor<S>& grad_out, GeneratorParams<S>& grads);

/// running <- momentum * running + (1 - momentum) * batch, from a train-mode trace.
template <typename S>
void update_running_stats(GeneratorParams<S>& g, const GeneratorTrace<S>& trace,
                          double momentum = kBatchNormMomentum);

/// One unbounded score per sample. The discriminator has no batch norm, so it
/// behaves identically in train and eval mode.
template <typename S>
std::vector<S> discriminator_forward(const ArchConfig& arch, const DiscriminatorParams<S>& d,
                                     const BatchTensor<S>& x, DiscriminatorTrace<S>* trace = nullptr);

/// Backpropagates per-sample score weights. Accumulates parameter gradients
/// when `grads` is non-null; returns the input gradient when requested (empty
/// otherwise). `deltas`, when given, receives the gradient at every trace
/// position and is the input to discriminator_input_grad_backward.
template <typename S>
BatchTensor<S> discriminator_backward(const ArchConfig& arch, const DiscriminatorParams<S>& d,
                                      const DiscriminatorTrace<S>& trace, std::span<const S> score_grad,
                                      DiscriminatorParams<S>* grads, bool want_input_grad,
                                      std::vector<BatchTensor<S>>* deltas = nullptr);

/// Parameter gradient of sum_b <cotangent[b], dD/dx(x_b)>, i.e. the
/// derivative of a function of the input gradient. `deltas` must come from
/// discriminator_backward run on the same trace with unit score weights.
/// The network is piecewise linear, so the activation masks are treated as
/// constants and biases receive no contribution.
template <typename S>
void discriminator_input_grad_backward(const ArchConfig& arch, const DiscriminatorParams<S>& d,
                                       const DiscriminatorTrace<S>& trace,
                                       const std::vector<BatchTensor<S>>& deltas,
                                       const BatchTensor<S>& cotangent, DiscriminatorParams<S>& grads);

// ---------------------------------------------------------------------------
// Exponential moving average of generator weights.

template <typename S>
struct EmaState {
  GeneratorParams<S> shadow;
  double decay = 0.999;
};

template <typename S>
EmaState<S> make_ema(const GeneratorParams<S>& live, double decay);

/// shadow <- decay * shadow + (1 - decay) * live over the trainable tensors.
/// Batch-norm running statistics are left alone: they must describe the
/// shadow's own activations, so the trainer tracks them separately.
template <typename S>
void ema_update(EmaState<S>& state, const GeneratorParams<S>& live);

/// Unit-norm latent batch [n][latent_dim][1] from standard normal draws.
template <typename S>
BatchTensor<S> sample_latents(int n, int latent_dim, Rng& rng);

}  // namespace mreal
