#include "mreal/model.hpp"

#include <cmath>

#include "mreal/error.hpp"
#include "mreal/kernels.hpp"

namespace mreal {

namespace k = kernels;

std::string to_string(OutputActivation a) { return a == OutputActivation::relu ? "relu" : "tanh"; }

OutputActivation parse_output_activation(const std::string& s) {
  if (s == "relu") return OutputActivation::relu;
  if (s == "tanh") return OutputActivation::tanh;
  throw Error("unknown output activation '" + s + "'");
}

void ArchConfig::validate() const {
  if (n_blocks < 0 || latent_dim < 1 || base_len < 1 || channels < 1 || n_app < 1)
    throw ShapeError("architecture sizes must be positive");
  if (kernel_len < 1 || kernel_len % 2 == 0) throw ShapeError("kernel_len must be odd");
  if (!(leaky_slope >= 0.0)) throw ShapeError("leaky_slope must be nonnegative");
}

namespace {

template <typename S>
Tensor<S> shaped(Shape s) {
  Tensor<S> t;
  t.shape = std::move(s);
  return t;
}

template <typename S>
Conv1d<S> conv_skeleton(int out, int in, int kernel) {
  return {shaped<S>({std::size_t(out), std::size_t(in), std::size_t(kernel)}), shaped<S>({std::size_t(out)})};
}

template <typename S>
BatchNorm<S> norm_skeleton(int ch) {
  const Shape s{std::size_t(ch)};
  return {shaped<S>(s), shaped<S>(s), shaped<S>(s), shaped<S>(s)};
}

// Tensors carry shapes but no storage.
template <typename S>
ModelParams<S> skeleton(const ArchConfig& a) {
  a.validate();
  const int c = a.channels;
  ModelParams<S> p;
  p.arch = a;
  p.gen.fc = {shaped<S>({std::size_t(a.latent_dim), std::size_t(c) * a.base_len}),
              shaped<S>({std::size_t(c) * a.base_len})};
  p.gen.norms.push_back(norm_skeleton<S>(c));
  for (int i = 0; i <= a.n_blocks; ++i) {
    p.gen.convs.push_back(conv_skeleton<S>(c, c, a.kernel_len));
    p.gen.norms.push_back(norm_skeleton<S>(c));
    p.gen.convs.push_back(conv_skeleton<S>(c, c, a.kernel_len));
    p.gen.norms.push_back(norm_skeleton<S>(c));
  }
  p.gen.out = conv_skeleton<S>(a.n_app, c, 1);
  p.disc.in = conv_skeleton<S>(c, a.n_app, 1);
  for (int i = 0; i <= a.n_blocks; ++i) {
    p.disc.convs.push_back(conv_skeleton<S>(c, c, a.kernel_len));
    p.disc.convs.push_back(conv_skeleton<S>(c, c, a.kernel_len));
  }
  p.disc.fc = {shaped<S>({std::size_t(c) * a.base_len, 1}), shaped<S>({1})};
  return p;
}

template <typename S>
void audit_generator(const ArchConfig& arch, const GeneratorParams<S>& g) {
  const auto ref = skeleton<S>(arch);
  const auto want = tensor_list(ref.gen);
  const auto have = tensor_list(g);
  if (want.size() != have.size()) throw ShapeError("generator has the wrong number of tensors");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].second->shape != have[i].second->shape || have[i].second->size() != shape_size(want[i].second->shape))
      throw ShapeError(want[i].first + ": expected [" + shape_string(want[i].second->shape) + "], got [" +
                       shape_string(have[i].second->shape) + "]");
  }
}

template <typename S>
void audit_discriminator(const ArchConfig& arch, const DiscriminatorParams<S>& d) {
  const auto ref = skeleton<S>(arch);
  const auto want = tensor_list(ref.disc);
  const auto have = tensor_list(d);
  if (want.size() != have.size()) throw ShapeError("discriminator has the wrong number of tensors");
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i].second->shape != have[i].second->shape || have[i].second->size() != shape_size(want[i].second->shape))
      throw ShapeError(want[i].first + ": expected [" + shape_string(want[i].second->shape) + "], got [" +
                       shape_string(have[i].second->shape) + "]");
  }
}

void fill_glorot(Tensor<float>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : t.data) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * limit);
}

template <typename S>
const Conv1d<S>& gen_conv(const GeneratorParams<S>& g, int index) {
  return index < 0 ? g.out : g.convs[index];
}
template <typename S>
Conv1d<S>& gen_conv(GeneratorParams<S>& g, int index) {
  return index < 0 ? g.out : g.convs[index];
}
template <typename S>
const Conv1d<S>& disc_conv(const DiscriminatorParams<S>& d, int index) {
  return index < 0 ? d.in : d.convs[index];
}
template <typename S>
Conv1d<S>& disc_conv(DiscriminatorParams<S>& d, int index) {
  return index < 0 ? d.in : d.convs[index];
}

template <typename S>
BatchTensor<S> conv_apply(const Conv1d<S>& c, const BatchTensor<S>& x, bool with_bias = true) {
  const int out_ch = static_cast<int>(c.weight.shape[0]);
  const int kernel = static_cast<int>(c.weight.shape[2]);
  BatchTensor<S> y(x.batch, out_ch, x.length);
  k::conv1d_forward(x.data.data(), x.batch, x.channels, x.length, c.weight.data.data(),
                    with_bias ? c.bias.data.data() : nullptr, out_ch, kernel, y.data.data());
  return y;
}

template <typename S>
BatchTensor<S> conv_transpose_apply(const Conv1d<S>& c, const BatchTensor<S>& dy) {
  const int in_ch = static_cast<int>(c.weight.shape[1]);
  const int kernel = static_cast<int>(c.weight.shape[2]);
  BatchTensor<S> dx(dy.batch, in_ch, dy.length);
  k::conv1d_backward_input(dy.data.data(), dy.batch, dy.channels, dy.length, c.weight.data.data(), in_ch, kernel,
                           dx.data.data());
  return dx;
}

template <typename S>
void conv_weight_grad(const Conv1d<S>& c, const BatchTensor<S>& x, const BatchTensor<S>& dy, Conv1d<S>& grad,
                      bool with_bias = true) {
  k::conv1d_backward_weight(x.data.data(), dy.data.data(), x.batch, x.channels, x.length, dy.channels,
                            static_cast<int>(c.weight.shape[2]), grad.weight.data.data(),
                            with_bias ? grad.bias.data.data() : nullptr);
}

template <typename S>
BatchTensor<S> lrelu_apply(const BatchTensor<S>& x, S slope) {
  BatchTensor<S> y(x.batch, x.channels, x.length);
  k::leaky_relu(x.data.data(), x.data.size(), slope, y.data.data());
  return y;
}

template <typename S>
BatchTensor<S> lrelu_mask_apply(const BatchTensor<S>& pre, const BatchTensor<S>& g, S slope) {
  BatchTensor<S> y(g.batch, g.channels, g.length);
  k::leaky_relu_mask(pre.data.data(), g.data.data(), g.data.size(), slope, y.data.data());
  return y;
}

template <typename S>
BatchTensor<S> pool_apply(const BatchTensor<S>& x) {
  BatchTensor<S> y(x.batch, x.channels, x.length / 2);
  k::avgpool2(x.data.data(), x.batch * x.channels, x.length, y.data.data());
  return y;
}

}  // namespace

std::vector<std::pair<std::string, Shape>> expected_shapes(const ArchConfig& arch) {
  auto p = skeleton<float>(arch);
  std::vector<std::pair<std::string, Shape>> out;
  for (auto& [name, t] : tensor_list(p.gen)) out.emplace_back(name, t->shape);
  for (auto& [name, t] : tensor_list(p.disc)) out.emplace_back(name, t->shape);
  return out;
}

template <typename S>
void audit_shapes(const ModelParams<S>& params) {
  audit_generator(params.arch, params.gen);
  audit_discriminator(params.arch, params.disc);
}

ModelParams<float> init_params(const ArchConfig& arch, std::uint64_t seed) {
  auto p = skeleton<float>(arch);
  std::uint64_t stream = 0;
  auto init = [&](const std::string& name, Tensor<float>& t, bool) {
    t.data.assign(shape_size(t.shape), 0.0f);
    Rng rng = Rng::derive(seed, stream++);
    const auto ends_with = [&](const char* suffix) {
      const std::string s(suffix);
      return name.size() >= s.size() && name.compare(name.size() - s.size(), s.size(), s) == 0;
    };
    if (ends_with(".gamma") || ends_with(".running_var")) {
      std::fill(t.data.begin(), t.data.end(), 1.0f);
    } else if (ends_with(".weight")) {
      if (t.shape.size() == 3) {
        fill_glorot(t, t.shape[1] * t.shape[2], t.shape[0] * t.shape[2], rng);
      } else {
        fill_glorot(t, t.shape[0], t.shape[1], rng);
      }
    }
  };
  visit_generator(p.gen, init);
  visit_discriminator(p.disc, init);
  return p;
}

ModelParams<float> zero_params(const ArchConfig& arch) {
  auto p = skeleton<float>(arch);
  auto alloc = [](const std::string&, Tensor<float>& t, bool) { t.data.assign(shape_size(t.shape), 0.0f); };
  visit_generator(p.gen, alloc);
  visit_discriminator(p.disc, alloc);
  return p;
}

template <typename To, typename From>
GeneratorParams<To> cast_generator(const GeneratorParams<From>& g) {
  GeneratorParams<To> out;
  out.norms.resize(g.norms.size());
  out.convs.resize(g.convs.size());
  auto dst = tensor_list(out);
  const auto src = tensor_list(g);
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = cast_tensor<To>(*src[i].second);
  return out;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.arch = p.arch;
  out.gen = cast_generator<To>(p.gen);
  out.disc.convs.resize(p.disc.convs.size());
  auto dst = tensor_list(out.disc);
  const auto src = tensor_list(p.disc);
  for (std::size_t i = 0; i < src.size(); ++i) *dst[i].second = cast_tensor<To>(*src[i].second);
  return out;
}

std::vector<Op> generator_ops(const ArchConfig& arch) {
  std::vector<Op> ops;
  ops.push_back({OpKind::dense});
  ops.push_back({OpKind::batchnorm, 0});
  ops.push_back({OpKind::leaky_relu});
  ops.push_back({OpKind::conv, 0});
  ops.push_back({OpKind::batchnorm, 1});
  ops.push_back({OpKind::leaky_relu});
  ops.push_back({OpKind::conv, 1});
  ops.push_back({OpKind::batchnorm, 2});
  ops.push_back({OpKind::leaky_relu});
  for (int i = 1; i <= arch.n_blocks; ++i) {
    const int n0 = 3 + 2 * (i - 1);
    ops.push_back({OpKind::upsample});
    ops.push_back({OpKind::conv, 2 * i});
    ops.push_back({OpKind::batchnorm, n0});
    ops.push_back({OpKind::leaky_relu});
    ops.push_back({OpKind::conv, 2 * i + 1});
    ops.push_back({OpKind::batchnorm, n0 + 1});
    ops.push_back({OpKind::leaky_relu});
  }
  ops.push_back({OpKind::conv, -1});
  ops.push_back({OpKind::output_activation});
  return ops;
}

std::vector<Op> discriminator_ops(const ArchConfig& arch) {
  std::vector<Op> ops;
  ops.push_back({OpKind::conv, -1});
  ops.push_back({OpKind::leaky_relu});
  for (int p = 0; p < arch.n_blocks; ++p) {
    ops.push_back({OpKind::conv, 2 * p});
    ops.push_back({OpKind::leaky_relu});
    ops.push_back({OpKind::conv, 2 * p + 1});
    ops.push_back({OpKind::leaky_relu});
    ops.push_back({OpKind::avgpool});
  }
  ops.push_back({OpKind::conv, 2 * arch.n_blocks});
  ops.push_back({OpKind::leaky_relu});
  ops.push_back({OpKind::conv, 2 * arch.n_blocks + 1});
  ops.push_back({OpKind::leaky_relu});
  ops.push_back({OpKind::dense});
  return ops;
}

template <typename S>
BatchTensor<S> generator_forward(const ArchConfig& arch, const GeneratorParams<S>& g, const BatchTensor<S>& z,
                                 Mode mode, GeneratorTrace<S>* trace) {
  audit_generator(arch, g);
  if (z.channels != arch.latent_dim || z.length != 1)
    throw ShapeError("latent batch must be [batch][" + std::to_string(arch.latent_dim) + "][1]");
  if (mode == Mode::train && z.batch < 2) throw ShapeError("train-mode batch norm needs at least 2 samples");
  const S slope = static_cast<S>(arch.leaky_slope);
  const S eps = static_cast<S>(kBatchNormEps);
  const auto ops = generator_ops(arch);

  GeneratorTrace<S> local;
  GeneratorTrace<S>& tr = trace ? *trace : local;
  tr.values.clear();
  tr.norms.assign(g.norms.size(), {});
  BatchTensor<S> cur = z;

  for (const Op& op : ops) {
    BatchTensor<S> next;
    switch (op.kind) {
      case OpKind::dense: {
        next = BatchTensor<S>(cur.batch, arch.channels, arch.base_len);
        k::dense_forward(cur.data.data(), cur.batch, arch.latent_dim, g.fc.weight.data.data(), g.fc.bias.data.data(),
                         arch.channels * arch.base_len, next.data.data());
        break;
      }
      case OpKind::conv:
        next = conv_apply(gen_conv(g, op.index), cur);
        break;
      case OpKind::batchnorm: {
        const auto& bn = g.norms[op.index];
        next = BatchTensor<S>(cur.batch, cur.channels, cur.length);
        if (mode == Mode::train) {
          auto& cache = tr.norms[op.index];
          cache.xhat.resize(cur.data.size());
          cache.mean.resize(cur.channels);
          cache.var.resize(cur.channels);
          cache.inv_std.resize(cur.channels);
          k::batchnorm_train(cur.data.data(), cur.batch, cur.channels, cur.length, bn.gamma.data.data(),
                             bn.beta.data.data(), eps, next.data.data(), cache.xhat.data(), cache.mean.data(),
                             cache.var.data(), cache.inv_std.data());
        } else {
          k::batchnorm_eval(cur.data.data(), cur.batch, cur.channels, cur.length, bn.gamma.data.data(),
                            bn.beta.data.data(), bn.running_mean.data.data(), bn.running_var.data.data(), eps,
                            next.data.data());
        }
        break;
      }
      case OpKind::leaky_relu:
        next = lrelu_apply(cur, slope);
        break;
      case OpKind::upsample:
        next = BatchTensor<S>(cur.batch, cur.channels, cur.length * 2);
        k::upsample2(cur.data.data(), cur.batch * cur.channels, cur.length, next.data.data());
        break;
      case OpKind::output_activation:
        next = cur;
        if (arch.output_activation == OutputActivation::relu) {
          for (auto& v : next.data) v = v > S(0) ? v : S(0);
        } else {
          for (auto& v : next.data) v = std::tanh(v);
        }
        break;
      case OpKind::avgpool:
        throw Error("generator has no pooling op");
    }
    if (trace) tr.values.push_back(std::move(cur));
    cur = std::move(next);
  }
  if (trace) tr.values.push_back(cur);
  return cur;
}

template <typename S>
void generator_backward(const ArchConfig& arch, const GeneratorParams<S>& g, const GeneratorTrace<S>& trace,
                        const BatchTensor<S>& grad_out, GeneratorParams<S>& grads) {
  const auto ops = generator_ops(arch);
  if (trace.values.size() != ops.size() + 1) throw Error("generator trace is incomplete");
  if (!grad_out.same_shape(trace.values.back())) throw ShapeError("generator output gradient has the wrong shape");
  const S slope = static_cast<S>(arch.leaky_slope);
  BatchTensor<S> grad = grad_out;
  for (int idx = static_cast<int>(ops.size()) - 1; idx >= 0; --idx) {
    const Op& op = ops[idx];
    const auto& in = trace.values[idx];
    switch (op.kind) {
      case OpKind::output_activation: {
        const auto& out = trace.values[idx + 1];
        for (std::size_t i = 0; i < grad.data.size(); ++i) {
          if (arch.output_activation == OutputActivation::relu) {
            if (!(in.data[i] > S(0))) grad.data[i] = S(0);
          } else {
            grad.data[i] *= S(1) - out.data[i] * out.data[i];
          }
        }
        break;
      }
      case OpKind::conv: {
        const auto& c = gen_conv(g, op.index);
        conv_weight_grad(c, in, grad, gen_conv(grads, op.index));
        grad = conv_transpose_apply(c, grad);
        break;
      }
      case OpKind::batchnorm: {
        const auto& cache = trace.norms[op.index];
        if (cache.xhat.size() != grad.data.size()) throw Error("generator backward needs a train-mode trace");
        auto& gb = grads.norms[op.index];
        BatchTensor<S> dx(grad.batch, grad.channels, grad.length);
        k::batchnorm_train_backward(grad.data.data(), cache.xhat.data(), cache.inv_std.data(),
                                    g.norms[op.index].gamma.data.data(), grad.batch, grad.channels, grad.length,
                                    dx.data.data(), gb.gamma.data.data(), gb.beta.data.data());
        grad = std::move(dx);
        break;
      }
      case OpKind::leaky_relu:
        grad = lrelu_mask_apply(in, grad, slope);
        break;
      case OpKind::upsample: {
        BatchTensor<S> dx(grad.batch, grad.channels, grad.length / 2);
        k::upsample2_backward(grad.data.data(), grad.batch * grad.channels, grad.length / 2, dx.data.data());
        grad = std::move(dx);
        break;
      }
      case OpKind::dense:
        k::dense_backward<S>(in.data.data(), grad.data.data(), in.batch, arch.latent_dim, g.fc.weight.data.data(),
                             arch.channels * arch.base_len, nullptr, grads.fc.weight.data.data(),
                             grads.fc.bias.data.data());
        break;
      case OpKind::avgpool:
        throw Error("generator has no pooling op");
    }
  }
}

template <typename S>
void update_running_stats(GeneratorParams<S>& g, const GeneratorTrace<S>& trace, double momentum) {
  for (std::size_t i = 0; i < g.norms.size(); ++i) {
    const auto& cache = trace.norms[i];
    if (cache.mean.empty()) throw Error("running statistics need a train-mode trace");
    auto& bn = g.norms[i];
    for (std::size_t c = 0; c < cache.mean.size(); ++c) {
      bn.running_mean.data[c] =
          static_cast<S>(momentum * bn.running_mean.data[c] + (1.0 - momentum) * cache.mean[c]);
      bn.running_var.data[c] = static_cast<S>(momentum * bn.running_var.data[c] + (1.0 - momentum) * cache.var[c]);
    }
  }
}

template <typename S>
std::vector<S> discriminator_forward(const ArchConfig& arch, const DiscriminatorParams<S>& d,
                                     const BatchTensor<S>& x, DiscriminatorTrace<S>* trace) {
  audit_discriminator(arch, d);
  if (x.channels != arch.n_app || x.length != arch.length())
    throw ShapeError("discriminator input must be [batch][" + std::to_string(arch.n_app) + "][" +
                     std::to_string(arch.length()) + "]");
  const S slope = static_cast<S>(arch.leaky_slope);
  const auto ops = discriminator_ops(arch);
  if (trace) trace->values.clear();
  BatchTensor<S> cur = x;
  for (const Op& op : ops) {
    BatchTensor<S> next;
    switch (op.kind) {
      case OpKind::conv:
        next = conv_apply(disc_conv(d, op.index), cur);
        break;
      case OpKind::leaky_relu:
        next = lrelu_apply(cur, slope);
        break;
      case OpKind::avgpool:
        next = pool_apply(cur);
        break;
      case OpKind::dense:
        next = BatchTensor<S>(cur.batch, 1, 1);
        k::dense_forward(cur.data.data(), cur.batch, static_cast<int>(cur.sample_size()), d.fc.weight.data.data(),
                         d.fc.bias.data.data(), 1, next.data.data());
        break;
      default:
        throw Error("unexpected discriminator op");
    }
    if (trace) trace->values.push_back(std::move(cur));
    cur = std::move(next);
  }
  if (trace) trace->values.push_back(cur);
  return cur.data;
}

template <typename S>
BatchTensor<S> discriminator_backward(const ArchConfig& arch, const DiscriminatorParams<S>& d,
                                      const DiscriminatorTrace<S>& trace, std::span<const S> score_grad,
                                      DiscriminatorParams<S>* grads, bool want_input_grad,
                                      std::vector<BatchTensor<S>>* deltas) {
  const auto ops = discriminator_ops(arch);
  if (trace.values.size() != ops.size() + 1) throw Error("discriminator trace is incomplete");
  const int batch = trace.values.front().batch;
  if (static_cast<int>(score_grad.size()) != batch) throw ShapeError("one score gradient per sample expected");
  const S slope = static_cast<S>(arch.leaky_slope);
  BatchTensor<S> grad(batch, 1, 1);
  std::copy(score_grad.begin(), score_grad.end(), grad.data.begin());
  if (deltas) {
    deltas->assign(ops.size() + 1, {});
    (*deltas)[ops.size()] = grad;
  }
  for (int idx = static_cast<int>(ops.size()) - 1; idx >= 0; --idx) {
    const Op& op = ops[idx];
    const auto& in = trace.values[idx];
    const bool need_dx = idx > 0 || want_input_grad || deltas;
    switch (op.kind) {
      case OpKind::dense: {
        BatchTensor<S> dx(in.batch, in.channels, in.length);
        k::dense_backward<S>(in.data.data(), grad.data.data(), in.batch, static_cast<int>(in.sample_size()),
                             d.fc.weight.data.data(), 1, dx.data.data(),
                             grads ? grads->fc.weight.data.data() : nullptr,
                             grads ? grads->fc.bias.data.data() : nullptr);
        grad = std::move(dx);
        break;
      }
      case OpKind::conv: {
        const auto& c = disc_conv(d, op.index);
        if (grads) conv_weight_grad(c, in, grad, disc_conv(*grads, op.index));
        if (need_dx) {
          grad = conv_transpose_apply(c, grad);
        } else {
          grad = BatchTensor<S>();
        }
        break;
      }
      case OpKind::leaky_relu:
        grad = lrelu_mask_apply(in, grad, slope);
        break;
      case OpKind::avgpool: {
        BatchTensor<S> dx(in.batch, in.channels, in.length);
        k::avgpool2_backward(grad.data.data(), in.batch * in.channels, in.length, dx.data.data());
        grad = std::move(dx);
        break;
      }
      default:
        throw Error("unexpected discriminator op");
    }
    if (deltas) (*deltas)[idx] = grad;
  }
  return want_input_grad ? grad : BatchTensor<S>();
}

template <typename S>
void discriminator_input_grad_backward(const ArchConfig& arch, const DiscriminatorParams<S>& d,
                                       const DiscriminatorTrace<S>& trace,
                                       const std::vector<BatchTensor<S>>& deltas,
                                       const BatchTensor<S>& cotangent, DiscriminatorParams<S>& grads) {
  const auto ops = discriminator_ops(arch);
  if (trace.values.size() != ops.size() + 1 || deltas.size() != ops.size() + 1)
    throw Error("double backward needs a full trace and delta set");
  if (!cotangent.same_shape(trace.values.front())) throw ShapeError("cotangent must match the input shape");
  const S slope = static_cast<S>(arch.leaky_slope);
  // The input gradient is a chain of transposed linear maps applied to the
  // dense weights; its adjoint runs the same maps forward without biases.
  BatchTensor<S> tangent = cotangent;
  for (std::size_t idx = 0; idx < ops.size(); ++idx) {
    const Op& op = ops[idx];
    const auto& delta_out = deltas[idx + 1];
    switch (op.kind) {
      case OpKind::conv: {
        const auto& c = disc_conv(d, op.index);
        conv_weight_grad(c, tangent, delta_out, disc_conv(grads, op.index), false);
        tangent = conv_apply(c, tangent, false);
        break;
      }
      case OpKind::leaky_relu:
        tangent = lrelu_mask_apply(trace.values[idx], tangent, slope);
        break;
      case OpKind::avgpool:
        tangent = pool_apply(tangent);
        break;
      case OpKind::dense:
        k::dense_backward<S>(tangent.data.data(), delta_out.data.data(), tangent.batch,
                             static_cast<int>(tangent.sample_size()), d.fc.weight.data.data(), 1, nullptr,
                             grads.fc.weight.data.data(), nullptr);
        break;
      default:
        throw Error("unexpected discriminator op");
    }
  }
}

template <typename S>
EmaState<S> make_ema(const GeneratorParams<S>& live, double decay) {
  if (!(decay >= 0.0 && decay <= 1.0)) throw Error("EMA decay must lie in [0, 1]");
  return EmaState<S>{live, decay};
}

template <typename S>
void ema_update(EmaState<S>& state, const GeneratorParams<S>& live) {
  auto shadow = tensor_list(state.shadow);
  const auto src = tensor_list(live);
  if (shadow.size() != src.size()) throw ShapeError("EMA shadow does not match the generator");
  std::vector<bool> trainable;
  visit_generator(live, [&](const std::string&, const auto&, bool t) { trainable.push_back(t); });
  const double a = state.decay;
  const double b = 1.0 - state.decay;
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!trainable[i]) continue;
    auto& dst = shadow[i].second->data;
    const auto& l = src[i].second->data;
    if (dst.size() != l.size() || shadow[i].second->shape != src[i].second->shape)
      throw ShapeError(shadow[i].first + ": EMA shape mismatch");
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<S>(a * dst[j] + b * l[j]);
  }
}

template <typename S>
BatchTensor<S> sample_latents(int n, int latent_dim, Rng& rng) {
  BatchTensor<S> z(n, latent_dim, 1);
  std::vector<double> draw(latent_dim);
  for (int b = 0; b < n; ++b) {
    rng.note(DrawKind::latent);
    double sq = 0.0;
    for (int i = 0; i < latent_dim; ++i) {
      draw[i] = rng.normal();
      sq += draw[i] * draw[i];
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (int i = 0; i < latent_dim; ++i) z.at(b, i, 0) = static_cast<S>(draw[i] * inv);
  }
  return z;
}

#define MREAL_INSTANTIATE(S)                                                                                    \
  template void audit_shapes<S>(const ModelParams<S>&);                                                         \
  template BatchTensor<S> generator_forward<S>(const ArchConfig&, const GeneratorParams<S>&,                    \
                                               const BatchTensor<S>&, Mode, GeneratorTrace<S>*);                \
  template void generator_backward<S>(const ArchConfig&, const GeneratorParams<S>&, const GeneratorTrace<S>&,   \
                                      const BatchTensor<S>&, GeneratorParams<S>&);                              \
  template void update_running_stats<S>(GeneratorParams<S>&, const GeneratorTrace<S>&, double);                 \
  template std::vector<S> discriminator_forward<S>(const ArchConfig&, const DiscriminatorParams<S>&,            \
                                                   const BatchTensor<S>&, DiscriminatorTrace<S>*);              \
  template BatchTensor<S> discriminator_backward<S>(const ArchConfig&, const DiscriminatorParams<S>&,           \
                                                    const DiscriminatorTrace<S>&, std::span<const S>,           \
                                                    DiscriminatorParams<S>*, bool, std::vector<BatchTensor<S>>*); \
  template void discriminator_input_grad_backward<S>(const ArchConfig&, const DiscriminatorParams<S>&,          \
                                                     const DiscriminatorTrace<S>&,                              \
                                                     const std::vector<BatchTensor<S>>&, const BatchTensor<S>&, \
                                                     DiscriminatorParams<S>&);                                  \
  template EmaState<S> make_ema<S>(const GeneratorParams<S>&, double);                                          \
  template void ema_update<S>(EmaState<S>&, const GeneratorParams<S>&);                                         \
  template BatchTensor<S> sample_latents<S>(int, int, Rng&);

MREAL_INSTANTIATE(float)
MREAL_INSTANTIATE(double)
#undef MREAL_INSTANTIATE

template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template GeneratorParams<double> cast_generator<double, float>(const GeneratorParams<float>&);
template GeneratorParams<float> cast_generator<float, double>(const GeneratorParams<double>&);

}  // namespace mreal
