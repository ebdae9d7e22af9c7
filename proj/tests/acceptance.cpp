// Acceptance suite. One PASS/FAIL line per check; `--only N` runs criterion N.
//
//   mreal_acceptance [--only N] [--work DIR]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>
#include <spdlog/spdlog.h>

#include "mreal/augment.hpp"
#include "mreal/checkpoint.hpp"
#include "mreal/config.hpp"
#include "mreal/data.hpp"
#include "mreal/generate.hpp"
#include "mreal/kernels.hpp"
#include "mreal/metrics.hpp"
#include "mreal/model.hpp"
#include "mreal/rng.hpp"
#include "mreal/synthgen.hpp"
#include "mreal/training.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace mreal;

namespace {

int g_failures = 0;
fs::path g_work = fs::current_path();

void check(int criterion, const std::string& what, bool ok, const std::string& detail = "") {
  std::printf("%s [%d] %s%s%s\n", ok ? "PASS" : "FAIL", criterion, what.c_str(), detail.empty() ? "" : ": ",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(std::abs(want), 1e-300); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Shape audit at the published size.

void criterion_1() {
  ArchConfig arch;  // defaults: 4 blocks, latent 128, 512 channels, kernel 15, 2 appliances
  auto t0 = std::chrono::steady_clock::now();
  bool audit_ok = true;
  try {
    audit_shapes(zero_params(arch));
  } catch (const std::exception&) {
    audit_ok = false;
  }
  const auto params = zero_params(arch);
  const auto fc = expected_shapes(arch).front();
  check(1, "every named tensor matches its derived shape", audit_ok,
        "G.fc.weight [" + shape_string(fc.second) + "]");

  Rng rng(1);
  GeneratorTrace<float> gt;
  const auto z = sample_latents<float>(1, arch.latent_dim, rng);
  const auto x = generator_forward(arch, params.gen, z, Mode::eval, &gt);
  DiscriminatorTrace<float> dt;
  const auto scores = discriminator_forward(arch, params.disc, x, &dt);
  const double elapsed = seconds_since(t0);

  check(1, "generator maps 128 -> 2x720", z.channels == 128 && x.channels == 2 && x.length == 720,
        std::to_string(x.channels) + "x" + std::to_string(x.length));
  check(1, "discriminator maps 2x720 -> 1", scores.size() == 1 && dt.values.back().sample_size() == 1);

  const auto gops = generator_ops(arch);
  std::vector<int> g_lengths;
  for (std::size_t k = 0; k < gops.size(); ++k)
    if (gops[k].kind == OpKind::conv && gops[k].index >= 0 && gops[k].index % 2 == 0)
      g_lengths.push_back(gt.values[k].length);
  const auto dops = discriminator_ops(arch);
  std::vector<int> d_lengths;
  for (std::size_t k = 0; k < dops.size(); ++k)
    if (dops[k].kind == OpKind::conv && dops[k].index >= 0 && dops[k].index % 2 == 0)
      d_lengths.push_back(dt.values[k].length);
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (int x : v) s += (s.empty() ? "" : "/") + std::to_string(x);
    return s;
  };
  check(1, "generator block lengths 45/90/180/360/720", g_lengths == std::vector<int>{45, 90, 180, 360, 720},
        join(g_lengths));
  check(1, "discriminator block lengths 720/360/180/90/45", d_lengths == std::vector<int>{720, 360, 180, 90, 45},
        join(d_lengths));
  check(1, "runtime < 1 s", elapsed < 1.0, fmt("%.3f s", elapsed));
}

// ---------------------------------------------------------------------------
// 2. Loss formulas against closed forms.

// Discriminator computing scale * sum(x) for nonnegative inputs: every conv
// is the identity through its centre tap and each pooling halves the length,
// so the dense weight 2^n_blocks * scale undoes the averaging.
DiscriminatorParams<double> linear_discriminator(const ArchConfig& arch, double scale) {
  auto d = cast_params<double>(zero_params(arch)).disc;
  for (int a = 0; a < arch.n_app; ++a) d.in.weight.data[a] = 1.0;  // [1][n_app][1]
  const int centre = arch.kernel_len / 2;
  for (auto& c : d.convs) c.weight.data[centre] = 1.0;  // [1][1][k]
  for (auto& w : d.fc.weight.data) w = scale * static_cast<double>(1 << arch.n_blocks);
  return d;
}

void criterion_2() {
  auto t0 = std::chrono::steady_clock::now();
  {
    const std::vector<double> r{1, 3}, f{0, 0};
    check(2, "w_distance({1,3},{0,0}) = 2", w_distance<double>(r, f) == 2.0);
    const std::vector<double> same{0.3, -1.2, 4.0};
    check(2, "w_distance(x, x) = 0", w_distance<double>(same, same) == 0.0);
    const std::vector<double> ones{1, 1};
    check(2, "drift_penalty(mean 1, mean 1, 1e-3) = 4e-3", rel_err(drift_penalty<double>(ones, ones, 1e-3), 4e-3) < 1e-12);
    const std::vector<double> a{1, -2}, b{0.5, 0.5};
    check(2, "drift_penalty = 0 when the means cancel", drift_penalty<double>(a, b, 1e-3) == 0.0);
  }
  {
    Rng rng(7);
    double worst_w = 0.0, worst_d = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
      const int m = 1 + static_cast<int>(rng.below(100));
      std::vector<double> r(m), f(m);
      for (auto& v : r) v = 10.0 * rng.normal();
      for (auto& v : f) v = 10.0 * rng.normal();
      const double mr = oracle::naive_mean(r), mf = oracle::naive_mean(f);
      worst_w = std::max(worst_w, std::abs(w_distance<double>(r, f) - (mr - mf)));
      worst_d = std::max(worst_d, std::abs(drift_penalty<double>(r, f, 1e-3) - 1e-3 * (mr + mf) * (mr + mf)));
    }
    check(2, "w_distance matches summation oracle (200 random batches)", worst_w <= 1e-12, fmt("max abs err %.2e", worst_w));
    check(2, "drift_penalty matches scalar oracle (200 random batches)", worst_d <= 1e-12, fmt("max abs err %.2e", worst_d));
  }

  ArchConfig arch;
  arch.channels = 1;
  const int d = arch.n_app * arch.length();
  Rng rng(11);
  BatchTensor<double> x(1, arch.n_app, arch.length());
  for (auto& v : x.data) v = rng.uniform();

  {
    const auto disc = linear_discriminator(arch, 2.0);
    DiscriminatorTrace<double> tr;
    const auto s = discriminator_forward(arch, disc, x, &tr);
    double sum = 0.0;
    for (double v : x.data) sum += v;
    check(2, "constructed discriminator computes 2*sum(x)", rel_err(s[0], 2.0 * sum) < 1e-12,
          fmt("rel err %.2e", rel_err(s[0], 2.0 * sum)));
    const std::vector<double> one{1.0};
    const auto g = discriminator_backward<double>(arch, disc, tr, one, nullptr, true);
    double worst = 0.0;
    for (double v : g.data) worst = std::max(worst, std::abs(v - 2.0));
    check(2, "autodiff input gradient of 2*sum(x) is 2 everywhere", worst < 1e-12, fmt("max abs err %.2e", worst));
    const double want = 10.0 * std::pow(2.0 * std::sqrt(static_cast<double>(d)) - 1.0, 2);
    const double got = gradient_penalty(arch, disc, x, 1.0, 10.0);
    check(2, "gradient penalty for D = 2*sum(x), W = 1, lambda = 10", rel_err(got, want) < 1e-6,
          fmt("got %.10g want %.10g", got, want));
    bool zero = true;
    for (double w : {0.0, -1e-9, -1.0, -100.0}) zero = zero && gradient_penalty(arch, disc, x, w, 10.0) == 0.0;
    check(2, "gradient penalty is exactly 0 for W <= 0", zero);

    // Full loss with real and fake ordered so that W < 0.
    BatchTensor<double> hi = x, lo = x;
    for (auto& v : lo.data) v *= 0.5;
    const std::vector<double> eps{0.5};
    const auto xh = interpolate<double>(lo, hi, eps);
    const auto loss = discriminator_loss(arch, disc, lo, hi, xh, 10.0, 1e-3, static_cast<DiscriminatorParams<double>*>(nullptr));
    check(2, "discriminator loss carries no penalty when W < 0", loss.w_tilde < 0.0 && loss.grad_penalty == 0.0,
          fmt("W = %.4g", loss.w_tilde));
  }
  {
    const auto disc = linear_discriminator(arch, 1.0 / std::sqrt(static_cast<double>(d)));
    const double got = gradient_penalty(arch, disc, x, 1.0, 10.0);
    check(2, "unit-norm linear discriminator gives zero penalty", std::abs(got) < 1e-20, fmt("%.2e", got));
  }
  {
    LoadDay a("a", 2), b("b", 2);
    std::fill(a.values.begin(), a.values.end(), 2.0);
    std::fill(b.values.begin(), b.values.end(), 4.0);
    const auto mid = interpolate(a, b, 0.5);
    const bool ok = std::all_of(mid.values.begin(), mid.values.end(), [](double v) { return v == 3.0; }) &&
                    interpolate(a, b, 1.0).values == a.values && interpolate(a, b, 0.0).values == b.values;
    check(2, "interpolation endpoints and midpoint", ok);
  }
  const double elapsed = seconds_since(t0);
  check(2, "runtime < 10 s", elapsed < 10.0, fmt("%.2f s", elapsed));
}

// ---------------------------------------------------------------------------
// 3. Autodiff against central finite differences.

template <typename S>
struct GradProblem {
  ArchConfig arch;
  ModelParams<S> params;
  BatchTensor<S> real, fake, x_hat, z;
  FakeAugmentation<S> aug;
  double lambda = 10.0;
  double beta = 1e-3;
};

template <typename S>
GradProblem<S> make_problem(std::uint64_t seed, int width, int m) {
  GradProblem<S> p;
  p.arch.channels = width;
  p.params = cast_params<S>(init_params(p.arch, seed));
  const int len = p.arch.length();
  Rng rng(seed * 7919 + 1);
  p.real = BatchTensor<S>(m, p.arch.n_app, len);
  p.fake = BatchTensor<S>(m, p.arch.n_app, len);
  for (auto& v : p.real.data) v = static_cast<S>(0.3 * rng.uniform());
  for (auto& v : p.fake.data) v = static_cast<S>(0.3 * rng.uniform() * rng.uniform());
  std::vector<double> eps(m);
  for (auto& e : eps) e = rng.uniform();
  p.x_hat = interpolate<S>(p.real, p.fake, eps);
  p.z = sample_latents<S>(m, p.arch.latent_dim, rng);
  p.aug.delta = static_cast<int>(rng.below(len)) - len / 2;
  p.aug.noise = BatchTensor<S>(m, p.arch.n_app, len);
  for (auto& v : p.aug.noise.data) v = static_cast<S>(0.005 * rng.normal());
  p.beta = seed % 2 ? 1e-3 : 0.5;

  // Put the penalty in its active region: W > 0 and input-gradient norms
  // around 3. Scaling the final dense layer scales every input gradient.
  const auto s_real = discriminator_forward(p.arch, p.params.disc, p.real);
  const auto s_fake = discriminator_forward(p.arch, p.params.disc, p.fake);
  if (w_distance<S>(s_real, s_fake) <= 0.0) std::swap(p.real, p.fake);
  DiscriminatorTrace<S> tr;
  discriminator_forward(p.arch, p.params.disc, p.x_hat, &tr);
  const std::vector<S> ones(m, S(1));
  const auto g = discriminator_backward<S>(p.arch, p.params.disc, tr, ones, nullptr, true);
  double mean_norm = 0.0;
  for (int b = 0; b < m; ++b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < g.sample_size(); ++i) sq += double(g.sample(b)[i]) * g.sample(b)[i];
    mean_norm += std::sqrt(sq) / m;
  }
  for (auto& w : p.params.disc.fc.weight.data) w = static_cast<S>(w * 3.0 / mean_norm);
  return p;
}

// f returns the value and an id of the smooth piece it was evaluated on.
struct Sample {
  double value;
  int piece;
};

// Central difference of f along unit direction `dir` (same layout as the
// tensors). The step is halved while either end lands on another piece.
template <typename P, typename F>
double directional_fd(P& params, const std::vector<std::pair<std::string, std::vector<double>>>& dir, double h, F&& f) {
  auto tensors = tensor_list(params);
  auto apply = [&](double step) {
    for (std::size_t i = 0; i < tensors.size(); ++i)
      for (std::size_t j = 0; j < dir[i].second.size(); ++j)
        tensors[i].second->data[j] = static_cast<std::remove_reference_t<decltype(tensors[i].second->data[j])>>(
            tensors[i].second->data[j] + step * dir[i].second[j]);
  };
  const P saved = params;
  const int base = f().piece;
  for (int tries = 0;; ++tries, h *= 0.5) {
    apply(h);
    const Sample fp = f();
    params = saved;
    apply(-h);
    const Sample fm = f();
    params = saved;
    if ((fp.piece == base && fm.piece == base) || tries == 8) return (fp.value - fm.value) / (2.0 * h);
  }
}

// Directions: the whole gradient, then the gradient blocks of every other
// tensor (starting at `phase`), so two seeds together cover each tensor.
// Returns the worst relative error of <g, dir> against the difference quotient.
template <typename P, typename F>
double check_param_grad(P& params, const P& grads, double h, int phase, F&& f, std::string* worst_name) {
  const auto g = tensor_list(const_cast<P&>(grads));
  std::vector<std::vector<std::pair<std::string, std::vector<double>>>> dirs;
  std::vector<std::string> names;
  auto blank = [&] {
    std::vector<std::pair<std::string, std::vector<double>>> d;
    for (auto& [name, t] : g) d.emplace_back(name, std::vector<double>(t->size(), 0.0));
    return d;
  };
  double total_sq = 0.0;
  for (auto& [name, t] : g)
    for (auto v : t->data) total_sq += double(v) * v;
  {
    auto d = blank();
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g[i].second->size(); ++j) d[i].second[j] = g[i].second->data[j] / std::sqrt(total_sq);
    dirs.push_back(std::move(d));
    names.push_back("all");
  }
  for (std::size_t i = phase; i < g.size(); i += 2) {
    double sq = 0.0;
    for (auto v : g[i].second->data) sq += double(v) * v;
    // Blocks carrying a negligible share of the gradient are below the
    // resolution of a difference quotient on the full loss.
    if (sq < 1e-6 * total_sq) continue;
    auto d = blank();
    for (std::size_t j = 0; j < g[i].second->size(); ++j) d[i].second[j] = g[i].second->data[j] / std::sqrt(sq);
    dirs.push_back(std::move(d));
    names.push_back(g[i].first);
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < dirs.size(); ++k) {
    double analytic = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      for (std::size_t j = 0; j < g[i].second->size(); ++j) analytic += g[i].second->data[j] * dirs[k][i].second[j];
    const double fd = directional_fd(params, dirs[k], h, f);
    const double e = rel_err(fd, analytic);
    if (e > worst) {
      worst = e;
      if (worst_name) *worst_name = names[k];
    }
  }
  return worst;
}

// The discriminator is piecewise linear, so its input gradient (and hence
// the penalty) jumps whenever a perturbation flips a leaky-ReLU unit. With
// millions of units such flips land inside almost any step h. Autodiff
// differentiates the piece the base point sits on, so the difference
// quotients below evaluate that same piece: the activation pattern is
// recorded at the base point and held fixed while parameters move.
template <typename S>
struct FrozenPattern {
  std::vector<std::vector<unsigned char>> on;  // one per leaky-ReLU op
  std::vector<std::pair<int, int>> dims;       // (channels, length) entering each op
  int batch = 0;
};

template <typename S>
FrozenPattern<S> record_pattern(const ArchConfig& arch, const DiscriminatorParams<S>& d, const BatchTensor<S>& x) {
  DiscriminatorTrace<S> tr;
  discriminator_forward(arch, d, x, &tr);
  const auto ops = discriminator_ops(arch);
  FrozenPattern<S> p;
  p.batch = x.batch;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const auto& v = tr.values[k];
    p.dims.emplace_back(v.channels, v.length);
    if (ops[k].kind != OpKind::leaky_relu) continue;
    std::vector<unsigned char> m(v.data.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = v.data[i] > S(0);
    p.on.push_back(std::move(m));
  }
  return p;
}

template <typename S>
const Conv1d<S>& conv_of(const DiscriminatorParams<S>& d, int index) {
  return index < 0 ? d.in : d.convs[index];
}

template <typename S>
std::vector<double> frozen_scores(const ArchConfig& arch, const DiscriminatorParams<S>& d, const BatchTensor<S>& x,
                                  const FrozenPattern<S>& pat) {
  const double slope = arch.leaky_slope;
  std::vector<S> cur = x.data;
  int ch = x.channels, len = x.length, mi = 0;
  const int n = x.batch;
  std::vector<double> scores(n, 0.0);
  for (const Op& op : discriminator_ops(arch)) {
    switch (op.kind) {
      case OpKind::conv: {
        const auto& c = conv_of(d, op.index);
        const int out = static_cast<int>(c.weight.shape[0]), k = static_cast<int>(c.weight.shape[2]);
        std::vector<S> next(static_cast<std::size_t>(n) * out * len);
        kernels::conv1d_forward(cur.data(), n, ch, len, c.weight.data.data(), c.bias.data.data(), out, k, next.data());
        cur = std::move(next);
        ch = out;
        break;
      }
      case OpKind::leaky_relu: {
        const auto& m = pat.on[mi++];
        for (std::size_t i = 0; i < cur.size(); ++i)
          if (!m[i]) cur[i] = static_cast<S>(slope * cur[i]);
        break;
      }
      case OpKind::avgpool: {
        std::vector<S> next(cur.size() / 2);
        kernels::avgpool2(cur.data(), n * ch, len, next.data());
        cur = std::move(next);
        len /= 2;
        break;
      }
      case OpKind::dense: {
        const std::size_t in = static_cast<std::size_t>(ch) * len;
        for (int b = 0; b < n; ++b) {
          double s = d.fc.bias.data[0];
          for (std::size_t i = 0; i < in; ++i) s += double(cur[b * in + i]) * d.fc.weight.data[i];
          scores[b] = s;
        }
        break;
      }
      default:
        throw std::logic_error("unexpected discriminator op");
    }
  }
  return scores;
}

// Input gradient of each sample's score on the frozen piece. It does not
// depend on the input at all, only on the parameters and the pattern.
template <typename S>
BatchTensor<S> frozen_input_grad(const ArchConfig& arch, const DiscriminatorParams<S>& d, const FrozenPattern<S>& pat) {
  const double slope = arch.leaky_slope;
  const auto ops = discriminator_ops(arch);
  const int n = pat.batch;
  int mi = static_cast<int>(pat.on.size());
  std::vector<S> g;
  for (int k = static_cast<int>(ops.size()) - 1; k >= 0; --k) {
    const auto [ch, len] = pat.dims[k];
    const std::size_t rows = static_cast<std::size_t>(n) * ch;
    switch (ops[k].kind) {
      case OpKind::dense: {
        const std::size_t in = static_cast<std::size_t>(ch) * len;
        g.resize(n * in);
        for (int b = 0; b < n; ++b)
          for (std::size_t i = 0; i < in; ++i) g[b * in + i] = d.fc.weight.data[i];
        break;
      }
      case OpKind::leaky_relu: {
        const auto& m = pat.on[--mi];
        for (std::size_t i = 0; i < g.size(); ++i)
          if (!m[i]) g[i] = static_cast<S>(slope * g[i]);
        break;
      }
      case OpKind::avgpool: {
        std::vector<S> next(rows * len);
        kernels::avgpool2_backward(g.data(), static_cast<int>(rows), len, next.data());
        g = std::move(next);
        break;
      }
      case OpKind::conv: {
        const auto& c = conv_of(d, ops[k].index);
        const int out = static_cast<int>(c.weight.shape[0]), kk = static_cast<int>(c.weight.shape[2]);
        std::vector<S> next(rows * len);
        kernels::conv1d_backward_input(g.data(), n, out, len, c.weight.data.data(), ch, kk, next.data());
        g = std::move(next);
        break;
      }
      default:
        throw std::logic_error("unexpected discriminator op");
    }
  }
  BatchTensor<S> out(n, pat.dims[0].first, pat.dims[0].second);
  out.data = std::move(g);
  return out;
}

// Generator counterpart: leaky-ReLU and output-ReLU patterns held fixed,
// batch norm in train mode as in the loss.
struct GeneratorPattern {
  std::vector<std::vector<unsigned char>> on;
};

template <typename S>
GeneratorPattern record_pattern(const ArchConfig& arch, const GeneratorParams<S>& g, const BatchTensor<S>& z) {
  GeneratorTrace<S> tr;
  generator_forward(arch, g, z, Mode::train, &tr);
  const auto ops = generator_ops(arch);
  GeneratorPattern p;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    if (ops[k].kind != OpKind::leaky_relu && ops[k].kind != OpKind::output_activation) continue;
    const auto& v = tr.values[k];
    std::vector<unsigned char> m(v.data.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = v.data[i] > S(0);
    p.on.push_back(std::move(m));
  }
  return p;
}

template <typename S>
BatchTensor<S> frozen_generator(const ArchConfig& arch, const GeneratorParams<S>& g, const BatchTensor<S>& z,
                                const GeneratorPattern& pat) {
  const int n = z.batch;
  int ch = arch.channels, len = arch.base_len, mi = 0;
  std::vector<S> cur;
  for (const Op& op : generator_ops(arch)) {
    switch (op.kind) {
      case OpKind::dense:
        cur.resize(static_cast<std::size_t>(n) * ch * len);
        kernels::dense_forward(z.data.data(), n, arch.latent_dim, g.fc.weight.data.data(), g.fc.bias.data.data(),
                               ch * len, cur.data());
        break;
      case OpKind::batchnorm: {
        const auto& bn = g.norms[op.index];
        std::vector<S> next(cur.size()), xhat(cur.size()), mean(ch), var(ch), inv(ch);
        kernels::batchnorm_train(cur.data(), n, ch, len, bn.gamma.data.data(), bn.beta.data.data(),
                                 static_cast<S>(kBatchNormEps), next.data(), xhat.data(), mean.data(), var.data(),
                                 inv.data());
        cur = std::move(next);
        break;
      }
      case OpKind::leaky_relu: {
        const auto& m = pat.on[mi++];
        for (std::size_t i = 0; i < cur.size(); ++i)
          if (!m[i]) cur[i] = static_cast<S>(arch.leaky_slope * cur[i]);
        break;
      }
      case OpKind::output_activation: {
        const auto& m = pat.on[mi++];
        for (std::size_t i = 0; i < cur.size(); ++i) {
          if (arch.output_activation == OutputActivation::relu) {
            if (!m[i]) cur[i] = S(0);
          } else {
            cur[i] = std::tanh(cur[i]);
          }
        }
        break;
      }
      case OpKind::upsample: {
        std::vector<S> next(cur.size() * 2);
        kernels::upsample2(cur.data(), n * ch, len, next.data());
        cur = std::move(next);
        len *= 2;
        break;
      }
      case OpKind::conv: {
        const auto& c = op.index < 0 ? g.out : g.convs[op.index];
        const int out = static_cast<int>(c.weight.shape[0]), k = static_cast<int>(c.weight.shape[2]);
        std::vector<S> next(static_cast<std::size_t>(n) * out * len);
        kernels::conv1d_forward(cur.data(), n, ch, len, c.weight.data.data(), c.bias.data.data(), out, k, next.data());
        cur = std::move(next);
        ch = out;
        break;
      }
      default:
        throw std::logic_error("unexpected generator op");
    }
  }
  BatchTensor<S> out(n, ch, len);
  out.data = std::move(cur);
  return out;
}

template <typename S>
std::vector<double> norms_of(const BatchTensor<S>& g) {
  std::vector<double> out(g.batch);
  for (int b = 0; b < g.batch; ++b) {
    double sq = 0.0;
    for (std::size_t i = 0; i < g.sample_size(); ++i) sq += double(g.sample(b)[i]) * g.sample(b)[i];
    out[b] = std::sqrt(sq);
  }
  return out;
}

template <typename S>
struct GradErrors {
  double input = 0.0, disc = 0.0, gen = 0.0;
  std::string disc_at, gen_at;
};

template <typename S>
GradErrors<S> gradient_errors(std::uint64_t seed, double h_input, double h_param) {
  auto p = make_problem<S>(seed, 64, 2);
  GradErrors<S> out;
  const auto& arch = p.arch;
  const int m = p.real.batch;

  const auto pat_real = record_pattern(arch, p.params.disc, p.real);
  const auto pat_fake = record_pattern(arch, p.params.disc, p.fake);
  const auto pat_hat = record_pattern(arch, p.params.disc, p.x_hat);

  // Input gradient of the summed scores, along each sample's gradient.
  {
    DiscriminatorTrace<S> tr;
    discriminator_forward(arch, p.params.disc, p.x_hat, &tr);
    const std::vector<S> ones(m, S(1));
    const auto g = discriminator_backward<S>(arch, p.params.disc, tr, ones, nullptr, true);
    const auto norms = norms_of(g);
    for (int b = 0; b < m; ++b) {
      auto shifted = [&](double step) {
        auto x = p.x_hat;
        for (std::size_t i = 0; i < g.sample_size(); ++i)
          x.sample(b)[i] = static_cast<S>(x.sample(b)[i] + step * g.sample(b)[i] / norms[b]);
        const auto s = frozen_scores(arch, p.params.disc, x, pat_hat);
        double sum = 0.0;
        for (auto v : s) sum += v;
        return sum;
      };
      const double fd = (shifted(h_input) - shifted(-h_input)) / (2.0 * h_input);
      out.input = std::max(out.input, rel_err(fd, norms[b]));
    }
  }
  // Discriminator loss, including the penalty's dependence on W.
  {
    auto grads = zeros_like(p.params.disc);
    discriminator_loss(arch, p.params.disc, p.real, p.fake, p.x_hat, p.lambda, p.beta, &grads);
    auto f = [&] {
      const auto sr = frozen_scores(arch, p.params.disc, p.real, pat_real);
      const auto sf = frozen_scores(arch, p.params.disc, p.fake, pat_fake);
      double mr = 0.0, mf = 0.0;
      for (int b = 0; b < m; ++b) {
        mr += sr[b] / m;
        mf += sf[b] / m;
      }
      const double w = mr - mf;
      double pen = 0.0;
      for (double nb : norms_of(frozen_input_grad(arch, p.params.disc, pat_hat))) {
        const double e = std::max(0.0, nb - 1.0);
        pen += e * e / m;
      }
      return Sample{-w + p.lambda * std::max(0.0, w) * pen + p.beta * (mr + mf) * (mr + mf), w > 0.0};
    };
    out.disc = check_param_grad(p.params.disc, grads, h_param, static_cast<int>(seed % 2), f, &out.disc_at);
  }
  // Generator loss through the augmentation of fakes. On the frozen piece
  // each score is affine in its input with slope equal to the input gradient,
  // and the generator's own pattern is frozen the same way.
  {
    auto grads = zeros_like(p.params.gen);
    GeneratorTrace<S> gtr;
    const auto base = generator_forward(arch, p.params.gen, p.z, Mode::train, &gtr);
    auto augment = [&](const BatchTensor<S>& x) {
      BatchTensor<S> a(x.batch, x.channels, x.length);
      for (std::size_t r = 0; r < static_cast<std::size_t>(x.batch) * x.channels; ++r) {
        rotate(x.data.data() + r * x.length, x.length, p.aug.delta, a.data.data() + r * x.length);
        for (int t = 0; t < x.length; ++t) a.data[r * x.length + t] += p.aug.noise.data[r * x.length + t];
      }
      return a;
    };
    const auto pat_gen = record_pattern(arch, p.params.disc, augment(base));
    const auto slope = frozen_input_grad(arch, p.params.disc, pat_gen);
    generator_loss(arch, p.params.gen, p.params.disc, p.z, p.aug, &grads);
    const auto pat_g = record_pattern(arch, p.params.gen, p.z);
    auto f = [&] {
      const auto a = augment(frozen_generator(arch, p.params.gen, p.z, pat_g));
      double s = 0.0;
      for (std::size_t i = 0; i < a.data.size(); ++i) s += double(a.data[i]) * slope.data[i];
      return Sample{-s / m, 0};
    };
    out.gen = check_param_grad(p.params.gen, grads, h_param, static_cast<int>(seed % 2), f, &out.gen_at);
  }
  return out;
}

void criterion_3() {
  auto t0 = std::chrono::steady_clock::now();
  const int n_seeds = 8;
  double w64[3] = {0, 0, 0}, w32[3] = {0, 0, 0};
  std::string at64[2], at32[2];
  auto keep = [](double e, double& worst, std::string& at, const std::string& where) {
    if (e > worst) {
      worst = e;
      at = where;
    }
  };
  for (int s = 1; s <= n_seeds; ++s) {
    const auto e = gradient_errors<double>(s, 1e-5, 1e-5);
    w64[0] = std::max(w64[0], e.input);
    keep(e.disc, w64[1], at64[0], e.disc_at);
    keep(e.gen, w64[2], at64[1], e.gen_at);
    const auto f = gradient_errors<float>(s, 1e-3, 1e-3);
    w32[0] = std::max(w32[0], f.input);
    keep(f.disc, w32[1], at32[0], f.disc_at);
    keep(f.gen, w32[2], at32[1], f.gen_at);
    spdlog::debug("seed {}: f64 {:.2e} {:.2e} {:.2e}  f32 {:.2e} {:.2e} {:.2e}", s, e.input, e.disc, e.gen, f.input,
                  f.disc, f.gen);
  }
  check(3, "64-bit input gradient of D, 8 seeds, width 64", w64[0] <= 1e-5, fmt("worst rel err %.2e", w64[0]));
  check(3, "64-bit discriminator-loss parameter gradient", w64[1] <= 1e-5, fmt("worst rel err %.2e", w64[1]) + " at " + at64[0]);
  check(3, "64-bit generator-loss parameter gradient", w64[2] <= 1e-5, fmt("worst rel err %.2e", w64[2]) + " at " + at64[1]);
  check(3, "32-bit input gradient of D", w32[0] <= 1e-2, fmt("worst rel err %.2e", w32[0]));
  check(3, "32-bit discriminator-loss parameter gradient", w32[1] <= 1e-2, fmt("worst rel err %.2e", w32[1]) + " at " + at32[0]);
  check(3, "32-bit generator-loss parameter gradient", w32[2] <= 1e-2, fmt("worst rel err %.2e", w32[2]) + " at " + at32[1]);
  const double elapsed = seconds_since(t0);
  check(3, "runtime < 2 min", elapsed < 120.0, fmt("%.1f s", elapsed));
}

// ---------------------------------------------------------------------------
// 4. Augmentation invariants and per-step draw counts.

LoadDataset small_synthetic(int n, std::uint64_t seed) {
  SynthConfig sc;
  sc.n_samples = n;
  sc.seed = seed;
  return generate_synthetic(sc);
}

void criterion_4() {
  auto t0 = std::chrono::steady_clock::now();
  const int len = kStepsPerDay;
  Rng rng(4);
  std::vector<double> x(len);
  for (auto& v : x) v = std::floor(rng.uniform() * 50.0);  // many ties

  {
    Rng r(1);
    const auto y = augment_channel(x, 0, 0.0, r);
    check(4, "zero shift and zero noise is the identity", y == x);
    const auto day = small_synthetic(1, 3).samples[0];
    Rng r2(1);
    check(4, "identity holds per sample", augment_sample(day, {0, 0.0}, r2).values == day.values);
  }
  {
    bool ok = true;
    std::vector<double> a(len), b(len), c(len);
    for (int trial = 0; trial < 200 && ok; ++trial) {
      const int d1 = static_cast<int>(rng.below(6 * len)) - 3 * len;
      const int d2 = static_cast<int>(rng.below(6 * len)) - 3 * len;
      rotate(x.data(), len, d1, a.data());
      rotate(a.data(), len, d2, b.data());
      const int sum = ((d1 + d2) % len + len) % len;
      for (int t = 0; t < len; ++t) c[t] = x[(t + sum) % len];
      ok = b == c;
    }
    check(4, "shift composition equals the summed shift mod T (200 pairs)", ok);
  }
  {
    const auto ds = small_synthetic(20, 5);
    bool ok = true;
    for (const auto& day : ds.samples) {
      Rng r(9);
      const int delta = static_cast<int>(r.below(2000)) - 1000;
      const auto out = augment_sample(day, {delta, 0.0}, r);
      for (int j = 0; j < day.n_app; ++j) {
        std::vector<double> u(day.channel(j), day.channel(j) + len), v(out.channel(j), out.channel(j) + len);
        std::sort(u.begin(), u.end());
        std::sort(v.begin(), v.end());
        ok = ok && u == v;
      }
    }
    check(4, "noise-free shifts preserve each channel's value multiset", ok);
  }
  {
    ArchConfig arch;
    arch.channels = 8;
    arch.latent_dim = 16;
    TrainConfig cfg;
    cfg.minibatch = 4;
    cfg.n_dstep = 5;
    cfg.seed = 3;
    const auto raw = small_synthetic(10, 8);
    const auto normalized = normalize(raw, compute_stats(raw));
    Trainer trainer(cfg, arch, normalized);
    std::map<DrawKind, std::size_t> counts;
    trainer.rng().set_hook([&](DrawKind k, std::size_t n) { counts[k] += n; });
    const int m = cfg.minibatch, n = cfg.n_dstep;
    bool ok = true;
    std::string detail;
    for (int s = 0; s < 3; ++s) {
      counts.clear();
      trainer.step();
      const bool step_ok = counts[DrawKind::shift] == 1 &&
                           counts[DrawKind::noise_scale] == static_cast<std::size_t>(m * (2 * n + 1)) &&
                           counts[DrawKind::epsilon] == static_cast<std::size_t>(m * n);
      ok = ok && step_ok;
      detail = "shift " + std::to_string(counts[DrawKind::shift]) + ", noise scales " +
               std::to_string(counts[DrawKind::noise_scale]) + ", eps " + std::to_string(counts[DrawKind::epsilon]);
    }
    check(4, "per-step draws: 1 shift, m(2n+1) noise scales, mn interpolation weights (3 steps)", ok, detail);
    counts.clear();
    trainer.step();
    check(4, "per-step latents: m(n+1)", counts[DrawKind::latent] == static_cast<std::size_t>(m * (n + 1)),
          std::to_string(counts[DrawKind::latent]));
  }
  const double elapsed = seconds_since(t0);
  check(4, "runtime < 30 s", elapsed < 30.0, fmt("%.1f s", elapsed));
}

// ---------------------------------------------------------------------------
// 5. Metric oracles.

void criterion_5() {
  auto t0 = std::chrono::steady_clock::now();
  Rng rng(55);
  {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<double> a(50), b(50);
      // Mix continuous values with heavy ties.
      for (auto& v : a) v = trial % 3 == 0 ? std::floor(rng.uniform() * 6) : rng.normal() * 3.0;
      for (auto& v : b) v = trial % 3 == 0 ? std::floor(rng.uniform() * 6) : rng.normal() + 1.0;
      const double want = oracle::assignment_cost([&] {
        std::vector<std::vector<double>> c(50, std::vector<double>(50));
        for (int i = 0; i < 50; ++i)
          for (int j = 0; j < 50; ++j) c[i][j] = std::abs(a[i] - b[j]);
        return c;
      }()) / 50.0;
      worst = std::max(worst, std::abs(wasserstein1_1d(a, b) - want));
    }
    check(5, "1-D W1 matches the assignment oracle, 100 trials of 50 points", worst <= 1e-9, fmt("max abs err %.2e", worst));
    double worst_uneq = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> a(7 + trial), b(13 - trial % 4);
      for (auto& v : a) v = rng.normal();
      for (auto& v : b) v = rng.uniform() * 2.0;
      worst_uneq = std::max(worst_uneq, std::abs(wasserstein1_1d(a, b) - oracle::w1_by_assignment(a, b)));
    }
    check(5, "1-D W1 with unequal sizes matches the replicated assignment oracle", worst_uneq <= 1e-9,
          fmt("max abs err %.2e", worst_uneq));
  }
  {
    const int dim = 45, n = 300;
    std::vector<double> pa(n * dim), shift(dim);
    for (auto& v : pa) v = rng.normal();
    double sn = 0.0;
    for (auto& v : shift) {
      v = rng.normal();
      sn += v * v;
    }
    sn = std::sqrt(sn);
    std::vector<double> pb = pa;
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dim; ++d) pb[i * dim + d] += shift[d];
    const PointCloud a(dim, pa), b(dim, pb);
    const auto dirs = random_directions(dim, 4096, rng);
    const double swd = sliced_wasserstein(a, b, dirs);
    const double analytic = sn * oracle::mean_abs_coordinate(dim);
    check(5, "SWD of a translated cloud within 2% of |v| E|u_1| at 4096 projections", rel_err(swd, analytic) <= 0.02,
          fmt("swd %.5f analytic %.5f rel %.2e", swd, analytic, rel_err(swd, analytic)));
    double exact = 0.0;
    for (int k = 0; k < 4096; ++k) {
      double p = 0.0;
      for (int d = 0; d < dim; ++d) p += dirs[k * dim + d] * shift[d];
      exact += std::abs(p) / 4096;
    }
    check(5, "SWD of a translated cloud equals the mean |<u, v>| over the same directions", rel_err(swd, exact) <= 1e-9,
          fmt("rel %.2e", rel_err(swd, exact)));
  }
  {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const int r = 5 + trial, c = 3 + trial % 7;
      CorrMatrix m1(r, c), m2(r, c);
      std::vector<std::vector<double>> o1(r, std::vector<double>(c)), o2 = o1;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) {
          o1[i][j] = m1(i, j) = 2.0 * rng.uniform() - 1.0;
          o2[i][j] = m2(i, j) = trial % 2 ? m1(i, j) + 0.1 * rng.normal() : 2.0 * rng.uniform() - 1.0;
        }
      worst = std::max(worst, std::abs(corr_matrix_distance(m1, m2) - oracle::corr_distance(o1, o2)));
    }
    check(5, "correlation-matrix distance matches the direct formula", worst <= 1e-12, fmt("max abs err %.2e", worst));

    const auto ds = small_synthetic(200, 12);
    Rng r(1);
    const auto cm = cross_corr_matrix(ds, 0, 1, 0.0, r);
    const int steps = ds.steps();
    std::vector<std::vector<double>> cols(2, std::vector<double>(ds.size()));
    double worst_entry = 0.0;
    for (int i = 0; i < steps; i += 7)
      for (int j = 3; j < steps; j += 11) {
        for (std::size_t s = 0; s < ds.size(); ++s) {
          cols[0][s] = ds.samples[s].at(0, i);
          cols[1][s] = ds.samples[s].at(1, j);
        }
        worst_entry = std::max(worst_entry, std::abs(cm(i, j) - oracle::pearson(cols[0], cols[1])));
      }
    check(5, "cross-correlation entries match Pearson's formula", cm.rows() == steps && cm.cols() == steps &&
          worst_entry <= 1e-12, fmt("max abs err %.2e", worst_entry));
  }
  {
    const auto ds = small_synthetic(40, 13);
    Rng r(2);
    const auto sub = extract_subsequences(ds, 1, 32, 45, r);
    bool windows = true;
    for (std::size_t i = 0; i < sub.cloud.count(); ++i)
      for (int d = 0; d < 45; ++d)
        windows = windows && sub.cloud.point(i)[d] == ds.samples[sub.profile[i]].at(1, sub.offset[i] + d);
    check(5, "subsequences: 32 per profile, dimension 45", sub.cloud.count() == 32 * ds.size() && sub.cloud.dim == 45,
          fmt("%.0f points of dim %.0f", double(sub.cloud.count()), double(sub.cloud.dim)));
    check(5, "every subsequence is the source window", windows);
  }
  {
    // Integer loads whose 5-step windows each sum to a multiple of 5, so the
    // pooled means are integers and mass conservation can be tested exactly.
    LoadDataset ds;
    for (int s = 0; s < 30; ++s) {
      LoadDay day("p" + std::to_string(s), 2);
      for (int j = 0; j < 2; ++j)
        for (int w = 0; w < kStepsPerDay / 5; ++w) {
          int sum = 0;
          for (int t = 0; t < 4; ++t) {
            const int v = static_cast<int>(rng.below(3000));
            day.at(j, 5 * w + t) = v;
            sum += v;
          }
          day.at(j, 5 * w + 4) = (5 - sum % 5) % 5 + 5 * static_cast<int>(rng.below(100));
        }
      ds.samples.push_back(day);
    }
    bool exact = true;
    for (int j = 0; j < 2; ++j) {
      const auto pooled = avg_pool_profiles(ds, j, 5);
      for (std::size_t i = 0; i < ds.size(); ++i) {
        double mass = 0.0, pooled_mass = 0.0;
        for (int t = 0; t < kStepsPerDay; ++t) mass += ds.samples[i].at(j, t);
        for (int d = 0; d < pooled.dim; ++d) pooled_mass += 5.0 * pooled.point(i)[d];
        exact = exact && mass == pooled_mass && pooled.dim == kStepsPerDay / 5;
      }
    }
    check(5, "average pooling conserves per-profile mass exactly", exact);
  }
  const double elapsed = seconds_since(t0);
  check(5, "runtime < 5 min", elapsed < 300.0, fmt("%.1f s", elapsed));
}

// ---------------------------------------------------------------------------
// 6. A dataset compared with itself.

void criterion_6() {
  auto t0 = std::chrono::steady_clock::now();
  SynthConfig sc;
  sc.n_samples = 512;
  sc.seed = 66;
  const auto ds = generate_synthetic(sc);
  EvalOptions eo;
  eo.seed = 3;
  eo.shared_streams = true;
  const auto r = evaluate(ds, ds, eo);
  check(6, "interdependency distance of a dataset with itself <= 1e-12",
        r.interdependency && std::abs(*r.interdependency) <= 1e-12, fmt("%.3e", r.interdependency.value_or(-1.0)));
  for (int a = 0; a < 2; ++a) {
    const auto& m = r.per_appliance[a];
    const std::string app = "appliance " + std::to_string(a);
    check(6, app + " load-value W1 is exactly 0", m.load_values_w1 == 0.0, fmt("%.3e", m.load_values_w1));
    check(6, app + " subsequence SWD is exactly 0", m.subsequences_swd == 0.0, fmt("%.3e", m.subsequences_swd));
    check(6, app + " profile SWD is exactly 0", m.profiles_swd == 0.0, fmt("%.3e", m.profiles_swd));
  }
  const double elapsed = seconds_since(t0);
  check(6, "runtime < 5 min", elapsed < 300.0, fmt("%.1f s", elapsed));
}

// ---------------------------------------------------------------------------
// 8. Bitwise determinism and resume.

struct SmallRun {
  ArchConfig arch;
  TrainConfig cfg;
  LoadDataset normalized;
};

SmallRun small_run() {
  SmallRun r;
  r.arch.channels = 8;
  r.arch.latent_dim = 16;
  r.cfg.minibatch = 4;
  r.cfg.total_steps = 6;
  r.cfg.checkpoint_interval = 2;
  r.cfg.seed = 31;
  r.cfg.learning_rate = 1e-3;  // large enough that every step moves the weights visibly
  const auto raw = small_synthetic(9, 4);  // 9 samples: epochs wrap mid-run
  r.normalized = normalize(raw, compute_stats(raw));
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = g_work / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void criterion_8() {
  auto t0 = std::chrono::steady_clock::now();
  auto run = small_run();
  auto straight = [&](const std::string& name) {
    TrainOptions o;
    o.out_dir = fresh_dir(name);
    train(run.cfg, run.arch, run.normalized, o);
    return o.out_dir;
  };
  const auto a = straight("det_a");
  const auto b = straight("det_b");
  check(8, "two fixed-seed runs give bitwise identical weights",
        slurp(a / "final" / "tensors.bin") == slurp(b / "final" / "tensors.bin"));
  check(8, "two fixed-seed runs give identical logs", slurp(a / "train_log.csv") == slurp(b / "train_log.csv"));
  check(8, "weights moved during training",
        slurp(a / "final" / "tensors.bin") != slurp(a / "ckpt_00000002" / "tensors.bin"));

  const int threads = omp_get_max_threads();
  omp_set_num_threads(3);
  const auto c = straight("det_threads");
  omp_set_num_threads(threads);
  check(8, "three OpenMP threads reproduce the run bitwise",
        slurp(a / "final" / "tensors.bin") == slurp(c / "final" / "tensors.bin"));

  for (int k : {2, 4}) {
    const auto d = fresh_dir("resume_" + std::to_string(k));
    char name[32];
    std::snprintf(name, sizeof name, "ckpt_%08d", k);
    fs::copy(a / name, d / name, fs::copy_options::recursive);
    // Log as it stood when the checkpoint was written, plus rows from later
    // steps that a crash would leave behind.
    fs::copy_file(a / "train_log.csv", d / "train_log.csv");
    TrainOptions o;
    o.out_dir = d;
    o.resume = d / name;
    train(run.cfg, run.arch, run.normalized, o);
    check(8, "resume at step " + std::to_string(k) + " equals the straight run",
          slurp(a / "final" / "tensors.bin") == slurp(d / "final" / "tensors.bin") &&
              slurp(a / "train_log.csv") == slurp(d / "train_log.csv"));
  }

  // Step-level: a trainer rebuilt from a snapshot continues identically.
  {
    Trainer t1(run.cfg, run.arch, run.normalized);
    t1.step();
    Trainer t2(run.cfg, run.normalized, t1.state());
    t1.step();
    t2.step();
    const auto s1 = t1.state(), s2 = t2.state();
    bool same = s1.rng_state == s2.rng_state && s1.cursor == s2.cursor && s1.order == s2.order;
    const auto p1 = tensor_list(const_cast<ModelParams<float>&>(s1.params).disc);
    const auto p2 = tensor_list(const_cast<ModelParams<float>&>(s2.params).disc);
    for (std::size_t i = 0; i < p1.size(); ++i) same = same && p1[i].second->data == p2[i].second->data;
    check(8, "in-memory snapshot continues identically", same);
  }
  const double elapsed = seconds_since(t0);
  check(8, "runtime < 10 min", elapsed < 600.0, fmt("%.1f s", elapsed));
}

// ---------------------------------------------------------------------------
// 9. Normalization round trip and generate -> ingest closure.

// Elementwise relative error; `floor` bounds the denominator away from zero.
double round_trip_error(const LoadDataset& x, const LoadDataset& y, double floor = 1e-3) {
  double worst = 0.0;
  for (std::size_t s = 0; s < x.size(); ++s)
    for (std::size_t i = 0; i < x.samples[s].values.size(); ++i) {
      const double want = x.samples[s].values[i], got = y.samples[s].values[i];
      worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), floor));
    }
  return worst;
}

void criterion_9() {
  auto t0 = std::chrono::steady_clock::now();
  auto raw = small_synthetic(60, 19);
  Rng rng(9);
  for (auto& day : raw.samples)
    for (auto& v : day.values)
      if (rng.uniform() < 0.1) v = std::round(rng.uniform() * 3e8) / 1e5;  // arbitrary 5-decimal values
  for (auto scheme : {NormScheme::six_sigma, NormScheme::minmax_tanh}) {
    const std::string tag = scheme == NormScheme::six_sigma ? "six-sigma" : "min-max";
    const auto stats = compute_stats(raw, scheme);
    const auto norm = normalize(raw, stats);
    const double e1 = round_trip_error(raw, denormalize(norm));
    check(9, tag + ": denormalize(normalize(x)) = x within 1e-5", e1 <= 1e-5, fmt("worst rel %.2e", e1));

    // Normalized values held in 32-bit, as the model stores them.
    auto narrowed = norm;
    for (auto& day : narrowed.samples)
      for (auto& v : day.values) v = static_cast<float>(v);
    // 32-bit spacing near -1 is absolute, so errors are taken relative to
    // the appliance's scale there.
    double scale = 0.0;
    for (std::size_t j = 0; j < stats.sigma.size(); ++j)
      scale = std::max(scale, scheme == NormScheme::six_sigma ? 6.0 * stats.sigma[j] : stats.max[j] - stats.min[j]);
    const double e2 = round_trip_error(raw, denormalize(narrowed), scale);
    check(9, tag + ": round trip through 32-bit storage within 1e-5 of the value scale", e2 <= 1e-5,
          fmt("worst rel %.2e", e2));

    LoadDataset z = norm;
    for (auto& day : z.samples)
      for (auto& v : day.values) v = scheme == NormScheme::six_sigma ? 0.2 * rng.uniform() : 2.0 * rng.uniform() - 1.0;
    const double e3 = round_trip_error(z, normalize(denormalize(z), stats));
    check(9, tag + ": normalize(denormalize(y)) = y within 1e-5", e3 <= 1e-5, fmt("worst rel %.2e", e3));

    const fs::path sp = g_work / ("stats_" + tag + ".txt");
    write_stats(stats, sp);
    const auto back = read_stats(sp);
    check(9, tag + ": stats file round trip is exact",
          back.scheme == stats.scheme && back.sigma == stats.sigma &&
              (scheme == NormScheme::six_sigma || (back.min == stats.min && back.max == stats.max)));
  }
  {
    auto run = small_run();
    const auto raw_small = denormalize(run.normalized);
    Checkpoint ckpt{run.arch, run.cfg, run.normalized.stats, Trainer(run.cfg, run.arch, run.normalized).state()};
    GenerateRequest req;
    req.n_samples = 24;
    req.seed = 4;
    const auto gen = generate_samples(ckpt, req);
    const fs::path p1 = g_work / "generated.csv", p2 = g_work / "generated_again.csv";
    write_csv(gen, p1);
    const auto ingested = ingest_csv(p1);
    bool values = ingested.size() == gen.size();
    for (std::size_t s = 0; values && s < gen.size(); ++s) {
      values = ingested.samples[s].sample_id == gen.samples[s].sample_id;
      for (std::size_t i = 0; values && i < gen.samples[s].values.size(); ++i)
        values = std::abs(ingested.samples[s].values[i] - gen.samples[s].values[i]) <= 5e-7 * (1 + gen.samples[s].values[i]);
    }
    check(9, "generated file ingests with every value within 6-decimal rounding", values);
    write_csv(ingested, p2);
    check(9, "generate -> ingest -> write is byte-identical", slurp(p1) == slurp(p2));
    check(9, "generated shape matches the training data", ingested.n_app() == raw_small.n_app() &&
                                                              ingested.steps() == raw_small.steps());
  }
  const double elapsed = seconds_since(t0);
  check(9, "runtime < 1 min", elapsed < 60.0, fmt("%.1f s", elapsed));
}

// ---------------------------------------------------------------------------
// 7. Desk-scale training run against the untrained generator.
//
// The run lives in <work>/desk and resumes from its newest checkpoint, so an
// interrupted run picks up where it stopped.

LoadDataset desk_dataset() {
  SynthConfig sc;
  sc.n_samples = 512;
  sc.follow_prob = 0.9;
  sc.lag_min = 5;
  sc.lag_max = 15;
  sc.seed = 2024;
  return generate_synthetic(sc);
}

std::optional<fs::path> newest_checkpoint(const fs::path& dir) {
  if (fs::exists(dir / "final" / "manifest.txt")) return dir / "final";
  std::optional<fs::path> best;
  if (!fs::exists(dir)) return best;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.rfind("ckpt_", 0) != 0 || name.find(".tmp") != std::string::npos) continue;
    if (!fs::exists(e.path() / "manifest.txt")) continue;
    if (!best || name > best->filename().string()) best = e.path();
  }
  return best;
}

void criterion_7() {
  auto t0 = std::chrono::steady_clock::now();
  const auto raw = desk_dataset();
  const auto stats = compute_stats(raw);
  const auto normalized = normalize(raw, stats);

  ArchConfig arch;
  arch.channels = 64;
  TrainConfig cfg;
  cfg.minibatch = 16;
  cfg.total_steps = 2000;
  cfg.checkpoint_interval = 100;
  cfg.seed = 7;

  const fs::path dir = g_work / "desk";
  fs::create_directories(dir);
  TrainOptions opts;
  opts.out_dir = dir;
  opts.resume = newest_checkpoint(dir);
  opts.on_step = [](const StepReport& r) {
    if (r.step % 50 == 0)
      spdlog::info("desk step {} w {:.4f} gp {:.4f} gen {:.4f}", r.step, r.w_tilde, r.grad_penalty, r.gen_loss);
  };
  const auto final_dir = train(cfg, arch, normalized, opts);

  Checkpoint trained = load_checkpoint(final_dir);
  Checkpoint untrained{arch, cfg, stats, Trainer(cfg, arch, normalized).state()};

  GenerateRequest req;
  req.n_samples = 512;
  req.seed = 99;
  EvalOptions eo;
  eo.seed = 5;
  const auto before = evaluate(raw, generate_samples(untrained, req), eo);
  const auto after = evaluate(raw, generate_samples(trained, req), eo);

  check(7, "training reached 2000 steps", trained.state.step == 2000, fmt("step %.0f", double(trained.state.step)));
  for (int a = 0; a < 2; ++a) {
    const double b = before.per_appliance[a].load_values_w1, t = after.per_appliance[a].load_values_w1;
    check(7, "appliance " + std::to_string(a) + " load-value W1 reduced by at least half", t <= 0.5 * b,
          fmt("untrained %.4g trained %.4g", b, t));
  }
  check(7, "interdependency distance reduced", *after.interdependency < *before.interdependency,
        fmt("untrained %.4g trained %.4g", *before.interdependency, *after.interdependency));
  for (int a = 0; a < 2; ++a)
    spdlog::info("appliance {}: subsequence swd {:.4g} -> {:.4g}, profile swd {:.4g} -> {:.4g}", a,
                 before.per_appliance[a].subsequences_swd, after.per_appliance[a].subsequences_swd,
                 before.per_appliance[a].profiles_swd, after.per_appliance[a].profiles_swd);
  std::printf("INFO [7] wall time of this invocation %.0f s (resumed: %s)\n", seconds_since(t0),
              opts.resume ? "yes" : "no");
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--only") && i + 1 < argc) only = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--work") && i + 1 < argc) g_work = argv[++i];
  }
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("MREAL_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
  const std::map<int, std::function<void()>> criteria = {
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4}, {5, criterion_5},
      {6, criterion_6}, {7, criterion_7}, {8, criterion_8}, {9, criterion_9},
  };
  for (const auto& [n, run] : criteria) {
    if (only && n != only) continue;
    try {
      run();
    } catch (const std::exception& e) {
      check(n, "criterion raised an exception", false, e.what());
    }
  }
  return g_failures == 0 ? 0 : 1;
}
