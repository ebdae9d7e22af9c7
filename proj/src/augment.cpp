#include "mreal/augment.hpp"

#include <cmath>

#include "mreal/error.hpp"

namespace mreal {

int shift_from_mu(double mu) { return static_cast<int>(std::floor(mu)); }

double noise_scale_from_uniform(double u, double eta, bool eta_is_rate) {
  const double mean = eta_is_rate ? 1.0 / eta : eta;
  return -std::log1p(-u) * mean;
}

int sample_shift(const AugmentParams& p, Rng& rng) {
  if (!(p.rho > 0.0)) throw Error("aug_rho must be positive");
  rng.note(DrawKind::shift);
  const double stddev = p.rho_is_variance ? std::sqrt(p.rho) : p.rho;
  return shift_from_mu(stddev * rng.normal());
}

double sample_noise_scale(const AugmentParams& p, Rng& rng) {
  if (!(p.eta > 0.0)) throw Error("aug_eta must be positive");
  rng.note(DrawKind::noise_scale);
  return noise_scale_from_uniform(rng.uniform(), p.eta, p.eta_is_rate);
}

std::vector<double> draw_sample_noise(int n_app, int len, double noise_scale, Rng& rng) {
  std::vector<double> q(static_cast<std::size_t>(n_app) * len);
  for (int j = 0; j < n_app; ++j) {
    rng.note(DrawKind::noise_vector);
    for (int t = 0; t < len; ++t) q[static_cast<std::size_t>(j) * len + t] = noise_scale * rng.normal();
  }
  return q;
}

std::vector<double> augment_channel(std::span<const double> x, int delta, double noise_scale, Rng& rng) {
  const int len = static_cast<int>(x.size());
  std::vector<double> out(len);
  rotate(x.data(), len, delta, out.data());
  const auto q = draw_sample_noise(1, len, noise_scale, rng);
  for (int t = 0; t < len; ++t) out[t] += q[t];
  return out;
}

LoadDay augment_sample(const LoadDay& x, const AugmentDraw& draw, Rng& rng) {
  LoadDay out = x;
  for (int j = 0; j < x.n_app; ++j) {
    const auto ch = augment_channel(std::span<const double>(x.channel(j), x.steps), draw.delta, draw.noise_scale, rng);
    std::copy(ch.begin(), ch.end(), out.channel(j));
  }
  return out;
}

}  // namespace mreal
