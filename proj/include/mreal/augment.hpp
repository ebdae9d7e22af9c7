#pragma once

#include <span>
#include <vector>

#include "mreal/data.hpp"
#include "mreal/rng.hpp"

namespace mreal {

/// Time shift and noise scale for one augmentation. `delta` is taken modulo
/// the day length; the noise scale is in normalized units.
struct AugmentDraw {
  int delta = 0;
  double noise_scale = 0.0;
};

/// How the two augmentation hyperparameters are read. The defaults treat rho
/// as the variance of the Gaussian shift and eta as the rate of the
/// exponential noise-scale distribution.
struct AugmentParams {
  double rho = 1024.0;
  double eta = 200.0;
  bool rho_is_variance = true;
  bool eta_is_rate = true;
};

/// floor(mu).
int shift_from_mu(double mu);
/// Inverse CDF of the exponential distribution for a uniform draw u in [0, 1).
double noise_scale_from_uniform(double u, double eta, bool eta_is_rate = true);

int sample_shift(const AugmentParams& p, Rng& rng);
double sample_noise_scale(const AugmentParams& p, Rng& rng);

/// out[t] = x[(t + delta) mod T]. `out` must not alias `x`.
template <typename S>
void rotate(const S* x, int len, int delta, S* out) {
  int shift = delta % len;
  if (shift < 0) shift += len;
  for (int t = 0; t < len; ++t) {
    int src = t + shift;
    if (src >= len) src -= len;
    out[t] = x[src];
  }
}

/// Inverse of rotate: accumulates gradient dy of the rotated signal back to dx.
template <typename S>
void rotate_backward(const S* dy, int len, int delta, S* dx) {
  rotate(dy, len, -delta, dx);
}

/// Rotates by delta and adds N(0, noise_scale^2) noise, fresh per call.
std::vector<double> augment_channel(std::span<const double> x, int delta, double noise_scale, Rng& rng);

/// Applies one shift and one noise scale to every appliance channel, with
/// independent noise per channel.
LoadDay augment_sample(const LoadDay& x, const AugmentDraw& draw, Rng& rng);

/// Draws the per-channel noise for one sample: n_app * len values, already
/// scaled by noise_scale, in channel order.
std::vector<double> draw_sample_noise(int n_app, int len, double noise_scale, Rng& rng);

}  // namespace mreal
