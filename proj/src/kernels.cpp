#include "mreal/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

namespace mreal::kernels {

namespace {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Samples per GEMM, chosen so the column buffer stays near this many elements.
constexpr std::size_t kColumnBudget = std::size_t(1) << 21;

// GEMMs are split into fixed tiles, one thread each, with Eigen itself kept
// single-threaded (EIGEN_DONT_PARALLELIZE). The tile shapes never depend on
// the thread count, so neither does any summation order.
constexpr Eigen::Index kColumnTile = 1024;
constexpr Eigen::Index kWeightTile = 128;

Eigen::Index tiles(Eigen::Index n, Eigen::Index tile) { return (n + tile - 1) / tile; }

// Reused scratch; grows to the largest request and is never shrunk.
template <typename S>
S* scratch(int slot, std::size_t n) {
  thread_local std::vector<S> buffers[2];
  auto& b = buffers[slot];
  if (b.size() < n) b.resize(n);
  return b.data();
}

int chunk_samples(int rows, int len, int batch) {
  const std::size_t per = static_cast<std::size_t>(rows) * len;
  return static_cast<int>(std::clamp<std::size_t>(kColumnBudget / std::max<std::size_t>(per, 1), 1, batch));
}

// col[(c*k + j)][b*len + t] = x[b][c][t + j - pad], zero outside the signal.
template <typename S>
void im2col(const S* x, int nb, int in_ch, int len, int k, S* col) {
  const int pad = (k - 1) / 2;
  const std::size_t stride = static_cast<std::size_t>(nb) * len;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < nb; ++b) {
    for (int c = 0; c < in_ch; ++c) {
      const S* xc = x + (static_cast<std::size_t>(b) * in_ch + c) * len;
      for (int j = 0; j < k; ++j) {
        S* row = col + (static_cast<std::size_t>(c) * k + j) * stride + static_cast<std::size_t>(b) * len;
        const int shift = j - pad;
        const int lo = std::max(0, -shift);
        const int hi = std::min(len, len - shift);
        for (int t = 0; t < lo; ++t) row[t] = S(0);
        for (int t = lo; t < hi; ++t) row[t] = xc[t + shift];
        for (int t = hi; t < len; ++t) row[t] = S(0);
      }
    }
  }
}

template <typename S>
void col2im(const S* col, int nb, int in_ch, int len, int k, S* x) {
  const int pad = (k - 1) / 2;
  const std::size_t stride = static_cast<std::size_t>(nb) * len;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < nb; ++b) {
    for (int c = 0; c < in_ch; ++c) {
      S* xc = x + (static_cast<std::size_t>(b) * in_ch + c) * len;
      for (int t = 0; t < len; ++t) xc[t] = S(0);
      for (int j = 0; j < k; ++j) {
        const S* row = col + (static_cast<std::size_t>(c) * k + j) * stride + static_cast<std::size_t>(b) * len;
        const int shift = j - pad;
        const int lo = std::max(0, -shift);
        const int hi = std::min(len, len - shift);
        for (int t = lo; t < hi; ++t) xc[t + shift] += row[t];
      }
    }
  }
}

// [b][ch][len] <-> [ch][b*len].
template <typename S>
void to_channel_major(const S* x, int nb, int ch, int len, S* out) {
  im2col(x, nb, ch, len, 1, out);
}

template <typename S>
void from_channel_major(const S* in, int nb, int ch, int len, S* x) {
  const std::size_t stride = static_cast<std::size_t>(nb) * len;
#pragma omp parallel for collapse(2) schedule(static)
  for (int b = 0; b < nb; ++b)
    for (int c = 0; c < ch; ++c)
      std::copy_n(in + c * stride + static_cast<std::size_t>(b) * len, len,
                  x + (static_cast<std::size_t>(b) * ch + c) * len);
}

}  // namespace

template <typename S>
void conv1d_forward(const S* x, int batch, int in_ch, int len, const S* weight, const S* bias,
                    int out_ch, int k, S* y) {
  const int ck = in_ch * k;
  const Eigen::Map<const RowMat<S>> w(weight, out_ch, ck);
  const int chunk = chunk_samples(std::max(ck, out_ch), len, batch);
  S* col = scratch<S>(0, static_cast<std::size_t>(ck) * chunk * len);
  S* out = scratch<S>(1, static_cast<std::size_t>(out_ch) * chunk * len);
  for (int b0 = 0; b0 < batch; b0 += chunk) {
    const int nb = std::min(chunk, batch - b0);
    const Eigen::Index cols = static_cast<Eigen::Index>(nb) * len;
    im2col(x + static_cast<std::size_t>(b0) * in_ch * len, nb, in_ch, len, k, col);
    Eigen::Map<RowMat<S>> o(out, out_ch, cols);
    const Eigen::Map<const RowMat<S>> cm(col, ck, cols);
    const Eigen::Index nt = tiles(cols, kColumnTile);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < nt; ++i) {
      const Eigen::Index c0 = i * kColumnTile, w0 = std::min(kColumnTile, cols - c0);
      o.middleCols(c0, w0).noalias() = w * cm.middleCols(c0, w0);
      if (bias) o.middleCols(c0, w0).colwise() += Eigen::Map<const Vec<S>>(bias, out_ch);
    }
    from_channel_major(out, nb, out_ch, len, y + static_cast<std::size_t>(b0) * out_ch * len);
  }
}

template <typename S>
void conv1d_backward_input(const S* dy, int batch, int out_ch, int len, const S* weight, int in_ch,
                           int k, S* dx) {
  const int ck = in_ch * k;
  const Eigen::Map<const RowMat<S>> w(weight, out_ch, ck);
  const int chunk = chunk_samples(std::max(ck, out_ch), len, batch);
  S* col = scratch<S>(0, static_cast<std::size_t>(ck) * chunk * len);
  S* g = scratch<S>(1, static_cast<std::size_t>(out_ch) * chunk * len);
  for (int b0 = 0; b0 < batch; b0 += chunk) {
    const int nb = std::min(chunk, batch - b0);
    const Eigen::Index cols = static_cast<Eigen::Index>(nb) * len;
    to_channel_major(dy + static_cast<std::size_t>(b0) * out_ch * len, nb, out_ch, len, g);
    Eigen::Map<RowMat<S>> cm(col, ck, cols);
    const Eigen::Map<const RowMat<S>> gm(g, out_ch, cols);
    const Eigen::Index nt = tiles(cols, kColumnTile);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < nt; ++i) {
      const Eigen::Index c0 = i * kColumnTile, w0 = std::min(kColumnTile, cols - c0);
      cm.middleCols(c0, w0).noalias() = w.transpose() * gm.middleCols(c0, w0);
    }
    col2im(col, nb, in_ch, len, k, dx + static_cast<std::size_t>(b0) * in_ch * len);
  }
}

template <typename S>
void conv1d_backward_weight(const S* x, const S* dy, int batch, int in_ch, int len, int out_ch, int k,
                            S* dweight, S* dbias) {
  const int ck = in_ch * k;
  Eigen::Map<RowMat<S>> dw(dweight, out_ch, ck);
  const int chunk = chunk_samples(std::max(ck, out_ch), len, batch);
  S* col = scratch<S>(0, static_cast<std::size_t>(ck) * chunk * len);
  S* g = scratch<S>(1, static_cast<std::size_t>(out_ch) * chunk * len);
  for (int b0 = 0; b0 < batch; b0 += chunk) {
    const int nb = std::min(chunk, batch - b0);
    const Eigen::Index cols = static_cast<Eigen::Index>(nb) * len;
    im2col(x + static_cast<std::size_t>(b0) * in_ch * len, nb, in_ch, len, k, col);
    to_channel_major(dy + static_cast<std::size_t>(b0) * out_ch * len, nb, out_ch, len, g);
    const Eigen::Map<const RowMat<S>> gm(g, out_ch, cols);
    const Eigen::Map<const RowMat<S>> cm(col, ck, cols);
    const Eigen::Index nt = tiles(ck, kWeightTile);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < nt; ++i) {
      const Eigen::Index c0 = i * kWeightTile, w0 = std::min<Eigen::Index>(kWeightTile, ck - c0);
      dw.middleCols(c0, w0).noalias() += gm * cm.middleRows(c0, w0).transpose();
    }
    if (dbias) Eigen::Map<Vec<S>>(dbias, out_ch) += gm.rowwise().sum();
  }
}

template <typename S>
void leaky_relu(const S* a, std::size_t n, S slope, S* h) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) h[i] = a[i] > S(0) ? a[i] : slope * a[i];
}

template <typename S>
void leaky_relu_mask(const S* a, const S* g, std::size_t n, S slope, S* out) {
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > S(0) ? g[i] : slope * g[i];
}

template <typename S>
void upsample2(const S* x, int rows, int len, S* y) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const S* xr = x + static_cast<std::size_t>(r) * len;
    S* yr = y + static_cast<std::size_t>(r) * 2 * len;
    for (int t = 0; t < len; ++t) yr[2 * t] = yr[2 * t + 1] = xr[t];
  }
}

template <typename S>
void upsample2_backward(const S* dy, int rows, int len, S* dx) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const S* gr = dy + static_cast<std::size_t>(r) * 2 * len;
    S* dr = dx + static_cast<std::size_t>(r) * len;
    for (int t = 0; t < len; ++t) dr[t] = gr[2 * t] + gr[2 * t + 1];
  }
}

template <typename S>
void avgpool2(const S* x, int rows, int len, S* y) {
  const int half = len / 2;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const S* xr = x + static_cast<std::size_t>(r) * len;
    S* yr = y + static_cast<std::size_t>(r) * half;
    for (int t = 0; t < half; ++t) yr[t] = (xr[2 * t] + xr[2 * t + 1]) * S(0.5);
  }
}

template <typename S>
void avgpool2_backward(const S* dy, int rows, int len, S* dx) {
  const int half = len / 2;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const S* gr = dy + static_cast<std::size_t>(r) * half;
    S* dr = dx + static_cast<std::size_t>(r) * len;
    for (int t = 0; t < half; ++t) dr[2 * t] = dr[2 * t + 1] = gr[t] * S(0.5);
  }
}

template <typename S>
void dense_forward(const S* x, int batch, int in, const S* weight, const S* bias, int out, S* y) {
  const Eigen::Map<const RowMat<S>> xm(x, batch, in);
  const Eigen::Map<const RowMat<S>> w(weight, in, out);
  Eigen::Map<RowMat<S>> ym(y, batch, out);
  ym.noalias() = xm * w;
  if (bias) ym.rowwise() += Eigen::Map<const Vec<S>>(bias, out).transpose();
}

template <typename S>
void dense_backward(const S* x, const S* dy, int batch, int in, const S* weight, int out, S* dx,
                    S* dweight, S* dbias) {
  const Eigen::Map<const RowMat<S>> xm(x, batch, in);
  const Eigen::Map<const RowMat<S>> g(dy, batch, out);
  const Eigen::Map<const RowMat<S>> w(weight, in, out);
  if (dx) Eigen::Map<RowMat<S>>(dx, batch, in).noalias() = g * w.transpose();
  if (dweight) Eigen::Map<RowMat<S>>(dweight, in, out).noalias() += xm.transpose() * g;
  if (dbias) Eigen::Map<Vec<S>>(dbias, out) += g.colwise().sum().transpose();
}

template <typename S>
void batchnorm_train(const S* x, int batch, int ch, int len, const S* gamma, const S* beta, S eps,
                     S* y, S* xhat, S* mean, S* var, S* inv_std) {
  const double count = static_cast<double>(batch) * len;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < ch; ++c) {
    double sum = 0.0;
    for (int b = 0; b < batch; ++b) {
      const S* row = x + (static_cast<std::size_t>(b) * ch + c) * len;
      for (int t = 0; t < len; ++t) sum += row[t];
    }
    const double mu = sum / count;
    double sq = 0.0;
    for (int b = 0; b < batch; ++b) {
      const S* row = x + (static_cast<std::size_t>(b) * ch + c) * len;
      for (int t = 0; t < len; ++t) {
        const double d = row[t] - mu;
        sq += d * d;
      }
    }
    const double v = sq / count;
    const S is = static_cast<S>(1.0 / std::sqrt(v + static_cast<double>(eps)));
    mean[c] = static_cast<S>(mu);
    var[c] = static_cast<S>(v);
    inv_std[c] = is;
    const S m = static_cast<S>(mu);
    for (int b = 0; b < batch; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * ch + c) * len;
      for (int t = 0; t < len; ++t) {
        const S n = (x[off + t] - m) * is;
        xhat[off + t] = n;
        y[off + t] = gamma[c] * n + beta[c];
      }
    }
  }
}

template <typename S>
void batchnorm_eval(const S* x, int batch, int ch, int len, const S* gamma, const S* beta,
                    const S* running_mean, const S* running_var, S eps, S* y) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < ch; ++c) {
    const S scale = gamma[c] / std::sqrt(running_var[c] + eps);
    const S shift = beta[c] - running_mean[c] * scale;
    for (int b = 0; b < batch; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * ch + c) * len;
      for (int t = 0; t < len; ++t) y[off + t] = x[off + t] * scale + shift;
    }
  }
}

template <typename S>
void batchnorm_train_backward(const S* dy, const S* xhat, const S* inv_std, const S* gamma, int batch,
                              int ch, int len, S* dx, S* dgamma, S* dbeta) {
  const double count = static_cast<double>(batch) * len;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < ch; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int b = 0; b < batch; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * ch + c) * len;
      for (int t = 0; t < len; ++t) {
        sum_dy += dy[off + t];
        sum_dy_xhat += static_cast<double>(dy[off + t]) * xhat[off + t];
      }
    }
    if (dgamma) dgamma[c] += static_cast<S>(sum_dy_xhat);
    if (dbeta) dbeta[c] += static_cast<S>(sum_dy);
    const S scale = gamma[c] * inv_std[c];
    const S mean_dy = static_cast<S>(sum_dy / count);
    const S mean_dy_xhat = static_cast<S>(sum_dy_xhat / count);
    for (int b = 0; b < batch; ++b) {
      const std::size_t off = (static_cast<std::size_t>(b) * ch + c) * len;
      for (int t = 0; t < len; ++t) dx[off + t] = scale * (dy[off + t] - mean_dy - xhat[off + t] * mean_dy_xhat);
    }
  }
}

#define MREAL_INSTANTIATE(S)                                                                        \
  template void conv1d_forward<S>(const S*, int, int, int, const S*, const S*, int, int, S*);       \
  template void conv1d_backward_input<S>(const S*, int, int, int, const S*, int, int, S*);          \
  template void conv1d_backward_weight<S>(const S*, const S*, int, int, int, int, int, S*, S*);     \
  template void leaky_relu<S>(const S*, std::size_t, S, S*);                                        \
  template void leaky_relu_mask<S>(const S*, const S*, std::size_t, S, S*);                         \
  template void upsample2<S>(const S*, int, int, S*);                                               \
  template void upsample2_backward<S>(const S*, int, int, S*);                                      \
  template void avgpool2<S>(const S*, int, int, S*);                                                \
  template void avgpool2_backward<S>(const S*, int, int, S*);                                       \
  template void dense_forward<S>(const S*, int, int, const S*, const S*, int, S*);                  \
  template void dense_backward<S>(const S*, const S*, int, int, const S*, int, S*, S*, S*);         \
  template void batchnorm_train<S>(const S*, int, int, int, const S*, const S*, S, S*, S*, S*, S*,  \
                                   S*);                                                             \
  template void batchnorm_eval<S>(const S*, int, int, int, const S*, const S*, const S*, const S*,  \
                                  S, S*);                                                           \
  template void batchnorm_train_backward<S>(const S*, const S*, const S*, const S*, int, int, int,  \
                                            S*, S*, S*);

MREAL_INSTANTIATE(float)
MREAL_INSTANTIATE(double)
#undef MREAL_INSTANTIATE

}  // namespace mreal::kernels
