#pragma once

#include <cstddef>

// Batched 1-D signal kernels. All activations are [batch][channels][length]
// row-major. Convolutions are length-preserving with zero padding
// (k - 1) / 2 on both sides; weights are [out][in][k].
//
// The parallel versions split work into fixed tiles (GEMM columns for the
// convolutions, channels for the batch-norm reductions) and never share an
// accumulator between threads, so results do not depend on the thread count. Serial loop implementations
// of the convolutions live in kernels_reference.hpp and are used by the tests
// and the benchmark.

namespace mreal::kernels {

template <typename S>
void conv1d_forward(const S* x, int batch, int in_ch, int len, const S* weight, const S* bias,
                    int out_ch, int k, S* y);

/// dx = conv^T(dy); overwrites dx.
template <typename S>
void conv1d_backward_input(const S* dy, int batch, int out_ch, int len, const S* weight, int in_ch,
                           int k, S* dx);

/// Accumulates dW += dy (x) im2col(x) and db += sum(dy). `db` may be null.
template <typename S>
void conv1d_backward_weight(const S* x, const S* dy, int batch, int in_ch, int len, int out_ch, int k,
                            S* dweight, S* dbias);

template <typename S>
void leaky_relu(const S* a, std::size_t n, S slope, S* h);

/// out = slope-mask(a) * g, elementwise. Serves both the backward pass and
/// the forward-mode tangent pass (the mask is its own transpose).
template <typename S>
void leaky_relu_mask(const S* a, const S* g, std::size_t n, S slope, S* out);

template <typename S>
void upsample2(const S* x, int rows, int len, S* y);
template <typename S>
void upsample2_backward(const S* dy, int rows, int len, S* dx);

template <typename S>
void avgpool2(const S* x, int rows, int len, S* y);
template <typename S>
void avgpool2_backward(const S* dy, int rows, int len, S* dx);

/// Dense layer y[b] = x[b] W + bias with W stored [in][out].
template <typename S>
void dense_forward(const S* x, int batch, int in, const S* weight, const S* bias, int out, S* y);
/// dx = dy W^T (overwrites, skipped when dx is null); dW += x^T dy; db += sum dy.
template <typename S>
void dense_backward(const S* x, const S* dy, int batch, int in, const S* weight, int out, S* dx,
                    S* dweight, S* dbias);

/// Train-mode batch norm: per-channel statistics over (batch, length).
/// Writes normalized values to xhat, batch mean/variance (biased) and 1/sqrt(var+eps).
template <typename S>
void batchnorm_train(const S* x, int batch, int ch, int len, const S* gamma, const S* beta, S eps,
                     S* y, S* xhat, S* mean, S* var, S* inv_std);

template <typename S>
void batchnorm_eval(const S* x, int batch, int ch, int len, const S* gamma, const S* beta,
                    const S* running_mean, const S* running_var, S eps, S* y);

/// Backward of batchnorm_train; accumulates dgamma/dbeta, overwrites dx.
template <typename S>
void batchnorm_train_backward(const S* dy, const S* xhat, const S* inv_std, const S* gamma, int batch,
                              int ch, int len, S* dx, S* dgamma, S* dbeta);

}  // namespace mreal::kernels
