#pragma once

// Direct serial loops for the convolution kernels. Kept as the oracle for the
// parallel GEMM-based implementations in kernels.hpp.

namespace mreal::kernels::reference {

template <typename S>
void conv1d_forward(const S* x, int batch, int in_ch, int len, const S* weight, const S* bias,
                    int out_ch, int k, S* y);

template <typename S>
void conv1d_backward_input(const S* dy, int batch, int out_ch, int len, const S* weight, int in_ch,
                           int k, S* dx);

template <typename S>
void conv1d_backward_weight(const S* x, const S* dy, int batch, int in_ch, int len, int out_ch, int k,
                            S* dweight, S* dbias);

}  // namespace mreal::kernels::reference
