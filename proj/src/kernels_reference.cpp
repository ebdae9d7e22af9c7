#include "mreal/kernels_reference.hpp"

#include <cstddef>

namespace mreal::kernels::reference {

template <typename S>
void conv1d_forward(const S* x, int batch, int in_ch, int len, const S* weight, const S* bias,
                    int out_ch, int k, S* y) {
  const int pad = (k - 1) / 2;
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_ch; ++o) {
      for (int t = 0; t < len; ++t) {
        S acc = bias ? bias[o] : S(0);
        for (int c = 0; c < in_ch; ++c) {
          for (int j = 0; j < k; ++j) {
            const int src = t + j - pad;
            if (src < 0 || src >= len) continue;
            acc += weight[(static_cast<std::size_t>(o) * in_ch + c) * k + j] *
                   x[(static_cast<std::size_t>(b) * in_ch + c) * len + src];
          }
        }
        y[(static_cast<std::size_t>(b) * out_ch + o) * len + t] = acc;
      }
    }
  }
}

template <typename S>
void conv1d_backward_input(const S* dy, int batch, int out_ch, int len, const S* weight, int in_ch,
                           int k, S* dx) {
  const int pad = (k - 1) / 2;
  for (std::size_t i = 0; i < static_cast<std::size_t>(batch) * in_ch * len; ++i) dx[i] = S(0);
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_ch; ++o) {
      for (int t = 0; t < len; ++t) {
        const S g = dy[(static_cast<std::size_t>(b) * out_ch + o) * len + t];
        for (int c = 0; c < in_ch; ++c) {
          for (int j = 0; j < k; ++j) {
            const int src = t + j - pad;
            if (src < 0 || src >= len) continue;
            dx[(static_cast<std::size_t>(b) * in_ch + c) * len + src] +=
                weight[(static_cast<std::size_t>(o) * in_ch + c) * k + j] * g;
          }
        }
      }
    }
  }
}

template <typename S>
void conv1d_backward_weight(const S* x, const S* dy, int batch, int in_ch, int len, int out_ch, int k,
                            S* dweight, S* dbias) {
  const int pad = (k - 1) / 2;
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_ch; ++o) {
      for (int t = 0; t < len; ++t) {
        const S g = dy[(static_cast<std::size_t>(b) * out_ch + o) * len + t];
        if (dbias) dbias[o] += g;
        for (int c = 0; c < in_ch; ++c) {
          for (int j = 0; j < k; ++j) {
            const int src = t + j - pad;
            if (src < 0 || src >= len) continue;
            dweight[(static_cast<std::size_t>(o) * in_ch + c) * k + j] +=
                g * x[(static_cast<std::size_t>(b) * in_ch + c) * len + src];
          }
        }
      }
    }
  }
}

#define MREAL_INSTANTIATE(S)                                                                       \
  template void conv1d_forward<S>(const S*, int, int, int, const S*, const S*, int, int, S*);      \
  template void conv1d_backward_input<S>(const S*, int, int, int, const S*, int, int, S*);         \
  template void conv1d_backward_weight<S>(const S*, const S*, int, int, int, int, int, S*, S*);

MREAL_INSTANTIATE(float)
MREAL_INSTANTIATE(double)
#undef MREAL_INSTANTIATE

}  // namespace mreal::kernels::reference
