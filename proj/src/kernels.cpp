#include "mim/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mim::kernels {

namespace {

std::atomic<bool> g_parallel{
#ifdef _OPENMP
    true
#else
    false
#endif
};

// Below this many multiply-adds the fork/join overhead wins.
constexpr std::size_t kParallelCutoff = 32768;

inline std::size_t a_index(bool trans_a, std::size_t m, std::size_t k,
                           std::size_t i, std::size_t kk) {
    return trans_a ? kk * m + i : i * k + kk;
}

inline std::size_t b_index(bool trans_b, std::size_t n, std::size_t k,
                           std::size_t kk, std::size_t j) {
    return trans_b ? j * k + kk : kk * n + j;
}

// One output row of C. Shared by the serial and OpenMP gemm so both paths
// run the identical accumulation order per element.
inline void gemm_row(bool trans_a, bool trans_b,
                     std::size_t m, std::size_t n, std::size_t k,
                     const double* a, const double* b, double* c,
                     bool accumulate, std::size_t i) {
    double* crow = c + i * n;
    if (!trans_a && !trans_b) {
        if (!accumulate) {
            for (std::size_t j = 0; j < n; ++j) crow[j] = 0.0;
        }
        const double* arow = a + i * k;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            const double* brow = b + kk * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    } else if (!trans_a && trans_b) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double s = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            crow[j] = accumulate ? crow[j] + s : s;
        }
    } else {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) {
                s += a[a_index(true, m, k, i, kk)] * b[b_index(trans_b, n, k, kk, j)];
            }
            crow[j] = accumulate ? crow[j] + s : s;
        }
    }
}

inline std::size_t conv_out_len(std::size_t l, std::size_t ksize, std::size_t stride) {
    return (l - ksize) / stride + 1;
}

inline void conv1d_forward_channel(std::size_t c_in, std::size_t l,
                                   std::size_t ksize, std::size_t stride,
                                   std::size_t l_out,
                                   const double* input, const double* kernel,
                                   double bias_oc, double* out_row,
                                   std::size_t oc) {
    const double* kbase = kernel + oc * c_in * ksize;
    for (std::size_t t = 0; t < l_out; ++t) {
        double s = bias_oc;
        const std::size_t start = t * stride;
        for (std::size_t ic = 0; ic < c_in; ++ic) {
            const double* in_row = input + ic * l + start;
            const double* krow = kbase + ic * ksize;
            for (std::size_t j = 0; j < ksize; ++j) s += in_row[j] * krow[j];
        }
        out_row[t] = s;
    }
}

// Gather form: each input position sums the output gradients that read it.
// Race-free and order-deterministic.
inline void conv1d_backward_input_pos(std::size_t c_in, std::size_t l,
                                      std::size_t c_out, std::size_t ksize,
                                      std::size_t stride, std::size_t l_out,
                                      const double* d_out, const double* kernel,
                                      double* d_input,
                                      std::size_t ic, std::size_t p) {
    double s = 0.0;
    for (std::size_t oc = 0; oc < c_out; ++oc) {
        const double* grow = d_out + oc * l_out;
        const double* krow = kernel + (oc * c_in + ic) * ksize;
        for (std::size_t j = 0; j < ksize; ++j) {
            if (p < j) break;
            const std::size_t off = p - j;
            if (off % stride != 0) continue;
            const std::size_t t = off / stride;
            if (t < l_out) s += grow[t] * krow[j];
        }
    }
    d_input[ic * l + p] += s;
}

inline void conv1d_backward_kernel_entry(std::size_t c_in, std::size_t ksize,
                                         std::size_t stride, std::size_t l,
                                         std::size_t l_out,
                                         const double* d_out, const double* input,
                                         double* d_kernel,
                                         std::size_t oc, std::size_t ic, std::size_t j) {
    const double* grow = d_out + oc * l_out;
    const double* in_row = input + ic * l;
    double s = 0.0;
    for (std::size_t t = 0; t < l_out; ++t) s += grow[t] * in_row[t * stride + j];
    d_kernel[(oc * c_in + ic) * ksize + j] += s;
}

} // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

void set_parallel_enabled(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// ---------------------------------------------------------------- serial --

void serial::gemm(bool trans_a, bool trans_b,
                  std::size_t m, std::size_t n, std::size_t k,
                  const double* a, const double* b, double* c, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        gemm_row(trans_a, trans_b, m, n, k, a, b, c, accumulate, i);
    }
}

void serial::conv1d_forward(std::size_t c_in, std::size_t l,
                            std::size_t c_out, std::size_t ksize, std::size_t stride,
                            const double* input, const double* kernel, const double* bias,
                            double* out) {
    const std::size_t l_out = conv_out_len(l, ksize, stride);
    for (std::size_t oc = 0; oc < c_out; ++oc) {
        conv1d_forward_channel(c_in, l, ksize, stride, l_out, input, kernel,
                               bias ? bias[oc] : 0.0, out + oc * l_out, oc);
    }
}

void serial::conv1d_backward_input(std::size_t c_in, std::size_t l,
                                   std::size_t c_out, std::size_t ksize, std::size_t stride,
                                   const double* d_out, const double* kernel,
                                   double* d_input) {
    const std::size_t l_out = conv_out_len(l, ksize, stride);
    for (std::size_t ic = 0; ic < c_in; ++ic) {
        for (std::size_t p = 0; p < l; ++p) {
            conv1d_backward_input_pos(c_in, l, c_out, ksize, stride, l_out,
                                      d_out, kernel, d_input, ic, p);
        }
    }
}

void serial::conv1d_backward_kernel(std::size_t c_in, std::size_t l,
                                    std::size_t c_out, std::size_t ksize, std::size_t stride,
                                    const double* d_out, const double* input,
                                    double* d_kernel, double* d_bias) {
    const std::size_t l_out = conv_out_len(l, ksize, stride);
    for (std::size_t oc = 0; oc < c_out; ++oc) {
        for (std::size_t ic = 0; ic < c_in; ++ic) {
            for (std::size_t j = 0; j < ksize; ++j) {
                conv1d_backward_kernel_entry(c_in, ksize, stride, l, l_out,
                                             d_out, input, d_kernel, oc, ic, j);
            }
        }
    }
    if (d_bias) {
        for (std::size_t oc = 0; oc < c_out; ++oc) {
            const double* grow = d_out + oc * l_out;
            double s = 0.0;
            for (std::size_t t = 0; t < l_out; ++t) s += grow[t];
            d_bias[oc] += s;
        }
    }
}

// ---------------------------------------------------------------- openmp --

void openmp::gemm(bool trans_a, bool trans_b,
                  std::size_t m, std::size_t n, std::size_t k,
                  const double* a, const double* b, double* c, bool accumulate) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
        gemm_row(trans_a, trans_b, m, n, k, a, b, c, accumulate, static_cast<std::size_t>(i));
    }
}

void openmp::conv1d_forward(std::size_t c_in, std::size_t l,
                            std::size_t c_out, std::size_t ksize, std::size_t stride,
                            const double* input, const double* kernel, const double* bias,
                            double* out) {
    const std::size_t l_out = conv_out_len(l, ksize, stride);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t oc = 0; oc < static_cast<std::ptrdiff_t>(c_out); ++oc) {
        conv1d_forward_channel(c_in, l, ksize, stride, l_out, input, kernel,
                               bias ? bias[oc] : 0.0, out + oc * l_out,
                               static_cast<std::size_t>(oc));
    }
}

void openmp::conv1d_backward_input(std::size_t c_in, std::size_t l,
                                   std::size_t c_out, std::size_t ksize, std::size_t stride,
                                   const double* d_out, const double* kernel,
                                   double* d_input) {
    const std::size_t l_out = conv_out_len(l, ksize, stride);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::ptrdiff_t ic = 0; ic < static_cast<std::ptrdiff_t>(c_in); ++ic) {
        for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(l); ++p) {
            conv1d_backward_input_pos(c_in, l, c_out, ksize, stride, l_out,
                                      d_out, kernel, d_input,
                                      static_cast<std::size_t>(ic),
                                      static_cast<std::size_t>(p));
        }
    }
}

void openmp::conv1d_backward_kernel(std::size_t c_in, std::size_t l,
                                    std::size_t c_out, std::size_t ksize, std::size_t stride,
                                    const double* d_out, const double* input,
                                    double* d_kernel, double* d_bias) {
    const std::size_t l_out = conv_out_len(l, ksize, stride);
#pragma omp parallel for collapse(2) schedule(static)
    for (std::ptrdiff_t oc = 0; oc < static_cast<std::ptrdiff_t>(c_out); ++oc) {
        for (std::ptrdiff_t ic = 0; ic < static_cast<std::ptrdiff_t>(c_in); ++ic) {
            for (std::size_t j = 0; j < ksize; ++j) {
                conv1d_backward_kernel_entry(c_in, ksize, stride, l, l_out,
                                             d_out, input, d_kernel,
                                             static_cast<std::size_t>(oc),
                                             static_cast<std::size_t>(ic), j);
            }
        }
    }
    if (d_bias) {
        for (std::size_t oc = 0; oc < c_out; ++oc) {
            const double* grow = d_out + oc * l_out;
            double s = 0.0;
            for (std::size_t t = 0; t < l_out; ++t) s += grow[t];
            d_bias[oc] += s;
        }
    }
}

// -------------------------------------------------------------- dispatch --

void gemm(bool trans_a, bool trans_b,
          std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
    if (parallel_enabled() && m > 1 && m * n * k >= kParallelCutoff) {
        openmp::gemm(trans_a, trans_b, m, n, k, a, b, c, accumulate);
    } else {
        serial::gemm(trans_a, trans_b, m, n, k, a, b, c, accumulate);
    }
}

void conv1d_forward(std::size_t c_in, std::size_t l,
                    std::size_t c_out, std::size_t ksize, std::size_t stride,
                    const double* input, const double* kernel, const double* bias,
                    double* out) {
    const std::size_t work = c_out * conv_out_len(l, ksize, stride) * c_in * ksize;
    if (parallel_enabled() && c_out > 1 && work >= kParallelCutoff) {
        openmp::conv1d_forward(c_in, l, c_out, ksize, stride, input, kernel, bias, out);
    } else {
        serial::conv1d_forward(c_in, l, c_out, ksize, stride, input, kernel, bias, out);
    }
}

void conv1d_backward_input(std::size_t c_in, std::size_t l,
                           std::size_t c_out, std::size_t ksize, std::size_t stride,
                           const double* d_out, const double* kernel,
                           double* d_input) {
    const std::size_t work = c_in * l * c_out * ksize;
    if (parallel_enabled() && c_in * l > 1 && work >= kParallelCutoff) {
        openmp::conv1d_backward_input(c_in, l, c_out, ksize, stride, d_out, kernel, d_input);
    } else {
        serial::conv1d_backward_input(c_in, l, c_out, ksize, stride, d_out, kernel, d_input);
    }
}

void conv1d_backward_kernel(std::size_t c_in, std::size_t l,
                            std::size_t c_out, std::size_t ksize, std::size_t stride,
                            const double* d_out, const double* input,
                            double* d_kernel, double* d_bias) {
    const std::size_t work = c_out * c_in * ksize * conv_out_len(l, ksize, stride);
    if (parallel_enabled() && c_out * c_in > 1 && work >= kParallelCutoff) {
        openmp::conv1d_backward_kernel(c_in, l, c_out, ksize, stride, d_out, input,
                                       d_kernel, d_bias);
    } else {
        serial::conv1d_backward_kernel(c_in, l, c_out, ksize, stride, d_out, input,
                                       d_kernel, d_bias);
    }
}

} // namespace mim::kernels
