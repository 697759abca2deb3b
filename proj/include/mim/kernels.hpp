#pragma once

#include <cstddef>

namespace mim::kernels {

// Dense compute kernels behind the differentiable ops. Every kernel exists
// twice: a plain serial version (the reference) and an OpenMP version.
// The OpenMP versions parallelize over output elements only, and each output
// element accumulates its sum in exactly the serial order, so the two paths
// produce bit-identical results for any thread count. The dispatch functions
// pick the OpenMP path when it is enabled and the problem is large enough to
// pay for the fork/join.

// Runtime switch, defaults to on when compiled with OpenMP.
bool parallel_enabled();
void set_parallel_enabled(bool on);
int max_threads();

// C[m x n] = op(A) * op(B), op controlled by the trans flags.
// A is m x k when !trans_a, k x m when trans_a (same for B with k x n / n x k).
// C is overwritten unless accumulate is set, in which case the product is
// added onto it (used for gradient accumulation).
void gemm(bool trans_a, bool trans_b,
          std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate = false);

// out[c_out x l_out] = cross-correlation of input[c_in x l] with
// kernel[c_out x c_in x ksize] at the given stride, plus bias[c_out].
// l_out = (l - ksize) / stride + 1 (caller guarantees l >= ksize).
void conv1d_forward(std::size_t c_in, std::size_t l,
                    std::size_t c_out, std::size_t ksize, std::size_t stride,
                    const double* input, const double* kernel, const double* bias,
                    double* out);

// d_input[c_in x l] += contribution from d_out[c_out x l_out].
void conv1d_backward_input(std::size_t c_in, std::size_t l,
                           std::size_t c_out, std::size_t ksize, std::size_t stride,
                           const double* d_out, const double* kernel,
                           double* d_input);

// d_kernel[c_out x c_in x ksize] += ..., d_bias[c_out] += ...
void conv1d_backward_kernel(std::size_t c_in, std::size_t l,
                            std::size_t c_out, std::size_t ksize, std::size_t stride,
                            const double* d_out, const double* input,
                            double* d_kernel, double* d_bias);

namespace serial {
void gemm(bool trans_a, bool trans_b,
          std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate = false);
void conv1d_forward(std::size_t c_in, std::size_t l,
                    std::size_t c_out, std::size_t ksize, std::size_t stride,
                    const double* input, const double* kernel, const double* bias,
                    double* out);
void conv1d_backward_input(std::size_t c_in, std::size_t l,
                           std::size_t c_out, std::size_t ksize, std::size_t stride,
                           const double* d_out, const double* kernel,
                           double* d_input);
void conv1d_backward_kernel(std::size_t c_in, std::size_t l,
                            std::size_t c_out, std::size_t ksize, std::size_t stride,
                            const double* d_out, const double* input,
                            double* d_kernel, double* d_bias);
} // namespace serial

namespace openmp {
void gemm(bool trans_a, bool trans_b,
          std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate = false);
void conv1d_forward(std::size_t c_in, std::size_t l,
                    std::size_t c_out, std::size_t ksize, std::size_t stride,
                    const double* input, const double* kernel, const double* bias,
                    double* out);
void conv1d_backward_input(std::size_t c_in, std::size_t l,
                           std::size_t c_out, std::size_t ksize, std::size_t stride,
                           const double* d_out, const double* kernel,
                           double* d_input);
void conv1d_backward_kernel(std::size_t c_in, std::size_t l,
                            std::size_t c_out, std::size_t ksize, std::size_t stride,
                            const double* d_out, const double* input,
                            double* d_kernel, double* d_bias);
} // namespace openmp

} // namespace mim::kernels
