#include <doctest.h>

#include <vector>

#include "mim/kernels.hpp"
#include "mim/rng.hpp"

using namespace mim;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

// Plain triple loop, used as the reference for both kernel paths.
std::vector<double> gemm_naive(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                               const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> c(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) {
                const double av = ta ? a[kk * m + i] : a[i * k + kk];
                const double bv = tb ? b[j * k + kk] : b[kk * n + j];
                s += av * bv;
            }
            c[i * n + j] = s;
        }
    }
    return c;
}

} // namespace

TEST_CASE("gemm matches the naive reference for all transpose modes") {
    Rng rng(101);
    for (int mode = 0; mode < 4; ++mode) {
        const bool ta = mode & 1, tb = mode & 2;
        const std::size_t m = 7, n = 5, k = 9;
        const auto a = random_vec(m * k, rng);
        const auto b = random_vec(k * n, rng);
        const auto expect = gemm_naive(ta, tb, m, n, k, a, b);
        std::vector<double> serial(m * n), parallel(m * n);
        kernels::serial::gemm(ta, tb, m, n, k, a.data(), b.data(), serial.data());
        kernels::openmp::gemm(ta, tb, m, n, k, a.data(), b.data(), parallel.data());
        for (std::size_t i = 0; i < m * n; ++i) {
            CHECK(serial[i] == doctest::Approx(expect[i]).epsilon(1e-12));
        }
        // the OpenMP path accumulates per element in the serial order, so the
        // two results are bit-identical
        CHECK(serial == parallel);
    }
}

TEST_CASE("gemm accumulate flag adds onto the destination") {
    Rng rng(102);
    const std::size_t m = 4, n = 3, k = 6;
    const auto a = random_vec(m * k, rng);
    const auto b = random_vec(k * n, rng);
    std::vector<double> once(m * n), twice(m * n);
    kernels::gemm(false, false, m, n, k, a.data(), b.data(), once.data());
    kernels::gemm(false, false, m, n, k, a.data(), b.data(), twice.data());
    kernels::gemm(false, false, m, n, k, a.data(), b.data(), twice.data(), true);
    for (std::size_t i = 0; i < m * n; ++i) {
        CHECK(twice[i] == doctest::Approx(2.0 * once[i]).epsilon(1e-12));
    }
}

TEST_CASE("serial and openmp conv1d kernels are bit-identical") {
    Rng rng(103);
    const std::size_t c_in = 3, l = 40, c_out = 5, k = 4, stride = 2;
    const std::size_t l_out = (l - k) / stride + 1;
    const auto input = random_vec(c_in * l, rng);
    const auto kernel = random_vec(c_out * c_in * k, rng);
    const auto bias = random_vec(c_out, rng);

    std::vector<double> out_s(c_out * l_out), out_p(c_out * l_out);
    kernels::serial::conv1d_forward(c_in, l, c_out, k, stride, input.data(), kernel.data(),
                                    bias.data(), out_s.data());
    kernels::openmp::conv1d_forward(c_in, l, c_out, k, stride, input.data(), kernel.data(),
                                    bias.data(), out_p.data());
    CHECK(out_s == out_p);

    const auto d_out = random_vec(c_out * l_out, rng);
    std::vector<double> din_s(c_in * l, 0.0), din_p(c_in * l, 0.0);
    kernels::serial::conv1d_backward_input(c_in, l, c_out, k, stride, d_out.data(),
                                           kernel.data(), din_s.data());
    kernels::openmp::conv1d_backward_input(c_in, l, c_out, k, stride, d_out.data(),
                                           kernel.data(), din_p.data());
    CHECK(din_s == din_p);

    std::vector<double> dk_s(kernel.size(), 0.0), dk_p(kernel.size(), 0.0);
    std::vector<double> db_s(c_out, 0.0), db_p(c_out, 0.0);
    kernels::serial::conv1d_backward_kernel(c_in, l, c_out, k, stride, d_out.data(),
                                            input.data(), dk_s.data(), db_s.data());
    kernels::openmp::conv1d_backward_kernel(c_in, l, c_out, k, stride, d_out.data(),
                                            input.data(), dk_p.data(), db_p.data());
    CHECK(dk_s == dk_p);
    CHECK(db_s == db_p);
}

TEST_CASE("conv1d forward matches a hand-rolled reference") {
    // input 1x6 = [1..6], kernel 1x1x2 = [1, -1], stride 2, bias 0.5
    const std::vector<double> input{1, 2, 3, 4, 5, 6};
    const std::vector<double> kernel{1.0, -1.0};
    const std::vector<double> bias{0.5};
    std::vector<double> out(3);
    kernels::conv1d_forward(1, 6, 1, 2, 2, input.data(), kernel.data(), bias.data(),
                            out.data());
    CHECK(out[0] == doctest::Approx(1 - 2 + 0.5));
    CHECK(out[1] == doctest::Approx(3 - 4 + 0.5));
    CHECK(out[2] == doctest::Approx(5 - 6 + 0.5));
}

TEST_CASE("dispatch honors the parallel switch") {
    const bool saved = kernels::parallel_enabled();
    kernels::set_parallel_enabled(false);
    CHECK_FALSE(kernels::parallel_enabled());
    kernels::set_parallel_enabled(saved);
}
