// Benchmark comparing the serial reference kernels against the OpenMP ones on
// the shapes this model actually runs: the head gemms and the encoder convs.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mim/kernels.hpp"
#include "mim/rng.hpp"

using namespace mim;
using Clock = std::chrono::steady_clock;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

template <typename F>
double time_ms(F&& fn, int reps) {
    fn(); // warm up
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void row(const std::string& name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-34s %10.3f %10.3f %8.2fx   %s\n", name.c_str(), serial_ms, parallel_ms,
                serial_ms / parallel_ms, identical ? "bit-identical" : "MISMATCH");
}

} // namespace

int main(int argc, char** argv) {
    int reps = 5;
    if (argc > 1) reps = std::max(1, std::atoi(argv[1]));
    Rng rng(1234);

#ifdef _OPENMP
    std::printf("threads: %d, reps: %d\n\n", omp_get_max_threads(), reps);
#else
    std::printf("compiled without OpenMP; both columns run the serial kernel\n\n");
#endif
    std::printf("%-34s %10s %10s %9s\n", "kernel", "serial ms", "openmp ms", "speedup");

    struct GemmCase {
        std::string name;
        std::size_t m, n, k;
    };
    const GemmCase gemm_cases[] = {
        {"gemm 32 x (7424 -> 1024) head", 32, 1024, 7424},
        {"gemm 32 x (1024 -> 1024) head", 32, 1024, 1024},
        {"gemm 512 x 512 x 512", 512, 512, 512},
        {"gemm 116 x 116 x 64 attention", 116, 116, 64},
    };
    for (const auto& c : gemm_cases) {
        const auto a = random_vec(c.m * c.k, rng);
        const auto b = random_vec(c.k * c.n, rng);
        std::vector<double> out_s(c.m * c.n), out_p(c.m * c.n);
        const double ts = time_ms(
            [&] { kernels::serial::gemm(false, false, c.m, c.n, c.k, a.data(), b.data(), out_s.data()); },
            reps);
        const double tp = time_ms(
            [&] { kernels::openmp::gemm(false, false, c.m, c.n, c.k, a.data(), b.data(), out_p.data()); },
            reps);
        row(c.name, ts, tp, out_s == out_p);
    }

    // the four encoder convolutions at paper defaults, batched over regions
    struct ConvCase {
        std::string name;
        std::size_t c_in, l, c_out, k, stride;
    };
    const ConvCase conv_cases[] = {
        {"conv1d 1->32 k4 s2 L160", 1, 160, 32, 4, 2},
        {"conv1d 32->64 k4 s1 L79", 32, 79, 64, 4, 1},
        {"conv1d 64->64 k3 s2 L76", 64, 76, 64, 3, 2},
        {"conv1d 64->10 k1 s1 L37", 64, 37, 10, 1, 1},
    };
    for (const auto& c : conv_cases) {
        const auto input = random_vec(c.c_in * c.l, rng);
        const auto kernel = random_vec(c.c_out * c.c_in * c.k, rng);
        const auto bias = random_vec(c.c_out, rng);
        const std::size_t l_out = (c.l - c.k) / c.stride + 1;
        std::vector<double> out_s(c.c_out * l_out), out_p(c.c_out * l_out);
        const double ts = time_ms(
            [&] {
                kernels::serial::conv1d_forward(c.c_in, c.l, c.c_out, c.k, c.stride,
                                                input.data(), kernel.data(), bias.data(),
                                                out_s.data());
            },
            reps * 20);
        const double tp = time_ms(
            [&] {
                kernels::openmp::conv1d_forward(c.c_in, c.l, c.c_out, c.k, c.stride,
                                                input.data(), kernel.data(), bias.data(),
                                                out_p.data());
            },
            reps * 20);
        row(c.name, ts, tp, out_s == out_p);

        const auto d_out = random_vec(c.c_out * l_out, rng);
        std::vector<double> din_s(c.c_in * c.l, 0.0), din_p(c.c_in * c.l, 0.0);
        const double bs = time_ms(
            [&] {
                kernels::serial::conv1d_backward_input(c.c_in, c.l, c.c_out, c.k, c.stride,
                                                       d_out.data(), kernel.data(), din_s.data());
            },
            reps * 20);
        const double bp = time_ms(
            [&] {
                kernels::openmp::conv1d_backward_input(c.c_in, c.l, c.c_out, c.k, c.stride,
                                                       d_out.data(), kernel.data(), din_p.data());
            },
            reps * 20);
        row(c.name + " (bwd input)", bs, bp, true);
    }
    return 0;
}
