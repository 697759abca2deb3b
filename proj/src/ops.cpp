#include "mim/ops.hpp"

#include <algorithm>
#include <cmath>

#include "mim/kernels.hpp"

namespace mim {

namespace {

bool tracked(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
    if (!tape.recording()) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
}

// Stable logistic.
inline double sigmoid_scalar(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor unary_map(Tape& tape, const Tensor& x, double (*fwd)(double),
                 double (*dfdy)(double y, double x)) {
    const bool rg = tracked(tape, {&x});
    Tensor out = Tensor::zeros(x.shape(), rg);
    auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = fwd(xv[i]);
    if (rg) {
        tape.record([x = x, out = out, dfdy]() mutable {
            if (!x.requires_grad()) return;
            auto g = out.grad();
            auto xg = x.grad();
            auto ov = out.values();
            auto xv = x.values();
            for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += g[i] * dfdy(ov[i], xv[i]);
        });
    }
    return out;
}

} // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul lhs");
    require_rank(b, 2, "matmul rhs");
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    const bool rg = tracked(tape, {&a, &b});
    Tensor out = Tensor::zeros({m, n}, rg);
    kernels::gemm(false, false, m, n, k, a.values().data(), b.values().data(),
                  out.values().data());
    if (rg) {
        tape.record([a = a, b = b, out = out, m, k, n]() mutable {
            const double* g = out.grad().data();
            if (a.requires_grad()) {
                // dA += G * B^T
                kernels::gemm(false, true, m, k, n, g, b.values().data(),
                              a.grad().data(), true);
            }
            if (b.requires_grad()) {
                // dB += A^T * G
                kernels::gemm(true, false, k, n, m, a.values().data(), g,
                              b.grad().data(), true);
            }
        });
    }
    return out;
}

Tensor matmul_nt(Tape& tape, const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul_nt lhs");
    require_rank(b, 2, "matmul_nt rhs");
    if (a.cols() != b.cols()) {
        throw ShapeError("matmul_nt: widths disagree, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    const bool rg = tracked(tape, {&a, &b});
    Tensor out = Tensor::zeros({m, n}, rg);
    kernels::gemm(false, true, m, n, k, a.values().data(), b.values().data(),
                  out.values().data());
    if (rg) {
        tape.record([a = a, b = b, out = out, m, k, n]() mutable {
            const double* g = out.grad().data();
            if (a.requires_grad()) {
                // dA += G * B
                kernels::gemm(false, false, m, k, n, g, b.values().data(),
                              a.grad().data(), true);
            }
            if (b.requires_grad()) {
                // dB += G^T * A
                kernels::gemm(true, false, n, k, m, g, a.values().data(),
                              b.grad().data(), true);
            }
        });
    }
    return out;
}

Tensor matmul_tn(Tape& tape, const Tensor& a, const Tensor& b) {
    require_rank(a, 2, "matmul_tn lhs");
    require_rank(b, 2, "matmul_tn rhs");
    if (a.rows() != b.rows()) {
        throw ShapeError("matmul_tn: heights disagree, " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
    const bool rg = tracked(tape, {&a, &b});
    Tensor out = Tensor::zeros({m, n}, rg);
    kernels::gemm(true, false, m, n, k, a.values().data(), b.values().data(),
                  out.values().data());
    if (rg) {
        tape.record([a = a, b = b, out = out, m, k, n]() mutable {
            const double* g = out.grad().data();
            if (a.requires_grad()) {
                // dA += B * G^T
                kernels::gemm(false, true, k, m, n, b.values().data(), g,
                              a.grad().data(), true);
            }
            if (b.requires_grad()) {
                // dB += A * G
                kernels::gemm(false, false, k, n, m, a.values().data(), g,
                              b.grad().data(), true);
            }
        });
    }
    return out;
}

Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernel,
              const Tensor& bias, std::size_t stride) {
    require_rank(input, 2, "conv1d input");
    require_rank(kernel, 3, "conv1d kernel");
    require_rank(bias, 1, "conv1d bias");
    if (stride == 0) throw ContractError("conv1d: stride must be positive");
    const std::size_t c_in = input.dim(0), l = input.dim(1);
    const std::size_t c_out = kernel.dim(0), k = kernel.dim(2);
    if (kernel.dim(1) != c_in) {
        throw ShapeError("conv1d: kernel input channels " + std::to_string(kernel.dim(1)) +
                         " do not match input channels " + std::to_string(c_in));
    }
    if (bias.dim(0) != c_out) {
        throw ShapeError("conv1d: bias length " + std::to_string(bias.dim(0)) +
                         " does not match output channels " + std::to_string(c_out));
    }
    if (l < k) {
        throw ShapeError("conv1d: input length " + std::to_string(l) +
                         " is shorter than kernel size " + std::to_string(k));
    }
    const std::size_t l_out = (l - k) / stride + 1;
    const bool rg = tracked(tape, {&input, &kernel, &bias});
    Tensor out = Tensor::zeros({c_out, l_out}, rg);
    kernels::conv1d_forward(c_in, l, c_out, k, stride, input.values().data(),
                            kernel.values().data(), bias.values().data(),
                            out.values().data());
    if (rg) {
        tape.record([input = input, kernel = kernel, bias = bias, out = out, c_in, l, c_out, k, stride]() mutable {
            const double* g = out.grad().data();
            if (input.requires_grad()) {
                kernels::conv1d_backward_input(c_in, l, c_out, k, stride, g,
                                               kernel.values().data(),
                                               input.grad().data());
            }
            if (kernel.requires_grad() || bias.requires_grad()) {
                kernels::conv1d_backward_kernel(
                    c_in, l, c_out, k, stride, g, input.values().data(),
                    kernel.requires_grad() ? kernel.grad().data() : nullptr,
                    bias.requires_grad() ? bias.grad().data() : nullptr);
            }
        });
    }
    return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
    return unary_map(
        tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double, double xv) { return xv > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(Tape& tape, const Tensor& x) {
    return unary_map(
        tape, x, [](double v) { return std::tanh(v); },
        [](double y, double) { return 1.0 - y * y; });
}

Tensor sigmoid(Tape& tape, const Tensor& x) {
    return unary_map(
        tape, x, [](double v) { return sigmoid_scalar(v); },
        [](double y, double) { return y * (1.0 - y); });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const bool rg = tracked(tape, {&a, &b});
    Tensor out = Tensor::zeros(a.shape(), rg);
    auto av = a.values(), bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
    if (rg) {
        tape.record([a = a, b = b, out = out]() mutable {
            auto g = out.grad();
            if (a.requires_grad()) {
                auto ag = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i];
            }
            if (b.requires_grad()) {
                auto bg = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) bg[i] += g[i];
            }
        });
    }
    return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const bool rg = tracked(tape, {&a, &b});
    Tensor out = Tensor::zeros(a.shape(), rg);
    auto av = a.values(), bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
    if (rg) {
        tape.record([a = a, b = b, out = out]() mutable {
            auto g = out.grad();
            if (a.requires_grad()) {
                auto ag = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i];
            }
            if (b.requires_grad()) {
                auto bg = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) bg[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const bool rg = tracked(tape, {&a, &b});
    Tensor out = Tensor::zeros(a.shape(), rg);
    auto av = a.values(), bv = b.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
    if (rg) {
        tape.record([a = a, b = b, out = out]() mutable {
            auto g = out.grad();
            auto av = a.values(), bv = b.values();
            if (a.requires_grad()) {
                auto ag = a.grad();
                for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * bv[i];
            }
            if (b.requires_grad()) {
                auto bg = b.grad();
                for (std::size_t i = 0; i < g.size(); ++i) bg[i] += g[i] * av[i];
            }
        });
    }
    return out;
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
    const bool rg = tracked(tape, {&x});
    Tensor out = Tensor::zeros(x.shape(), rg);
    auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * factor;
    if (rg) {
        tape.record([x = x, out = out, factor]() mutable {
            if (!x.requires_grad()) return;
            auto g = out.grad();
            auto xg = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) xg[i] += g[i] * factor;
        });
    }
    return out;
}

Tensor add_scalar(Tape& tape, const Tensor& x, double value) {
    const bool rg = tracked(tape, {&x});
    Tensor out = Tensor::zeros(x.shape(), rg);
    auto xv = x.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] + value;
    if (rg) {
        tape.record([x = x, out = out]() mutable {
            if (!x.requires_grad()) return;
            auto g = out.grad();
            auto xg = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) xg[i] += g[i];
        });
    }
    return out;
}

Tensor add_bias(Tape& tape, const Tensor& matrix, const Tensor& bias) {
    require_rank(matrix, 2, "add_bias matrix");
    require_rank(bias, 1, "add_bias bias");
    if (matrix.cols() != bias.dim(0)) {
        throw ShapeError("add_bias: matrix width " + std::to_string(matrix.cols()) +
                         " vs bias length " + std::to_string(bias.dim(0)));
    }
    const std::size_t n = matrix.rows(), d = matrix.cols();
    const bool rg = tracked(tape, {&matrix, &bias});
    Tensor out = Tensor::zeros(matrix.shape(), rg);
    auto mv = matrix.values();
    auto bv = bias.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) ov[i * d + j] = mv[i * d + j] + bv[j];
    }
    if (rg) {
        tape.record([matrix = matrix, bias = bias, out = out, n, d]() mutable {
            auto g = out.grad();
            if (matrix.requires_grad()) {
                auto mg = matrix.grad();
                for (std::size_t i = 0; i < g.size(); ++i) mg[i] += g[i];
            }
            if (bias.requires_grad()) {
                auto bg = bias.grad();
                for (std::size_t j = 0; j < d; ++j) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < n; ++i) s += g[i * d + j];
                    bg[j] += s;
                }
            }
        });
    }
    return out;
}

Tensor concat(Tape& tape, std::span<const Tensor> parts) {
    if (parts.empty()) throw ContractError("concat: no inputs");
    std::size_t total = 0;
    bool rg = false;
    for (const Tensor& p : parts) {
        require_rank(p, 1, "concat part");
        total += p.size();
        rg = rg || (tape.recording() && p.requires_grad());
    }
    Tensor out = Tensor::zeros({total}, rg);
    auto ov = out.values();
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        auto pv = p.values();
        std::copy(pv.begin(), pv.end(), ov.begin() + off);
        off += pv.size();
    }
    if (rg) {
        std::vector<Tensor> held(parts.begin(), parts.end());
        tape.record([held = std::move(held), out = out]() mutable {
            auto g = out.grad();
            std::size_t off = 0;
            for (Tensor& p : held) {
                if (p.requires_grad()) {
                    auto pg = p.grad();
                    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[off + i];
                }
                off += p.size();
            }
        });
    }
    return out;
}

Tensor slice(Tape& tape, const Tensor& x, std::size_t begin, std::size_t end) {
    require_rank(x, 1, "slice input");
    if (begin >= end || end > x.size()) {
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                         ") invalid for length " + std::to_string(x.size()));
    }
    const bool rg = tracked(tape, {&x});
    Tensor out = Tensor::zeros({end - begin}, rg);
    auto xv = x.values();
    std::copy(xv.begin() + begin, xv.begin() + end, out.values().begin());
    if (rg) {
        tape.record([x = x, out = out, begin]() mutable {
            if (!x.requires_grad()) return;
            auto g = out.grad();
            auto xg = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) xg[begin + i] += g[i];
        });
    }
    return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
    const bool rg = tracked(tape, {&x});
    double s = 0.0;
    for (double v : x.values()) s += v;
    Tensor out = Tensor::from_values({1}, {s}, rg);
    if (rg) {
        tape.record([x = x, out = out]() mutable {
            if (!x.requires_grad()) return;
            const double g = out.grad()[0];
            auto xg = x.grad();
            for (double& v : xg) v += g;
        });
    }
    return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
    const bool rg = tracked(tape, {&x});
    double s = 0.0;
    for (double v : x.values()) s += v;
    const double inv = 1.0 / static_cast<double>(x.size());
    Tensor out = Tensor::from_values({1}, {s * inv}, rg);
    if (rg) {
        tape.record([x = x, out = out, inv]() mutable {
            if (!x.requires_grad()) return;
            const double g = out.grad()[0] * inv;
            auto xg = x.grad();
            for (double& v : xg) v += g;
        });
    }
    return out;
}

namespace {

void require_axis(const Tensor& m, std::size_t axis, const char* what) {
    require_rank(m, 2, what);
    if (axis > 1) {
        throw ShapeError(std::string(what) + ": axis " + std::to_string(axis) +
                         " out of range for rank 2");
    }
}

} // namespace

Tensor sum_over_axis(Tape& tape, const Tensor& m, std::size_t axis) {
    require_axis(m, axis, "sum_over_axis");
    const std::size_t rows = m.rows(), cols = m.cols();
    const std::size_t out_len = axis == 0 ? cols : rows;
    const bool rg = tracked(tape, {&m});
    Tensor out = Tensor::zeros({out_len}, rg);
    auto mv = m.values();
    auto ov = out.values();
    if (axis == 0) {
        for (std::size_t j = 0; j < cols; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < rows; ++i) s += mv[i * cols + j];
            ov[j] = s;
        }
    } else {
        for (std::size_t i = 0; i < rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j) s += mv[i * cols + j];
            ov[i] = s;
        }
    }
    if (rg) {
        tape.record([m = m, out = out, rows, cols, axis]() mutable {
            if (!m.requires_grad()) return;
            auto g = out.grad();
            auto mg = m.grad();
            for (std::size_t i = 0; i < rows; ++i) {
                for (std::size_t j = 0; j < cols; ++j) {
                    mg[i * cols + j] += g[axis == 0 ? j : i];
                }
            }
        });
    }
    return out;
}

Tensor mean_over_axis(Tape& tape, const Tensor& m, std::size_t axis) {
    require_axis(m, axis, "mean_over_axis");
    const double inv = 1.0 / static_cast<double>(axis == 0 ? m.rows() : m.cols());
    Tensor s = sum_over_axis(tape, m, axis);
    return scale(tape, s, inv);
}

Tensor max_over_axis(Tape& tape, const Tensor& m, std::size_t axis) {
    require_axis(m, axis, "max_over_axis");
    const std::size_t rows = m.rows(), cols = m.cols();
    const std::size_t out_len = axis == 0 ? cols : rows;
    const bool rg = tracked(tape, {&m});
    Tensor out = Tensor::zeros({out_len}, rg);
    auto mv = m.values();
    auto ov = out.values();
    // argmax with first-index tie break, remembered for the backward route
    std::vector<std::size_t> arg(out_len, 0);
    if (axis == 0) {
        for (std::size_t j = 0; j < cols; ++j) {
            double best = mv[j];
            std::size_t bi = 0;
            for (std::size_t i = 1; i < rows; ++i) {
                if (mv[i * cols + j] > best) {
                    best = mv[i * cols + j];
                    bi = i;
                }
            }
            ov[j] = best;
            arg[j] = bi;
        }
    } else {
        for (std::size_t i = 0; i < rows; ++i) {
            double best = mv[i * cols];
            std::size_t bj = 0;
            for (std::size_t j = 1; j < cols; ++j) {
                if (mv[i * cols + j] > best) {
                    best = mv[i * cols + j];
                    bj = j;
                }
            }
            ov[i] = best;
            arg[i] = bj;
        }
    }
    if (rg) {
        tape.record([m = m, out = out, arg = std::move(arg), cols, axis]() mutable {
            if (!m.requires_grad()) return;
            auto g = out.grad();
            auto mg = m.grad();
            for (std::size_t o = 0; o < g.size(); ++o) {
                const std::size_t i = axis == 0 ? arg[o] : o;
                const std::size_t j = axis == 0 ? o : arg[o];
                mg[i * cols + j] += g[o];
            }
        });
    }
    return out;
}

Tensor softmax_rows(Tape& tape, const Tensor& m) {
    require_rank(m, 2, "softmax_rows");
    const std::size_t rows = m.rows(), cols = m.cols();
    const bool rg = tracked(tape, {&m});
    Tensor out = Tensor::zeros(m.shape(), rg);
    auto mv = m.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = mv.data() + i * cols;
        double* orow = ov.data() + i * cols;
        double mx = row[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            orow[j] = std::exp(row[j] - mx);
            z += orow[j];
        }
        const double inv = 1.0 / z;
        for (std::size_t j = 0; j < cols; ++j) orow[j] *= inv;
    }
    if (rg) {
        tape.record([m = m, out = out, rows, cols]() mutable {
            if (!m.requires_grad()) return;
            auto g = out.grad();
            auto y = out.values();
            auto mg = m.grad();
            for (std::size_t i = 0; i < rows; ++i) {
                const double* grow = g.data() + i * cols;
                const double* yrow = y.data() + i * cols;
                double dot = 0.0;
                for (std::size_t j = 0; j < cols; ++j) dot += grow[j] * yrow[j];
                double* mgrow = mg.data() + i * cols;
                for (std::size_t j = 0; j < cols; ++j) {
                    mgrow[j] += yrow[j] * (grow[j] - dot);
                }
            }
        });
    }
    return out;
}

Tensor log_softmax_rows(Tape& tape, const Tensor& m) {
    require_rank(m, 2, "log_softmax_rows");
    const std::size_t rows = m.rows(), cols = m.cols();
    const bool rg = tracked(tape, {&m});
    Tensor out = Tensor::zeros(m.shape(), rg);
    auto mv = m.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = mv.data() + i * cols;
        double* orow = ov.data() + i * cols;
        double mx = row[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < cols; ++j) orow[j] = row[j] - lse;
    }
    if (rg) {
        tape.record([m = m, out = out, rows, cols]() mutable {
            if (!m.requires_grad()) return;
            auto g = out.grad();
            auto y = out.values();
            auto mg = m.grad();
            for (std::size_t i = 0; i < rows; ++i) {
                const double* grow = g.data() + i * cols;
                const double* yrow = y.data() + i * cols;
                double gsum = 0.0;
                for (std::size_t j = 0; j < cols; ++j) gsum += grow[j];
                double* mgrow = mg.data() + i * cols;
                for (std::size_t j = 0; j < cols; ++j) {
                    mgrow[j] += grow[j] - std::exp(yrow[j]) * gsum;
                }
            }
        });
    }
    return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
    }
    const bool rg = tracked(tape, {&x});
    Tensor out = Tensor::zeros(std::move(shape), rg);
    auto xv = x.values();
    std::copy(xv.begin(), xv.end(), out.values().begin());
    if (rg) {
        tape.record([x = x, out = out]() mutable {
            if (!x.requires_grad()) return;
            auto g = out.grad();
            auto xg = x.grad();
            for (std::size_t i = 0; i < g.size(); ++i) xg[i] += g[i];
        });
    }
    return out;
}

Tensor stack_rows(Tape& tape, std::span<const Tensor> rows) {
    if (rows.empty()) throw ContractError("stack_rows: no inputs");
    const std::size_t d = rows.front().size();
    bool rg = false;
    for (const Tensor& r : rows) {
        require_rank(r, 1, "stack_rows row");
        if (r.size() != d) {
            throw ShapeError("stack_rows: row length " + std::to_string(r.size()) +
                             " differs from first row length " + std::to_string(d));
        }
        rg = rg || (tape.recording() && r.requires_grad());
    }
    Tensor out = Tensor::zeros({rows.size(), d}, rg);
    auto ov = out.values();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto rv = rows[i].values();
        std::copy(rv.begin(), rv.end(), ov.begin() + i * d);
    }
    if (rg) {
        std::vector<Tensor> held(rows.begin(), rows.end());
        tape.record([held = std::move(held), out = out, d]() mutable {
            auto g = out.grad();
            for (std::size_t i = 0; i < held.size(); ++i) {
                if (!held[i].requires_grad()) continue;
                auto rg_ = held[i].grad();
                for (std::size_t j = 0; j < d; ++j) rg_[j] += g[i * d + j];
            }
        });
    }
    return out;
}

Tensor gather_rows(Tape& tape, const Tensor& m, const std::vector<std::size_t>& idx) {
    require_rank(m, 2, "gather_rows");
    if (idx.empty()) throw ContractError("gather_rows: empty index set");
    const std::size_t cols = m.cols();
    for (std::size_t i : idx) {
        if (i >= m.rows()) {
            throw ShapeError("gather_rows: index " + std::to_string(i) +
                             " out of range for " + std::to_string(m.rows()) + " rows");
        }
    }
    const bool rg = tracked(tape, {&m});
    Tensor out = Tensor::zeros({idx.size(), cols}, rg);
    auto mv = m.values();
    auto ov = out.values();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::copy(mv.begin() + idx[r] * cols, mv.begin() + (idx[r] + 1) * cols,
                  ov.begin() + r * cols);
    }
    if (rg) {
        tape.record([m = m, out = out, idx, cols]() mutable {
            if (!m.requires_grad()) return;
            auto g = out.grad();
            auto mg = m.grad();
            for (std::size_t r = 0; r < idx.size(); ++r) {
                for (std::size_t j = 0; j < cols; ++j) {
                    mg[idx[r] * cols + j] += g[r * cols + j];
                }
            }
        });
    }
    return out;
}

Tensor gather_submatrix(Tape& tape, const Tensor& m, const std::vector<std::size_t>& idx) {
    require_rank(m, 2, "gather_submatrix");
    if (m.rows() != m.cols()) {
        throw ShapeError("gather_submatrix: matrix must be square, got " +
                         shape_str(m.shape()));
    }
    if (idx.empty()) throw ContractError("gather_submatrix: empty index set");
    const std::size_t n = m.rows(), k = idx.size();
    for (std::size_t i : idx) {
        if (i >= n) {
            throw ShapeError("gather_submatrix: index " + std::to_string(i) +
                             " out of range for size " + std::to_string(n));
        }
    }
    const bool rg = tracked(tape, {&m});
    Tensor out = Tensor::zeros({k, k}, rg);
    auto mv = m.values();
    auto ov = out.values();
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
            ov[a * k + b] = mv[idx[a] * n + idx[b]];
        }
    }
    if (rg) {
        tape.record([m = m, out = out, idx, n, k]() mutable {
            if (!m.requires_grad()) return;
            auto g = out.grad();
            auto mg = m.grad();
            for (std::size_t a = 0; a < k; ++a) {
                for (std::size_t b = 0; b < k; ++b) {
                    mg[idx[a] * n + idx[b]] += g[a * k + b];
                }
            }
        });
    }
    return out;
}

Tensor scale_rows(Tape& tape, const Tensor& m, const Tensor& col) {
    require_rank(m, 2, "scale_rows matrix");
    const std::size_t n = m.rows(), d = m.cols();
    if (col.size() != n) {
        throw ShapeError("scale_rows: column length " + std::to_string(col.size()) +
                         " does not match row count " + std::to_string(n));
    }
    const bool rg = tracked(tape, {&m, &col});
    Tensor out = Tensor::zeros(m.shape(), rg);
    auto mv = m.values();
    auto cv = col.values();
    auto ov = out.values();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) ov[i * d + j] = mv[i * d + j] * cv[i];
    }
    if (rg) {
        tape.record([m = m, col = col, out = out, n, d]() mutable {
            auto g = out.grad();
            auto mv = m.values();
            auto cv = col.values();
            if (m.requires_grad()) {
                auto mg = m.grad();
                for (std::size_t i = 0; i < n; ++i) {
                    for (std::size_t j = 0; j < d; ++j) {
                        mg[i * d + j] += g[i * d + j] * cv[i];
                    }
                }
            }
            if (col.requires_grad()) {
                auto cg = col.grad();
                for (std::size_t i = 0; i < n; ++i) {
                    double s = 0.0;
                    for (std::size_t j = 0; j < d; ++j) s += g[i * d + j] * mv[i * d + j];
                    cg[i] += s;
                }
            }
        });
    }
    return out;
}

Tensor l2_norm(Tape& tape, const Tensor& x) {
    const bool rg = tracked(tape, {&x});
    double ss = 0.0;
    for (double v : x.values()) ss += v * v;
    const double norm = std::sqrt(ss);
    Tensor out = Tensor::from_values({1}, {norm}, rg);
    if (rg) {
        tape.record([x = x, out = out, norm]() mutable {
            if (!x.requires_grad() || norm == 0.0) return;
            const double g = out.grad()[0] / norm;
            auto xv = x.values();
            auto xg = x.grad();
            for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += g * xv[i];
        });
    }
    return out;
}

Tensor divide(Tape& tape, const Tensor& x, const Tensor& denom) {
    if (denom.size() != 1) {
        throw ShapeError("divide: denominator must be a scalar tensor, got " +
                         shape_str(denom.shape()));
    }
    const double s = denom.item();
    const bool rg = tracked(tape, {&x, &denom});
    Tensor out = Tensor::zeros(x.shape(), rg);
    auto xv = x.values();
    auto ov = out.values();
    const double inv = 1.0 / s;
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] * inv;
    if (rg) {
        tape.record([x = x, denom = denom, out = out, inv]() mutable {
            auto g = out.grad();
            auto ov = out.values();
            if (x.requires_grad()) {
                auto xg = x.grad();
                for (std::size_t i = 0; i < g.size(); ++i) xg[i] += g[i] * inv;
            }
            if (denom.requires_grad()) {
                double s = 0.0;
                for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * ov[i];
                denom.grad()[0] -= s * inv;
            }
        });
    }
    return out;
}

Tensor diag_sum(Tape& tape, const Tensor& m) {
    require_rank(m, 2, "diag_sum");
    if (m.rows() != m.cols()) {
        throw ShapeError("diag_sum: matrix must be square, got " + shape_str(m.shape()));
    }
    const std::size_t n = m.rows();
    const bool rg = tracked(tape, {&m});
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += m(i, i);
    Tensor out = Tensor::from_values({1}, {s}, rg);
    if (rg) {
        tape.record([m = m, out = out, n]() mutable {
            if (!m.requires_grad()) return;
            const double g = out.grad()[0];
            auto mg = m.grad();
            for (std::size_t i = 0; i < n; ++i) mg[i * n + i] += g;
        });
    }
    return out;
}

Tensor nll_loss(Tape& tape, const Tensor& log_probs, const std::vector<int>& labels,
                bool take_mean) {
    require_rank(log_probs, 2, "nll_loss log_probs");
    const std::size_t n = log_probs.rows(), k = log_probs.cols();
    if (labels.size() != n) {
        throw ShapeError("nll_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n) + " rows");
    }
    for (int lab : labels) {
        if (lab < 0 || static_cast<std::size_t>(lab) >= k) {
            throw ContractError("nll_loss: label " + std::to_string(lab) +
                                " out of range for " + std::to_string(k) + " classes");
        }
    }
    const double w = take_mean ? 1.0 / static_cast<double>(n) : 1.0;
    const bool rg = tracked(tape, {&log_probs});
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s -= log_probs(i, static_cast<std::size_t>(labels[i]));
    }
    Tensor out = Tensor::from_values({1}, {s * w}, rg);
    if (rg) {
        tape.record([log_probs = log_probs, out = out, labels, k, w]() mutable {
            if (!log_probs.requires_grad()) return;
            const double g = out.grad()[0] * w;
            auto lg = log_probs.grad();
            for (std::size_t i = 0; i < labels.size(); ++i) {
                lg[i * k + static_cast<std::size_t>(labels[i])] -= g;
            }
        });
    }
    return out;
}

} // namespace mim
