#include "mim/optimizer.hpp"

#include <cmath>

#include "mim/errors.hpp"

namespace mim {

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        if (!p.requires_grad()) {
            throw ContractError("Adam: parameter does not require gradients");
        }
        m_.emplace_back(p.size(), 0.0);
        v_.emplace_back(p.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Tensor& p = params_[pi];
        auto g = p.grad();
        for (double gv : g) {
            if (!std::isfinite(gv)) {
                throw NumericError("Adam: non-finite gradient, training diverged");
            }
        }
        auto vals = p.values();
        std::vector<double>& m = m_[pi];
        std::vector<double>& v = v_[pi];
        const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(vals.size());
#pragma omp parallel for schedule(static) if (n > 16384)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            vals[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
        }
    }
}

void Adam::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

} // namespace mim
