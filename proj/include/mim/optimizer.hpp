#pragma once

#include <vector>

#include "mim/tensor.hpp"

namespace mim {

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Standard Adam with bias correction over a fixed parameter list.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);

    // Applies one update from the parameters' current grads.
    // Throws NumericError on non-finite gradients (training divergence).
    void step();

    void zero_grad();

    std::size_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    std::size_t t_ = 0;
    AdamConfig cfg_;
};

} // namespace mim
