#include "mim/tensor.hpp"

#include <sstream>

namespace mim {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor dimension must be positive, got shape " + shape_str(shape));
    }
    auto d = std::make_shared<Data>();
    const std::size_t n = shape_numel(shape);
    d->shape = std::move(shape);
    d->values.assign(n, 0.0);
    d->requires_grad = requires_grad;
    if (requires_grad) d->grad.assign(n, 0.0);
    return Tensor(std::move(d));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = value;
    return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    }
    Tensor t = zeros(std::move(shape), requires_grad);
    std::copy(values.begin(), values.end(), t.values().begin());
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

std::span<double> Tensor::grad() {
    if (!d_->requires_grad) {
        throw ContractError("grad() on a tensor that does not require gradients");
    }
    return d_->grad;
}

std::span<const double> Tensor::grad() const {
    if (!d_->requires_grad) {
        throw ContractError("grad() on a tensor that does not require gradients");
    }
    return d_->grad;
}

void Tensor::zero_grad() {
    if (d_->requires_grad) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
}

double Tensor::item() const {
    if (size() != 1) {
        throw ContractError("item() on a tensor of shape " + shape_str(shape()));
    }
    return d_->values[0];
}

Tensor Tensor::clone(bool requires_grad) const {
    Tensor t = zeros(d_->shape, requires_grad);
    std::copy(d_->values.begin(), d_->values.end(), t.values().begin());
    return t;
}

} // namespace mim
