#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mim/errors.hpp"

namespace mim {

// Dimension sizes, row-major storage.
using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense n-d array of doubles, a cheap shared handle. Values live in a flat
// row-major buffer; a same-size grad buffer exists iff requires_grad. Ops
// propagate requires_grad from inputs to outputs, so the grad of every
// tensor reachable from a recorded graph can be populated by one backward
// traversal.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const { return d_->shape; }
    std::size_t size() const { return d_->values.size(); }
    std::size_t rank() const { return d_->shape.size(); }
    std::size_t dim(std::size_t i) const { return d_->shape.at(i); }
    std::size_t rows() const { return d_->shape.at(0); }
    std::size_t cols() const { return d_->shape.at(1); }
    bool requires_grad() const { return d_->requires_grad; }

    std::span<double> values() { return d_->values; }
    std::span<const double> values() const { return d_->values; }

    std::span<double> grad();
    std::span<const double> grad() const;
    void zero_grad();

    double operator()(std::size_t i) const { return d_->values[i]; }
    double operator()(std::size_t r, std::size_t c) const {
        return d_->values[r * d_->shape[1] + c];
    }
    double& at(std::size_t i) { return d_->values[i]; }
    double& at(std::size_t r, std::size_t c) {
        return d_->values[r * d_->shape[1] + c];
    }

    // Value of a one-element tensor.
    double item() const;

    // Deep value copy, detached from this handle's storage.
    Tensor clone(bool requires_grad) const;

    bool same_storage(const Tensor& other) const { return d_ == other.d_; }

private:
    struct Data {
        Shape shape;
        std::vector<double> values;
        std::vector<double> grad; // empty unless requires_grad
        bool requires_grad = false;
    };

    explicit Tensor(std::shared_ptr<Data> d) : d_(std::move(d)) {}

    std::shared_ptr<Data> d_;
};

} // namespace mim
