#pragma once

#include <functional>
#include <vector>

#include "mim/tensor.hpp"

namespace mim {

// Record of primitive operations in execution order. Each entry is a closure
// that reads its output's grad and accumulates into its inputs' grads, so one
// reverse sweep implements the chain rule with additive fan-out handling.
//
// A Tape and the tensors recorded on it belong to one worker at a time;
// independent replicas run on independent tapes.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

    void record(std::function<void()> backward_step) {
        nodes_.push_back(std::move(backward_step));
    }

    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)=1 and runs every recorded backward step in reverse order.
    // loss must be a one-element tensor produced on this tape.
    void backward(const Tensor& loss);

    // Drops all recorded steps (grads are untouched).
    void clear() { nodes_.clear(); }

private:
    std::vector<std::function<void()>> nodes_;
    bool recording_ = true;
};

// Turns recording off for the enclosing scope (evaluation-mode forwards).
class NoGradGuard {
public:
    explicit NoGradGuard(Tape& tape) : tape_(tape), prev_(tape.recording()) {
        tape_.set_recording(false);
    }
    ~NoGradGuard() { tape_.set_recording(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    Tape& tape_;
    bool prev_;
};

} // namespace mim
