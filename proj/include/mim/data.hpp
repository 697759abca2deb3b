#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mim/tensor.hpp"

namespace mim::data {

// One subject: region-by-time matrix plus identity, optional class label
// (0 = HC, 1 = SZ) and optional split assignment.
struct SubjectSeries {
    std::string subject_id;
    Tensor series; // [R x T], never requires grad
    std::optional<int> label;
    std::optional<std::string> split; // train | val | test

    std::size_t regions() const { return series.rows(); }
    std::size_t timepoints() const { return series.cols(); }
};

// Vector-autoregressive generator: x_t = A x_{t-1} + noise, A rescaled to the
// requested spectral radius. Labeled subjects share one base coupling matrix;
// class 1 gets an additive perturbation on a fixed off-diagonal block, so the
// class signal lives in the inter-region dynamics. Unlabeled subjects each
// draw their own base matrix.
struct SynthConfig {
    std::size_t regions = 16;
    std::size_t timepoints = 160;
    std::size_t subjects_per_class = 140;
    double rho = 0.9;             // target spectral radius, must be < 1
    std::size_t block_size = 4;   // class-difference block edge
    double block_delta = 0.035;   // additive perturbation magnitude
    double noise_std = 0.25;
    std::size_t burn_in = 50;
    std::uint64_t seed = 1;

    // Block feasibility only matters for labeled generation.
    void validate(bool labeled = true) const;
};

std::vector<SubjectSeries> generate_synthetic(const SynthConfig& cfg);
std::vector<SubjectSeries> generate_unlabeled(const SynthConfig& cfg, std::size_t count);

// Spectral radius of a square row-major matrix, estimated by normalized
// repeated squaring (rho = lim ||A^(2^m)||_F^(1/2^m)).
double spectral_radius(const std::vector<double>& a, std::size_t n);

// Per-region mean 0 / population std 1. Throws on a zero-variance region.
SubjectSeries zscore(const SubjectSeries& subject);

// Pearson correlation of every region pair, strict upper triangle in
// row-major order; length R(R-1)/2.
std::vector<double> fnc_features(const SubjectSeries& subject);

// Flat copy of the series values (the raw-data baseline input).
std::vector<double> raw_features(const SubjectSeries& subject);

// Directory layout: one CSV per subject (R rows x T comma-separated columns,
// no header) plus manifest.csv with lines `subject_id,path[,label][,split]`.
// Returns the manifest path.
std::string save_dataset(const std::vector<SubjectSeries>& subjects, const std::string& dir);
std::vector<SubjectSeries> load_dataset(const std::string& manifest_path);

} // namespace mim::data
