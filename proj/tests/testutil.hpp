#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mim/ops.hpp"
#include "mim/rng.hpp"

namespace testutil {

inline mim::Tensor random_tensor(mim::Shape shape, mim::Rng& rng, bool requires_grad,
                                 double lo = -1.0, double hi = 1.0) {
    mim::Tensor t = mim::Tensor::zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::size_t coords_checked = 0;
};

// Central finite differences against the tape gradients. `forward` must
// rebuild the graph from the current parameter values each call. For each
// parameter, `samples` coordinates are drawn (all of them if samples == 0).
inline GradCheckResult finite_diff_check(
    const std::function<mim::Tensor(mim::Tape&)>& forward,
    const std::vector<mim::Tensor>& params, std::size_t samples, mim::Rng& rng,
    double step = 1e-6) {
    std::vector<std::vector<double>> analytic;
    {
        mim::Tape tape;
        for (const mim::Tensor& p : params) {
            mim::Tensor t = p;
            t.zero_grad();
        }
        mim::Tensor loss = forward(tape);
        tape.backward(loss);
        for (const mim::Tensor& p : params) {
            auto g = p.grad();
            analytic.emplace_back(g.begin(), g.end());
        }
    }
    GradCheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        mim::Tensor p = params[pi];
        std::vector<std::size_t> coords;
        if (samples == 0 || samples >= p.size()) {
            for (std::size_t i = 0; i < p.size(); ++i) coords.push_back(i);
        } else {
            for (std::size_t s = 0; s < samples; ++s) coords.push_back(rng.uniform_index(p.size()));
        }
        for (std::size_t ci : coords) {
            const double saved = p.values()[ci];
            p.values()[ci] = saved + step;
            double up;
            {
                mim::Tape t2;
                up = forward(t2).item();
            }
            p.values()[ci] = saved - step;
            double down;
            {
                mim::Tape t3;
                down = forward(t3).item();
            }
            p.values()[ci] = saved;
            const double fd = (up - down) / (2.0 * step);
            const double ad = analytic[pi][ci];
            const double mag = std::max(std::fabs(ad), std::fabs(fd));
            double rel;
            if (mag < 1e-6) {
                rel = std::fabs(ad - fd) <= 1e-8 ? 0.0 : std::fabs(ad - fd) / 1e-6;
            } else {
                rel = std::fabs(ad - fd) / mag;
            }
            result.max_rel_err = std::max(result.max_rel_err, rel);
            ++result.coords_checked;
        }
    }
    return result;
}

// Brute-force pair-counting AUC (the independent oracle for stats::auc).
inline double auc_bruteforce(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != 0) continue;
            ++pairs;
            if (scores[i] > scores[j]) {
                wins += 1.0;
            } else if (scores[i] == scores[j]) {
                wins += 0.5;
            }
        }
    }
    return wins / double(pairs);
}

// Naive double-loop Pearson correlation (oracle for data::fnc_features).
inline std::vector<double> fnc_bruteforce(const mim::Tensor& series) {
    const std::size_t r = series.rows(), t = series.cols();
    std::vector<double> out;
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = i + 1; j < r; ++j) {
            double mi = 0.0, mj = 0.0;
            for (std::size_t k = 0; k < t; ++k) {
                mi += series(i, k);
                mj += series(j, k);
            }
            mi /= double(t);
            mj /= double(t);
            double num = 0.0, di = 0.0, dj = 0.0;
            for (std::size_t k = 0; k < t; ++k) {
                num += (series(i, k) - mi) * (series(j, k) - mj);
                di += (series(i, k) - mi) * (series(i, k) - mi);
                dj += (series(j, k) - mj) * (series(j, k) - mj);
            }
            out.push_back(num / std::sqrt(di * dj));
        }
    }
    return out;
}

// Sort-based selection oracle for gnn::topk_select.
inline std::vector<std::size_t> topk_bruteforce(const std::vector<double>& scores,
                                                double ratio) {
    const std::size_t k =
        static_cast<std::size_t>(std::ceil(ratio * double(scores.size())));
    std::vector<std::pair<double, std::size_t>> pairs;
    for (std::size_t i = 0; i < scores.size(); ++i) pairs.push_back({scores[i], i});
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < k; ++i) kept.push_back(pairs[i].second);
    std::sort(kept.begin(), kept.end());
    return kept;
}

} // namespace testutil
