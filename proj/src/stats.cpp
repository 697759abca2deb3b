#include "mim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mim/errors.hpp"

namespace mim::stats {

double mean(const std::vector<double>& xs) {
    if (xs.empty()) throw ContractError("mean: empty sample");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) throw ContractError("sample_variance: need at least 2 values");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double sample_stddev(const std::vector<double>& xs) {
    return std::sqrt(sample_variance(xs));
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw ContractError("auc: " + std::to_string(scores.size()) + " scores for " +
                            std::to_string(labels.size()) + " labels");
    }
    std::size_t n_pos = 0, n_neg = 0;
    for (int l : labels) {
        if (l == 1) {
            ++n_pos;
        } else if (l == 0) {
            ++n_neg;
        } else {
            throw ContractError("auc: labels must be 0/1, got " + std::to_string(l));
        }
    }
    if (n_pos == 0 || n_neg == 0) {
        throw ContractError("auc: both classes must be present");
    }
    // Average-rank formulation: AUC = (R+ - n+(n+ + 1)/2) / (n+ n-), where R+
    // is the positive-class rank sum with tied scores given their mean rank.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        }
        i = j + 1;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

double reg_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    // Use the symmetry relation where the continued fraction converges fast.
    if (x > (a + 1.0) / (a + b + 2.0)) {
        return 1.0 - reg_incomplete_beta(b, a, 1.0 - x);
    }
    const double log_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(std::log(x) * a + std::log1p(-x) * b - log_beta) / a;
    // Lentz's algorithm for the standard continued fraction.
    constexpr double tiny = 1e-30;
    double f = 1.0, c = 1.0, d = 0.0;
    for (int i = 0; i <= 400; ++i) {
        const int m = i / 2;
        double numerator;
        if (i == 0) {
            numerator = 1.0;
        } else if (i % 2 == 0) {
            numerator = (m * (b - m) * x) / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
        } else {
            numerator = -((a + m) * (a + b + m) * x) / ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
        }
        d = 1.0 + numerator * d;
        if (std::fabs(d) < tiny) d = tiny;
        d = 1.0 / d;
        c = 1.0 + numerator / c;
        if (std::fabs(c) < tiny) c = tiny;
        const double cd = c * d;
        f *= cd;
        if (std::fabs(1.0 - cd) < 1e-14) return front * (f - 1.0);
    }
    throw NumericError("reg_incomplete_beta: continued fraction did not converge");
}

TTestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) {
        throw ContractError("welch_t_test: each sample needs at least 2 values");
    }
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    const double va = sample_variance(a), vb = sample_variance(b);
    if (va == 0.0 && vb == 0.0) {
        if (mean(a) == mean(b)) return {0.0, 1.0, na + nb - 2.0};
        throw ContractError("welch_t_test: both samples have zero variance");
    }
    const double sa = va / na, sb = vb / nb;
    const double se = std::sqrt(sa + sb);
    const double t = (mean(a) - mean(b)) / se;
    const double dof = (sa + sb) * (sa + sb) /
                       (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    // Two-sided p = I_{dof/(dof+t^2)}(dof/2, 1/2).
    const double x = dof / (dof + t * t);
    const double p = reg_incomplete_beta(dof / 2.0, 0.5, x);
    return {t, p, dof};
}

} // namespace mim::stats
