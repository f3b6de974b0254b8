#pragma once

// Invariance-principle bound for vectors of homogeneous sums with unit
// second moments, assembled from contraction norms and influences.

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tracefluct/error.hpp"
#include "tracefluct/kernel.hpp"

namespace tracefluct {

/// What the bound needs from one kernel: ||f ⋆_s f|| for s = 0..k and the
/// largest influence.
struct ChaosComponentSummary {
    int order = 0;
    std::vector<double> contraction_norms;  // index s, size order + 1
    double max_influence = 0.0;
};

inline ChaosComponentSummary summarize_component(const SymmetricKernel& f) {
    ChaosComponentSummary s;
    s.order = f.order();
    s.contraction_norms.resize(static_cast<std::size_t>(f.order() + 1));
    for (int r = 0; r <= f.order(); ++r) s.contraction_norms[r] = contraction_norm(f, r);
    s.max_influence = max_influence(f);
    return s;
}

/// Sum over index points of the largest influence across kernels; the
/// smallest admissible K.
inline double influence_budget(std::span<const SymmetricKernel> kernels) {
    std::map<IndexPoint, double> best;
    for (const auto& f : kernels) {
        for (const auto& [a, v] : influences(f)) best[a] = std::max(best[a], v);
    }
    double total = 0.0;
    for (const auto& [a, v] : best) total += v;
    return total;
}

namespace detail {

inline double binomial(int n, int r) {
    if (r < 0 || n < 0 || r > n) return 0.0;
    double out = 1.0;
    for (int i = 1; i <= r; ++i) out = out * (n - r + i) / i;
    return out;
}

}  // namespace detail

struct BoundTerms {
    std::vector<std::vector<double>> delta;  // delta[i][j], filled for i <= j
    double second_order = 0.0;               // sum_i delta_ii + 2 sum_{i<j} delta_ij
    double third_order_factor = 0.0;         // (beta + sqrt(8/pi)) [sum_j ...]^3 sqrt(max inf)
    double max_influence = 0.0;
};

inline double delta_term(const ChaosComponentSummary& fi, const ChaosComponentSummary& fj) {
    const int ki = fi.order;
    const int kj = fj.order;
    double sum = 0.0;
    for (int r = 1; r <= kj - 1; ++r) {
        const double c = detail::binomial(ki - 1, r - 1) * detail::binomial(kj - 1, r - 1);
        if (c == 0.0) continue;
        const double norms = fi.contraction_norms[ki - r] + fj.contraction_norms[kj - r];
        sum += detail::factorial(r - 1) * c * std::sqrt(detail::factorial(ki + kj - 2 * r)) * norms;
    }
    double out = kj / std::numbers::sqrt2 * sum;
    if (ki < kj) {
        out += std::sqrt(detail::factorial(kj) * detail::binomial(kj, ki)) *
               fj.contraction_norms[kj - ki];
    }
    return out;
}

/// Components must have orders >= 2 listed in strictly increasing order.
inline BoundTerms universal_bound_terms(std::span<const ChaosComponentSummary> comps, double beta) {
    if (comps.empty()) throw UsageError("bound: at least one component required");
    if (beta < 1.0) throw UsageError("bound: beta must be >= 1");
    for (std::size_t j = 0; j < comps.size(); ++j) {
        if (comps[j].order < 2) throw UsageError("bound: component orders must be >= 2");
        if (comps[j].contraction_norms.size() != static_cast<std::size_t>(comps[j].order + 1)) {
            throw UsageError("bound: component needs contraction norms for s = 0..k");
        }
        if (j > 0 && comps[j].order <= comps[j - 1].order) {
            throw UsageError("bound: orders must be strictly increasing");
        }
    }
    const std::size_t m = comps.size();
    BoundTerms t;
    t.delta.assign(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            t.delta[i][j] = delta_term(comps[i], comps[j]);
            t.second_order += (i == j ? 1.0 : 2.0) * t.delta[i][j];
        }
    }
    double bracket = 0.0;
    for (const auto& c : comps) {
        bracket += std::pow(16.0 * std::numbers::sqrt2 * beta, (c.order - 1) / 3.0) *
                   detail::factorial(c.order);
    }
    for (const auto& c : comps) t.max_influence = std::max(t.max_influence, c.max_influence);
    t.third_order_factor = (beta + std::sqrt(8.0 / std::numbers::pi)) * bracket * bracket *
                           bracket * std::sqrt(t.max_influence);
    return t;
}

inline double universal_bound(std::span<const ChaosComponentSummary> comps, double beta,
                              double phi_d2, double phi_d3, double K) {
    if (phi_d2 < 0.0 || phi_d3 < 0.0 || K < 0.0) {
        throw UsageError("bound: derivative bounds and K must be nonnegative");
    }
    const BoundTerms t = universal_bound_terms(comps, beta);
    return phi_d2 * t.second_order + K * phi_d3 * t.third_order_factor;
}

/// Kernel entry point: each kernel must satisfy k! * norm_sq = 1 to 1e-9.
inline double universal_bound(std::span<const SymmetricKernel> kernels, double beta, double phi_d2,
                              double phi_d3, double K) {
    std::vector<ChaosComponentSummary> comps;
    for (const auto& f : kernels) {
        const double second = detail::factorial(f.order()) * norm_sq(f);
        if (std::abs(second - 1.0) > 1e-9) {
            throw UsageError("bound: kernel of order " + std::to_string(f.order()) +
                             " has E[Q^2] = " + std::to_string(second) + ", expected 1");
        }
        comps.push_back(summarize_component(f));
    }
    return universal_bound(comps, beta, phi_d2, phi_d3, K);
}

/// max over multi-indices |alpha| = order of (prod |t_i|^alpha_i) / alpha!,
/// the normalized sup of the order-th derivatives of x -> cos(t . x).
inline double cosine_derivative_bound(std::span<const double> t, int order) {
    if (order < 0) throw UsageError("derivative order must be >= 0");
    if (t.empty()) return order == 0 ? 1.0 : 0.0;
    double best = 0.0;
    std::vector<int> alpha(t.size(), 0);
    auto recurse = [&](auto&& self, std::size_t pos, int left) -> void {
        if (pos + 1 == t.size()) {
            alpha[pos] = left;
            double v = 1.0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                v *= std::pow(std::abs(t[i]), alpha[i]) / detail::factorial(alpha[i]);
            }
            best = std::max(best, v);
            return;
        }
        for (int a = 0; a <= left; ++a) {
            alpha[pos] = a;
            self(self, pos + 1, left - a);
        }
    };
    recurse(recurse, 0, order);
    return best;
}

}  // namespace tracefluct
