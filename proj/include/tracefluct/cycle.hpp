#pragma once

// Closed index walks i = (i_1, ..., i_k) over [N] and the pairs
// (i_a, i_{a+1}) they visit, with i_{k+1} = i_1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tracefluct/error.hpp"
#include "tracefluct/index_point.hpp"
#include "tracefluct/partition.hpp"

namespace tracefluct {

inline constexpr double cycle_budget = 1e7;  // limit on N^k
inline constexpr double pair_budget = 1e8;   // limit on N^{2k}

inline double int_pow(double base, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= base;
    return r;
}

inline void require_cycle_budget(int N, int k, const std::string& what) {
    if (int_pow(N, k) > cycle_budget) {
        throw BudgetError(what + ": N^k = " + std::to_string(N) + "^" + std::to_string(k) +
                          " exceeds the enumeration limit 1e7");
    }
}

inline void require_pair_budget(int N, int k, const std::string& what) {
    if (int_pow(N, 2 * k) > pair_budget) {
        throw BudgetError(what + ": N^(2k) = " + std::to_string(N) + "^" + std::to_string(2 * k) +
                          " exceeds the enumeration limit 1e8");
    }
}

/// 1-based components.
struct CycleIndex {
    std::vector<int> components;

    int k() const noexcept { return static_cast<int>(components.size()); }

    // a-th pair, a in 1..k
    IndexPoint pair(int a) const {
        return IndexPoint(components.at(static_cast<std::size_t>(a - 1)),
                          components[static_cast<std::size_t>(a % k())]);
    }

    PointTuple pairs() const {
        PointTuple out;
        for (int a = 1; a <= k(); ++a) out.push_back(pair(a));
        return out;
    }
};

// Dense id of the 0-based pair (a, b).
constexpr std::uint32_t pair_id(int a, int b, int N) noexcept {
    return static_cast<std::uint32_t>(a * N + b);
}

inline IndexPoint pair_point(std::uint32_t id, int N) {
    return IndexPoint(static_cast<int>(id) / N + 1, static_cast<int>(id) % N + 1);
}

inline void cycle_pair_ids(std::span<const int> idx, int N, std::vector<std::uint32_t>& out) {
    const std::size_t k = idx.size();
    out.resize(k);
    for (std::size_t a = 0; a < k; ++a) out[a] = pair_id(idx[a], idx[(a + 1) % k], N);
}

/// Visits every 0-based i in [N]^k in lexicographic order.
template <class Fn>
void for_each_cycle(int N, int k, Fn&& fn) {
    if (N < 1 || k < 1) throw UsageError("for_each_cycle: N and k must be positive");
    std::vector<int> idx(static_cast<std::size_t>(k), 0);
    while (true) {
        fn(std::span<const int>(idx));
        int pos = k - 1;
        while (pos >= 0 && ++idx[pos] == N) idx[pos--] = 0;
        if (pos < 0) return;
    }
}

/// All k pairs distinct.
inline bool all_pairs_distinct(std::span<const int> idx) {
    const std::size_t k = idx.size();
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            if (idx[a] == idx[b] && idx[(a + 1) % k] == idx[(b + 1) % k]) return false;
        }
    }
    return true;
}

/// Partition of positions induced by equal pairs.
inline Partition cycle_partition(std::span<const int> idx) {
    const std::size_t k = idx.size();
    std::vector<int> labels(k);
    for (std::size_t a = 0; a < k; ++a) {
        std::size_t b = 0;
        while (idx[b] != idx[a] || idx[(b + 1) % k] != idx[(a + 1) % k]) ++b;
        labels[a] = static_cast<int>(b);
    }
    return Partition::from_labels(labels);
}

inline Partition cycle_partition(const CycleIndex& i) { return cycle_partition(std::span<const int>(i.components)); }

}  // namespace tracefluct
