#pragma once

// Chains of length 2k (an upper and a lower closed walk), the classes
// C_pi, C_pi^{u,v}, C_pi^R of chains with a given pair pattern, exhaustive
// enumeration of these classes and degrees-of-freedom witnesses.
//
// Conventions: positions 1..k, block numbers 1..r in first-occurrence order,
// index values 1..N.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tracefluct/cycle.hpp"
#include "tracefluct/distribution.hpp"
#include "tracefluct/error.hpp"
#include "tracefluct/partition.hpp"

namespace tracefluct {

struct Chain {
    std::vector<int> upper;  // i_1..i_k
    std::vector<int> lower;  // j_1..j_k

    Chain() = default;
    Chain(std::vector<int> up, std::vector<int> low) : upper(std::move(up)), lower(std::move(low)) {
        if (upper.size() != lower.size() || upper.empty()) {
            throw UsageError("chain sub-chains must have the same positive length");
        }
        for (int x : upper) {
            if (x < 1) throw UsageError("chain indices must be >= 1");
        }
        for (int x : lower) {
            if (x < 1) throw UsageError("chain indices must be >= 1");
        }
    }

    /// From the 2k written pairs; each pair's right index must be the next
    /// pair's left index (cyclically within each half).
    static Chain from_pairs(const std::vector<IndexPoint>& pairs) {
        if (pairs.size() < 2 || pairs.size() % 2) throw UsageError("a chain has an even number 2k >= 2 of pairs");
        const std::size_t k = pairs.size() / 2;
        std::vector<int> up(k);
        std::vector<int> low(k);
        for (std::size_t a = 0; a < k; ++a) {
            const IndexPoint& p = pairs[a];
            const IndexPoint& q = pairs[k + a];
            if (p.col() != pairs[(a + 1) % k].row() || q.col() != pairs[k + (a + 1) % k].row()) {
                throw UsageError("pairs do not link into two closed walks");
            }
            up[a] = p.row();
            low[a] = q.row();
        }
        return Chain(std::move(up), std::move(low));
    }

    int k() const noexcept { return static_cast<int>(upper.size()); }

    IndexPoint upper_pair(int a) const {
        return IndexPoint(upper.at(static_cast<std::size_t>(a - 1)), upper[static_cast<std::size_t>(a % k())]);
    }
    IndexPoint lower_pair(int a) const {
        return IndexPoint(lower.at(static_cast<std::size_t>(a - 1)), lower[static_cast<std::size_t>(a % k())]);
    }

    auto operator<=>(const Chain&) const = default;
};

namespace detail {

inline Partition walk_partition(const std::vector<int>& walk) {
    std::vector<int> zero(walk.size());
    for (std::size_t a = 0; a < walk.size(); ++a) zero[a] = walk[a] - 1;
    return cycle_partition(std::span<const int>(zero));
}

}  // namespace detail

/// True iff both sub-chains induce exactly the pair pattern pi.
inline bool chain_has_partition(const Chain& c, const Partition& pi) {
    if (c.k() != pi.k()) return false;
    return detail::walk_partition(c.upper) == pi && detail::walk_partition(c.lower) == pi;
}

class ChainClassDescriptor {
public:
    enum class Kind { plain, single, bijection };

    static ChainClassDescriptor plain(Partition pi) { return ChainClassDescriptor(std::move(pi), Kind::plain, {}); }

    static ChainClassDescriptor single(Partition pi, int u, int v) {
        const int r = pi.block_count();
        if (u < 1 || u > r || v < 1 || v > r) throw UsageError("block numbers must lie in [1, r]");
        return ChainClassDescriptor(std::move(pi), Kind::single, {{u, v}});
    }

    /// R maps upper block numbers U onto lower block numbers V; every
    /// singleton block must lie in both U and V.
    static ChainClassDescriptor bijection(Partition pi, std::map<int, int> R) {
        const int r = pi.block_count();
        std::set<int> image;
        for (const auto& [u, v] : R) {
            if (u < 1 || u > r || v < 1 || v > r) throw UsageError("block numbers must lie in [1, r]");
            if (!image.insert(v).second) throw UsageError("correspondence is not injective");
        }
        for (int s : pi.singleton_blocks()) {
            if (!R.contains(s) || !image.contains(s)) {
                throw UsageError("bijection must cover every singleton block in its domain and image");
            }
        }
        return ChainClassDescriptor(std::move(pi), Kind::bijection, std::move(R));
    }

    const Partition& partition() const noexcept { return pi_; }
    Kind kind() const noexcept { return kind_; }
    const std::map<int, int>& correspondence() const noexcept { return R_; }

    std::string label() const {
        switch (kind_) {
            case Kind::plain: return "plain";
            case Kind::single: return "single(" + std::to_string(R_.begin()->first) + ";" + std::to_string(R_.begin()->second) + ")";
            case Kind::bijection: {
                std::string s = "bijection(";
                bool first = true;
                for (const auto& [u, v] : R_) {
                    s += (first ? "" : ";") + std::to_string(u) + "->" + std::to_string(v);
                    first = false;
                }
                return s + ")";
            }
        }
        return "?";
    }

private:
    ChainClassDescriptor(Partition pi, Kind kind, std::map<int, int> R)
        : pi_(std::move(pi)), kind_(kind), R_(std::move(R)) {}

    Partition pi_;
    Kind kind_;
    std::map<int, int> R_;
};

namespace detail {

// Membership test over precomputed pair ids; reps[b] is the first position
// (0-based) of block b (0-based).
struct ClassTester {
    const Partition& pi;
    std::vector<int> reps;
    std::vector<int> singles;  // 0-based singleton block numbers
    std::vector<std::pair<int, int>> required;

    explicit ClassTester(const ChainClassDescriptor& d) : pi(d.partition()) {
        for (const auto& b : pi.blocks()) reps.push_back(b.front() - 1);
        for (int s : pi.singleton_blocks()) singles.push_back(s - 1);
        for (const auto& [u, v] : d.correspondence()) required.emplace_back(u - 1, v - 1);
    }

    // up/low: pair ids per position of two walks that both have partition pi.
    bool operator()(std::span<const std::uint32_t> up, std::span<const std::uint32_t> low) const {
        const int r = pi.block_count();
        auto corresponds = [&](int u, int v) { return up[reps[u]] == low[reps[v]]; };
        if (singles.empty()) {
            bool any = false;
            for (int u = 0; u < r && !any; ++u) {
                for (int v = 0; v < r && !any; ++v) any = corresponds(u, v);
            }
            if (!any) return false;
        } else {
            for (int s : singles) {
                bool matched = false;
                for (int v = 0; v < r && !matched; ++v) matched = corresponds(s, v);
                if (!matched) return false;
            }
            for (int s : singles) {
                bool matched = false;
                for (int u = 0; u < r && !matched; ++u) matched = corresponds(u, s);
                if (!matched) return false;
            }
        }
        for (const auto& [u, v] : required) {
            if (!corresponds(u, v)) return false;
        }
        return true;
    }
};

inline std::vector<std::uint32_t> walk_pair_ids(const std::vector<int>& walk, int N) {
    std::vector<int> zero(walk.size());
    for (std::size_t a = 0; a < walk.size(); ++a) zero[a] = walk[a] - 1;
    std::vector<std::uint32_t> ids;
    cycle_pair_ids(zero, N, ids);
    return ids;
}

}  // namespace detail

/// Block u of the upper sub-chain corresponds to block v of the lower one.
inline bool blocks_correspond(const Chain& c, const Partition& pi, int u, int v) {
    const auto blocks = pi.blocks();
    return c.upper_pair(blocks.at(static_cast<std::size_t>(u - 1)).front()) ==
           c.lower_pair(blocks.at(static_cast<std::size_t>(v - 1)).front());
}

inline bool class_membership(const Chain& c, const ChainClassDescriptor& desc) {
    if (!chain_has_partition(c, desc.partition())) return false;
    int top = 0;
    for (int x : c.upper) top = std::max(top, x);
    for (int x : c.lower) top = std::max(top, x);
    const auto up = detail::walk_pair_ids(c.upper, top);
    const auto low = detail::walk_pair_ids(c.lower, top);
    return detail::ClassTester(desc)(up, low);
}

/// A_N(pi): walks in [N]^k (1-based) with pair pattern pi, lexicographic.
inline std::vector<std::vector<int>> walks_with_partition(const Partition& pi, int N) {
    require_cycle_budget(N, pi.k(), "walks_with_partition");
    std::vector<std::vector<int>> out;
    for_each_cycle(N, pi.k(), [&](std::span<const int> idx) {
        if (cycle_partition(idx) != pi) return;
        std::vector<int> w(idx.begin(), idx.end());
        for (int& x : w) ++x;
        out.push_back(std::move(w));
    });
    return out;
}

struct ClassEnumeration {
    std::uint64_t count = 0;
    std::vector<Chain> members;  // filled when listing was requested
};

/// Exhaustive count of the class among chains built from [N]; members are
/// listed in lexicographic (upper, lower) order.
inline ClassEnumeration enumerate_class(const ChainClassDescriptor& desc, int k, int N, bool list = false) {
    const Partition& pi = desc.partition();
    if (pi.k() != k) throw UsageError("descriptor partition is not a partition of [k]");
    if (N < 1) throw UsageError("N must be >= 1");
    require_pair_budget(N, k, "enumerate_class");
    const auto walks = walks_with_partition(pi, N);
    std::vector<std::vector<std::uint32_t>> ids;
    ids.reserve(walks.size());
    for (const auto& w : walks) ids.push_back(detail::walk_pair_ids(w, N));
    const detail::ClassTester tester(desc);
    ClassEnumeration out;
    for (std::size_t a = 0; a < walks.size(); ++a) {
        for (std::size_t b = 0; b < walks.size(); ++b) {
            if (!tester(ids[a], ids[b])) continue;
            ++out.count;
            if (list) out.members.emplace_back(walks[a], walks[b]);
        }
    }
    return out;
}

/// Every assignment of i_D and j_E is matched by at most one class member.
inline bool dof_witness_check(const ChainClassDescriptor& desc, int k, int N, const std::vector<int>& D,
                              const std::vector<int>& E) {
    if (D.empty()) throw UsageError("degrees-of-freedom witness needs a nonempty D");
    for (int a : D) {
        if (a < 1 || a > k) throw UsageError("D must be a subset of [k]");
    }
    for (int b : E) {
        if (b < 1 || b > k) throw UsageError("E must be a subset of [k]");
    }
    const auto members = enumerate_class(desc, k, N, true).members;
    std::set<std::vector<int>> seen;
    std::vector<int> key;
    for (const Chain& c : members) {
        key.clear();
        for (int a : D) key.push_back(c.upper[a - 1]);
        for (int b : E) key.push_back(c.lower[b - 1]);
        if (!seen.insert(key).second) return false;
    }
    return true;
}

struct DofWitness {
    ChainClassDescriptor descriptor;
    std::vector<int> D;
    std::vector<int> E;
    std::string construction;  // "A", "B1" or "B2"
};

namespace detail {

// Block (1-based) of the cyclic successor/predecessor of position a.
inline int next_pos(int a, int k) { return a % k + 1; }
inline int prev_pos(int a, int k) { return a == 1 ? k : a - 1; }

struct SingletonAnchor {
    int s_star = 0;  // singleton position whose predecessor lies in a block of size >= 2
    int u_star = 0;  // that block
    bool consecutive = false;
};

inline SingletonAnchor find_anchor(const Partition& pi) {
    const int k = pi.k();
    const auto sizes = pi.block_sizes();
    SingletonAnchor out;
    for (int s = k; s >= 1; --s) {
        const int b = pi.block_of(s);
        const int pb = pi.block_of(prev_pos(s, k));
        if (sizes[b - 1] == 1 && sizes[pb - 1] >= 2) {
            out.s_star = s;
            out.u_star = pb;
            break;
        }
    }
    if (out.s_star == 0) throw UsageError("partition needs both a singleton and a block of size >= 2");
    const auto blocks = pi.blocks();
    for (int a : blocks[out.u_star - 1]) {
        if (pi.block_of(next_pos(a, k)) == out.u_star) out.consecutive = true;
    }
    return out;
}

}  // namespace detail

/// The correspondences whose classes cover C_pi: all single (u, v) when pi
/// has no singleton, otherwise every bijection R : U -> V with U, V containing
/// the singleton blocks and each pair (u, R(u)) involving a singleton.
inline std::vector<ChainClassDescriptor> union_family(const Partition& pi) {
    const int r = pi.block_count();
    std::vector<ChainClassDescriptor> out;
    const auto singles = pi.singleton_blocks();
    if (singles.empty()) {
        for (int u = 1; u <= r; ++u) {
            for (int v = 1; v <= r; ++v) out.push_back(ChainClassDescriptor::single(pi, u, v));
        }
        return out;
    }
    std::vector<bool> is_single(static_cast<std::size_t>(r + 1), false);
    for (int s : singles) is_single[s] = true;
    std::map<int, int> R;
    std::vector<bool> used(static_cast<std::size_t>(r + 1), false);
    auto rec = [&](auto&& self, int u) -> void {
        if (u > r) {
            for (int s : singles) {
                if (!R.contains(s) || !used[s]) return;
            }
            out.push_back(ChainClassDescriptor::bijection(pi, R));
            return;
        }
        self(self, u + 1);  // u outside U
        for (int v = 1; v <= r; ++v) {
            if (used[v] || (!is_single[u] && !is_single[v])) continue;
            R[u] = v;
            used[v] = true;
            self(self, u + 1);
            used[v] = false;
            R.erase(u);
        }
    };
    rec(rec, 1);
    return out;
}

/// The sets D, E built in the counting argument, one per class of the
/// covering family: representatives are the first element of each block.
inline std::vector<DofWitness> proof_witnesses(const Partition& pi) {
    if (pi.all_singletons()) throw UsageError("partition must have a block of size >= 2");
    const int r = pi.block_count();
    const int k = pi.k();
    const auto blocks = pi.blocks();
    std::vector<int> rep(static_cast<std::size_t>(r + 1));
    for (int b = 1; b <= r; ++b) rep[b] = blocks[b - 1].front();
    const auto singles = pi.singleton_blocks();
    auto sorted = [](std::vector<int> v) {
        std::sort(v.begin(), v.end());
        return v;
    };

    std::vector<DofWitness> out;
    if (singles.empty()) {
        std::vector<int> D;
        for (int b = 1; b <= r; ++b) D.push_back(rep[b]);
        for (const auto& desc : union_family(pi)) {
            const int v = desc.correspondence().begin()->second;
            std::vector<int> E;
            for (int a : D) {
                if (a != rep[v]) E.push_back(a);
            }
            out.push_back({desc, sorted(D), sorted(E), "A"});
        }
        return out;
    }

    const auto anchor = detail::find_anchor(pi);
    std::vector<int> D;
    std::vector<int> E;
    std::string label;
    if (anchor.consecutive) {
        label = "B1";
        for (int b = 1; b <= r; ++b) D.push_back(rep[b]);
        for (int b = 1; b <= r; ++b) {
            if (b != anchor.u_star && blocks[b - 1].size() >= 2) E.push_back(rep[b]);
        }
    } else {
        label = "B2";
        int a_choice = 0;
        for (int a : blocks[anchor.u_star - 1]) {
            if (a != detail::prev_pos(anchor.s_star, k)) {
                a_choice = a;
                break;
            }
        }
        const int u_bar = pi.block_of(detail::next_pos(a_choice, k));
        for (int b = 1; b <= r; ++b) {
            if (b != u_bar) D.push_back(rep[b]);
        }
        for (int b = 1; b <= r; ++b) {
            if (b != u_bar && blocks[b - 1].size() >= 2) E.push_back(rep[b]);
        }
    }
    for (const auto& desc : union_family(pi)) out.push_back({desc, sorted(D), sorted(E), label});
    return out;
}

/// Pairs (i, j) of walks with pattern pi whose products have nonzero
/// covariance, as chains.
inline std::vector<Chain> nonvanishing_pairs(const EntryDistribution& dist, const Partition& pi, int k, int N) {
    if (pi.k() != k) throw UsageError("partition is not a partition of [k]");
    require_pair_budget(N, k, "nonvanishing_pairs");
    const auto walks = walks_with_partition(pi, N);
    std::vector<std::vector<std::uint32_t>> ids;
    std::vector<double> means;
    for (const auto& w : walks) {
        ids.push_back(detail::walk_pair_ids(w, N));
        std::map<IndexPoint, int> ms;
        for (std::uint32_t id : ids.back()) ++ms[pair_point(id, N)];
        means.push_back(product_expectation(dist, ms));
    }
    std::vector<Chain> out;
    for (std::size_t a = 0; a < walks.size(); ++a) {
        for (std::size_t b = 0; b < walks.size(); ++b) {
            std::map<IndexPoint, int> ms;
            for (std::uint32_t id : ids[a]) ++ms[pair_point(id, N)];
            for (std::uint32_t id : ids[b]) ++ms[pair_point(id, N)];
            const double cov = product_expectation(dist, ms) - means[a] * means[b];
            if (std::abs(cov) > 1e-12) out.emplace_back(walks[a], walks[b]);
        }
    }
    return out;
}

}  // namespace tracefluct
