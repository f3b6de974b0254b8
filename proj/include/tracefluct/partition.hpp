#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "tracefluct/error.hpp"

namespace tracefluct {

/// Set partition of [k] as a restricted-growth string: label[0] = 0 and each
/// label exceeds the previous maximum by at most one. Blocks are numbered by
/// first occurrence, so block u (1-based) is the u-th block met scanning 1..k.
class Partition {
public:
    Partition() = default;

    explicit Partition(std::vector<int> rgs) : labels_(std::move(rgs)) {
        int top = -1;
        for (int l : labels_) {
            if (l < 0 || l > top + 1) throw UsageError("not a restricted-growth string: " + rgs_string());
            if (l > 9) throw UsageError("partitions are limited to at most 10 blocks");
            top = std::max(top, l);
        }
        blocks_ = top + 1;
    }

    /// Blocks given as lists of 1-based positions, in any order.
    static Partition from_blocks(int k, const std::vector<std::vector<int>>& blocks) {
        if (k < 1) throw UsageError("partition ground set must be nonempty");
        std::vector<int> owner(static_cast<std::size_t>(k), -1);
        for (std::size_t b = 0; b < blocks.size(); ++b) {
            if (blocks[b].empty()) throw UsageError("partition blocks must be nonempty");
            for (int x : blocks[b]) {
                if (x < 1 || x > k) throw UsageError("block element out of [1, k]");
                if (owner[x - 1] != -1) throw UsageError("blocks overlap");
                owner[x - 1] = static_cast<int>(b);
            }
        }
        if (std::find(owner.begin(), owner.end(), -1) != owner.end()) {
            throw UsageError("blocks do not cover [k]");
        }
        return from_labels(owner);
    }

    /// Canonicalizes an arbitrary labelling of positions.
    static Partition from_labels(const std::vector<int>& labels) {
        std::vector<int> rgs(labels.size());
        std::vector<std::pair<int, int>> seen;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            auto it = std::find_if(seen.begin(), seen.end(),
                                   [&](const auto& s) { return s.first == labels[i]; });
            if (it == seen.end()) {
                seen.emplace_back(labels[i], static_cast<int>(seen.size()));
                rgs[i] = seen.back().second;
            } else {
                rgs[i] = it->second;
            }
        }
        return Partition(std::move(rgs));
    }

    static Partition one_block(int k) { return Partition(std::vector<int>(static_cast<std::size_t>(k), 0)); }

    static Partition singletons(int k) {
        std::vector<int> rgs(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) rgs[i] = i;
        return Partition(std::move(rgs));
    }

    int k() const noexcept { return static_cast<int>(labels_.size()); }
    int block_count() const noexcept { return blocks_; }
    const std::vector<int>& labels() const noexcept { return labels_; }

    /// 1-based block number of 1-based position a.
    int block_of(int a) const { return labels_.at(static_cast<std::size_t>(a - 1)) + 1; }

    /// Blocks as sorted 1-based positions, in first-occurrence order.
    std::vector<std::vector<int>> blocks() const {
        std::vector<std::vector<int>> out(static_cast<std::size_t>(blocks_));
        for (int a = 0; a < k(); ++a) out[labels_[a]].push_back(a + 1);
        return out;
    }

    std::vector<int> block_sizes() const {
        std::vector<int> sizes(static_cast<std::size_t>(blocks_), 0);
        for (int l : labels_) ++sizes[l];
        return sizes;
    }

    /// 1-based numbers of the one-element blocks.
    std::vector<int> singleton_blocks() const {
        std::vector<int> out;
        const auto sizes = block_sizes();
        for (int b = 0; b < blocks_; ++b) {
            if (sizes[b] == 1) out.push_back(b + 1);
        }
        return out;
    }

    bool all_singletons() const noexcept { return blocks_ == k(); }
    bool has_block_of_size_two_or_more() const noexcept { return !all_singletons(); }

    std::string rgs_string() const {
        std::string s;
        for (int l : labels_) s += std::to_string(l);
        return s;
    }

    std::string block_string() const {
        std::string s = "{";
        bool first_block = true;
        for (const auto& b : blocks()) {
            s += first_block ? "{" : ",{";
            first_block = false;
            for (std::size_t i = 0; i < b.size(); ++i) s += (i ? "," : "") + std::to_string(b[i]);
            s += "}";
        }
        return s + "}";
    }

    auto operator<=>(const Partition& o) const { return labels_ <=> o.labels_; }
    bool operator==(const Partition& o) const { return labels_ == o.labels_; }

private:
    std::vector<int> labels_;
    int blocks_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, const Partition& p) { return os << p.block_string(); }

enum class PartitionFamily { all, Q };

/// All partitions of [k] in lexicographic RGS order; Q drops the
/// all-singletons partition.
inline std::vector<Partition> enumerate_partitions(int k, PartitionFamily family = PartitionFamily::all) {
    if (k < 2 || k > 8) throw UsageError("enumerate_partitions: k must lie in [2, 8], got " + std::to_string(k));
    std::vector<Partition> out;
    std::vector<int> rgs(static_cast<std::size_t>(k), 0);
    auto rec = [&](auto&& self, int pos, int top) -> void {
        if (pos == k) {
            Partition p(rgs);
            if (family == PartitionFamily::all || !p.all_singletons()) out.push_back(std::move(p));
            return;
        }
        for (int l = 0; l <= top + 1; ++l) {
            rgs[pos] = l;
            self(self, pos + 1, std::max(top, l));
        }
    };
    rec(rec, 1, 0);
    return out;
}

}  // namespace tracefluct
