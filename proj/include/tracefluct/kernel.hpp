#pragma once

// Finite-support kernels over the index set of matrix coordinates: symmetric
// kernels vanishing on diagonals, their homogeneous sums, contractions,
// influences and norms.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <cstddef>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tracefluct/error.hpp"
#include "tracefluct/index_point.hpp"

namespace tracefluct {

namespace detail {

inline double factorial(int n) {
    double r = 1.0;
    for (int i = 2; i <= n; ++i) r *= i;
    return r;
}

inline bool has_repeat(std::span<const IndexPoint> t) {
    PointTuple s(t.begin(), t.end());
    std::sort(s.begin(), s.end());
    return std::adjacent_find(s.begin(), s.end()) != s.end();
}

// Calls fn(arrangement) once per permutation of positions of t (m! calls,
// repeated points included).
template <class Fn>
void for_each_position_permutation(const PointTuple& t, Fn&& fn) {
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    PointTuple arranged(t.size());
    do {
        for (std::size_t i = 0; i < idx.size(); ++i) arranged[i] = t[idx[i]];
        fn(arranged);
    } while (std::next_permutation(idx.begin(), idx.end()));
}

inline std::string format_tuple(std::span<const IndexPoint> t) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < t.size(); ++i) os << (i ? "," : "") << t[i];
    os << ']';
    return os.str();
}

}  // namespace detail

/// Symmetric kernel of order k >= 1 vanishing on diagonals, stored once per
/// unordered support (sorted, duplicate-free k-tuple) with its symmetric value.
/// Immutable after construction.
class SymmetricKernel {
public:
    using Storage = std::map<PointTuple, double>;

    explicit SymmetricKernel(int order) : order_(order) {
        if (order < 1) throw UsageError("kernel order must be >= 1");
    }

    // Keys may list their points in any order; they are canonicalized. A key
    // with a repeated point, a wrong arity, or two keys with the same point set
    // is rejected. Zero values are dropped.
    SymmetricKernel(int order, const Storage& entries) : SymmetricKernel(order) {
        for (const auto& [key, value] : entries) {
            if (static_cast<int>(key.size()) != order_) {
                throw UsageError("kernel entry " + detail::format_tuple(key) + " has arity " +
                                 std::to_string(key.size()) + ", expected " +
                                 std::to_string(order_));
            }
            PointTuple canonical = key;
            std::sort(canonical.begin(), canonical.end());
            if (std::adjacent_find(canonical.begin(), canonical.end()) != canonical.end()) {
                throw UsageError("kernel entry " + detail::format_tuple(key) +
                                 " repeats a point; kernels vanish on diagonals");
            }
            if (value == 0.0) continue;
            auto [it, inserted] = entries_.emplace(std::move(canonical), value);
            if (!inserted) {
                throw UsageError("kernel support " + detail::format_tuple(it->first) +
                                 " given twice");
            }
        }
    }

    int order() const noexcept { return order_; }
    const Storage& entries() const noexcept { return entries_; }
    std::size_t support_size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    double operator()(std::span<const IndexPoint> t) const {
        if (static_cast<int>(t.size()) != order_) {
            throw UsageError("evaluate: tuple of length " + std::to_string(t.size()) +
                             " for kernel of order " + std::to_string(order_));
        }
        PointTuple key(t.begin(), t.end());
        std::sort(key.begin(), key.end());
        if (std::adjacent_find(key.begin(), key.end()) != key.end()) return 0.0;
        auto it = entries_.find(key);
        return it == entries_.end() ? 0.0 : it->second;
    }

    SymmetricKernel scaled(double factor) const {
        SymmetricKernel out(order_);
        if (factor == 0.0) return out;
        for (const auto& [key, value] : entries_) out.entries_.emplace(key, value * factor);
        return out;
    }

private:
    int order_;
    Storage entries_;
};

/// Kernel on ordered m-tuples (m >= 0), e.g. a contraction. Order 0 holds a
/// single scalar under the empty key. symmetric_flag records that the kernel
/// was produced by symmetrization; is_symmetric() verifies it.
class OrderedKernel {
public:
    using Storage = std::map<PointTuple, double>;

    OrderedKernel(int order, Storage entries, bool symmetric_flag = false)
        : order_(order), entries_(std::move(entries)), symmetric_flag_(symmetric_flag) {
        if (order < 0) throw UsageError("ordered kernel order must be >= 0");
        for (const auto& [key, value] : entries_) {
            if (static_cast<int>(key.size()) != order_) {
                throw UsageError("ordered kernel entry " + detail::format_tuple(key) +
                                 " has wrong arity");
            }
        }
    }

    int order() const noexcept { return order_; }
    const Storage& entries() const noexcept { return entries_; }
    bool symmetric_flag() const noexcept { return symmetric_flag_; }

    double operator()(std::span<const IndexPoint> t) const {
        if (static_cast<int>(t.size()) != order_) {
            throw UsageError("evaluate: tuple of length " + std::to_string(t.size()) +
                             " for ordered kernel of order " + std::to_string(order_));
        }
        auto it = entries_.find(PointTuple(t.begin(), t.end()));
        return it == entries_.end() ? 0.0 : it->second;
    }

    double scalar() const {
        if (order_ != 0) throw UsageError("scalar() requires an order-0 kernel");
        auto it = entries_.find(PointTuple{});
        return it == entries_.end() ? 0.0 : it->second;
    }

    // Checks permutation invariance entry by entry (absolute tolerance).
    bool is_symmetric(double tol = 1e-12) const {
        bool ok = true;
        for (const auto& [key, value] : entries_) {
            detail::for_each_position_permutation(key, [&](const PointTuple& p) {
                if (ok && std::abs((*this)(p)-value) > tol) ok = false;
            });
            if (!ok) return false;
        }
        return true;
    }

private:
    int order_;
    Storage entries_;
    bool symmetric_flag_;
};

inline double evaluate(const SymmetricKernel& f, std::span<const IndexPoint> t) { return f(t); }
inline double evaluate(const OrderedKernel& g, std::span<const IndexPoint> t) { return g(t); }

/// Sum of squares over all ordered tuples: k! * sum of squared stored values.
inline double norm_sq(const SymmetricKernel& f) {
    double s = 0.0;
    for (const auto& [key, value] : f.entries()) s += value * value;
    return detail::factorial(f.order()) * s;
}

inline double norm_sq(const OrderedKernel& g) {
    double s = 0.0;
    for (const auto& [key, value] : g.entries()) s += value * value;
    return s;
}

/// Values {Y_a} for finitely many index points.
class SampleAssignment {
public:
    SampleAssignment() = default;
    explicit SampleAssignment(std::map<IndexPoint, double> values) : values_(std::move(values)) {}

    void set(IndexPoint p, double v) { values_[p] = v; }
    const double* find(IndexPoint p) const {
        auto it = values_.find(p);
        return it == values_.end() ? nullptr : &it->second;
    }
    const std::map<IndexPoint, double>& values() const noexcept { return values_; }

private:
    std::map<IndexPoint, double> values_;
};

template <class A>
concept Assignment = requires(const A& a, IndexPoint p) {
    { a.find(p) } -> std::convertible_to<const double*>;
};

/// Q_k(f, Y) = sum over ordered tuples of f * prod Y, accumulated once per
/// canonical support with weight k!.
template <Assignment A>
double homogeneous_sum(const SymmetricKernel& f, const A& y) {
    const double weight = detail::factorial(f.order());
    double total = 0.0;
    for (const auto& [key, value] : f.entries()) {
        double prod = value;
        for (const IndexPoint& p : key) {
            const double* v = y.find(p);
            if (v == nullptr) {
                std::ostringstream os;
                os << "homogeneous_sum: no value assigned to " << p;
                throw UsageError(os.str());
            }
            prod *= *v;
        }
        total += prod;
    }
    return weight * total;
}

namespace detail {

// Every ordered arrangement of every canonical support, in sorted-key order.
inline std::vector<std::pair<PointTuple, double>> ordered_expansion(const SymmetricKernel& f) {
    std::vector<std::pair<PointTuple, double>> out;
    out.reserve(f.support_size() * static_cast<std::size_t>(factorial(f.order())));
    for (const auto& [key, value] : f.entries()) {
        PointTuple t = key;
        do {
            out.emplace_back(t, value);
        } while (std::next_permutation(t.begin(), t.end()));
    }
    return out;
}

}  // namespace detail

/// f ⋆_r g: pairs the trailing r arguments of f with those of g. The result
/// has order f.order() + g.order() - 2r, first the leading block of f then
/// that of g. Computed by bucketing g's ordered expansion on its trailing
/// r-tuple and joining.
inline OrderedKernel contract(const SymmetricKernel& f, const SymmetricKernel& g, int r) {
    const int k = f.order();
    const int l = g.order();
    if (r < 0 || r > std::min(k, l)) {
        throw UsageError("contract: r = " + std::to_string(r) + " outside [0, " +
                         std::to_string(std::min(k, l)) + "]");
    }
    const auto fo = detail::ordered_expansion(f);
    const auto go = detail::ordered_expansion(g);

    std::map<PointTuple, std::vector<std::size_t>> buckets;
    for (std::size_t i = 0; i < go.size(); ++i) {
        const PointTuple& t = go[i].first;
        buckets[PointTuple(t.end() - r, t.end())].push_back(i);
    }

    OrderedKernel::Storage out;
    PointTuple key;
    key.reserve(static_cast<std::size_t>(k + l - 2 * r));
    for (const auto& [ft, fv] : fo) {
        auto it = buckets.find(PointTuple(ft.end() - r, ft.end()));
        if (it == buckets.end()) continue;
        for (std::size_t gi : it->second) {
            const auto& [gt, gv] = go[gi];
            key.assign(ft.begin(), ft.end() - r);
            key.insert(key.end(), gt.begin(), gt.end() - r);
            out[key] += fv * gv;
        }
    }
    std::erase_if(out, [](const auto& kv) { return kv.second == 0.0; });
    return OrderedKernel(k + l - 2 * r, std::move(out));
}

/// Average over all argument permutations. Idempotent.
inline OrderedKernel symmetrize(const OrderedKernel& g) {
    const int m = g.order();
    if (m <= 1) return OrderedKernel(m, g.entries(), true);
    const double w = 1.0 / detail::factorial(m);
    OrderedKernel::Storage out;
    for (const auto& [key, value] : g.entries()) {
        detail::for_each_position_permutation(key, [&](const PointTuple& p) { out[p] += w * value; });
    }
    std::erase_if(out, [](const auto& kv) { return kv.second == 0.0; });
    return OrderedKernel(m, std::move(out), true);
}

/// Inf_a(f) = sum over unordered completions {a_2..a_k} of f(a, a_2, ..., a_k)^2,
/// i.e. the squared stored values of the supports that contain a.
inline double influence(const SymmetricKernel& f, IndexPoint a) {
    double s = 0.0;
    for (const auto& [key, value] : f.entries()) {
        if (std::binary_search(key.begin(), key.end(), a)) s += value * value;
    }
    return s;
}

/// All nonzero influences in one pass.
inline std::map<IndexPoint, double> influences(const SymmetricKernel& f) {
    std::map<IndexPoint, double> out;
    for (const auto& [key, value] : f.entries()) {
        for (const IndexPoint& p : key) out[p] += value * value;
    }
    return out;
}

inline double max_influence(const SymmetricKernel& f) {
    double m = 0.0;
    for (const auto& [p, v] : influences(f)) m = std::max(m, v);
    return m;
}

/// ||f ⋆_s f|| for s = 0..k. The endpoints equal ||f||^2; interior values use
/// whichever of s, k - s leaves the smaller contraction to materialize, the two
/// norms being equal for symmetric f.
inline double contraction_norm(const SymmetricKernel& f, int s) {
    const int k = f.order();
    if (s < 0 || s > k) throw UsageError("contraction_norm: s out of range");
    if (s == 0 || s == k) return norm_sq(f);
    return std::sqrt(norm_sq(contract(f, f, std::max(s, k - s))));
}

/// r -> ||f ⋆_r f||_{2k-2r} for r = 1..k-1.
inline std::map<int, double> contraction_profile(const SymmetricKernel& f) {
    if (f.order() < 2) throw UsageError("contraction_profile requires order >= 2");
    std::map<int, double> out;
    for (int r = 1; r < f.order(); ++r) out[r] = contraction_norm(f, r);
    return out;
}

// CSV form: "order,<k>" then one row per canonical support:
// row_1,col_1,...,row_k,col_k,value
inline void write_kernel_csv(std::ostream& os, const SymmetricKernel& f) {
    os << "order," << f.order() << '\n';
    char buf[64];
    for (const auto& [key, value] : f.entries()) {
        for (const IndexPoint& p : key) os << p.row() << ',' << p.col() << ',';
        std::snprintf(buf, sizeof buf, "%.17g", value);
        os << buf << '\n';
    }
}

inline SymmetricKernel read_kernel_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("order,", 0) != 0) {
        throw UsageError("kernel CSV: first line must be 'order,<k>'");
    }
    int k = 0;
    try {
        k = std::stoi(line.substr(6));
    } catch (const std::exception&) {
        throw UsageError("kernel CSV: bad order line '" + line + "'");
    }
    SymmetricKernel::Storage entries;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) fields.push_back(cell);
        if (fields.size() != static_cast<std::size_t>(2 * k + 1)) {
            throw UsageError("kernel CSV line " + std::to_string(lineno) + ": expected " +
                             std::to_string(2 * k + 1) + " fields");
        }
        PointTuple key;
        try {
            for (int a = 0; a < k; ++a) {
                key.emplace_back(std::stoi(fields[2 * a]), std::stoi(fields[2 * a + 1]));
            }
            double v = std::stod(fields.back());
            if (!entries.emplace(std::move(key), v).second) {
                throw UsageError("kernel CSV line " + std::to_string(lineno) + ": duplicate support");
            }
        } catch (const UsageError&) {
            throw;
        } catch (const std::exception&) {
            throw UsageError("kernel CSV line " + std::to_string(lineno) + ": not numeric");
        }
    }
    return SymmetricKernel(k, entries);
}

}  // namespace tracefluct
