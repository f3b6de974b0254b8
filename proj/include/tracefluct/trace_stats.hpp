#pragma once

// Traces of powers of X_N = N^{-1/2} (X_ij), their split into the part
// carried by cycles with distinct pairs and a remainder, the kernels f_{k,N}
// and exact finite-N variances.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tracefluct/cycle.hpp"
#include "tracefluct/distribution.hpp"
#include "tracefluct/error.hpp"
#include "tracefluct/kernel.hpp"
#include "tracefluct/partition.hpp"

namespace tracefluct {

enum class TraceMethod { matrix, cycles };

namespace detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMatrix> as_matrix(const MatrixSample& s) {
    return Eigen::Map<const RowMatrix>(s.entries.data(), s.N, s.N);
}

inline double cycle_product(const MatrixSample& s, std::span<const int> idx) {
    const std::size_t k = idx.size();
    double p = 1.0;
    for (std::size_t a = 0; a < k; ++a) {
        p *= s.entries[static_cast<std::size_t>(idx[a]) * s.N + idx[(a + 1) % k]];
    }
    return p;
}

// Sorts ids in place.
inline double expected_product(const EntryDistribution& dist, std::span<std::uint32_t> ids) {
    std::sort(ids.begin(), ids.end());
    double v = 1.0;
    for (std::size_t a = 0; a < ids.size();) {
        std::size_t b = a;
        while (b < ids.size() && ids[b] == ids[a]) ++b;
        const int m = static_cast<int>(b - a);
        if (m > dist.max_moment()) {
            throw UsageError("multiplicity " + std::to_string(m) + " exceeds the moment table");
        }
        v *= dist.moment(m);
        if (v == 0.0) return 0.0;
        a = b;
    }
    return v;
}

}  // namespace detail

/// Tr(X_N^k) for each requested order, from successive matrix products.
inline std::vector<double> trace_powers(const MatrixSample& s, std::span<const int> orders) {
    std::vector<double> out(orders.size(), 0.0);
    if (orders.empty()) return out;
    int top = 0;
    for (int k : orders) {
        if (k < 1) throw UsageError("trace order must be >= 1");
        top = std::max(top, k);
    }
    const detail::RowMatrix a = detail::as_matrix(s) / std::sqrt(static_cast<double>(s.N));
    std::map<int, double> traces;
    traces[1] = a.trace();
    if (top >= 2) {
        detail::RowMatrix p = a;
        for (int k = 2; k <= top; ++k) {
            // Tr(P A) without forming the last product
            traces[k] = p.cwiseProduct(a.transpose()).sum();
            if (k < top) p = (p * a).eval();
        }
    }
    for (std::size_t j = 0; j < orders.size(); ++j) out[j] = traces[orders[j]];
    return out;
}

inline double trace_power(const MatrixSample& s, int k, TraceMethod method = TraceMethod::matrix) {
    if (k < 1) throw UsageError("trace order must be >= 1");
    if (method == TraceMethod::matrix) {
        const int o[] = {k};
        return trace_powers(s, o)[0];
    }
    require_cycle_budget(s.N, k, "trace_power(cycles)");
    double sum = 0.0;
    for_each_cycle(s.N, k, [&](std::span<const int> idx) { sum += detail::cycle_product(s, idx); });
    return sum * std::pow(static_cast<double>(s.N), -0.5 * k);
}

/// Exact E[Tr(X_N^k)] by summing the factorized expectation of every cycle.
inline double expected_trace(const EntryDistribution& dist, int N, int k) {
    if (k < 1) throw UsageError("trace order must be >= 1");
    require_cycle_budget(N, k, "expected_trace");
    double sum = 0.0;
    std::vector<std::uint32_t> ids;
    for_each_cycle(N, k, [&](std::span<const int> idx) {
        cycle_pair_ids(idx, N, ids);
        sum += detail::expected_product(dist, ids);
    });
    return sum * std::pow(static_cast<double>(N), -0.5 * k);
}

struct TraceDecomposition {
    double trace = 0.0;      // Tr(X_N^k)
    double expected = 0.0;   // E[Tr(X_N^k)]
    double d_part = 0.0;     // sum over cycles with distinct pairs
    double remainder = 0.0;  // other cycles, centered
};

inline TraceDecomposition decompose_trace(const MatrixSample& s, const EntryDistribution& dist, int k) {
    require_cycle_budget(s.N, k, "decompose_trace");
    double d = 0.0;
    double rest = 0.0;
    for_each_cycle(s.N, k, [&](std::span<const int> idx) {
        const double p = detail::cycle_product(s, idx);
        if (all_pairs_distinct(idx)) {
            d += p;
        } else {
            rest += p;
        }
    });
    const double scale = std::pow(static_cast<double>(s.N), -0.5 * k);
    TraceDecomposition out;
    out.expected = expected_trace(dist, s.N, k);
    out.d_part = d * scale;
    out.remainder = rest * scale - out.expected;
    out.trace = trace_power(s, k, TraceMethod::matrix);
    return out;
}

/// The symmetric kernel f_{k,N} whose homogeneous sum is the distinct-pair
/// part of Tr(X_N^k): value at a pair set = (#cycles with that pair set)
/// * N^{-k/2} / k!.
inline SymmetricKernel build_kernel_fkN(int k, int N) {
    if (k < 2) throw UsageError("build_kernel_fkN: k must be >= 2");
    if (N < 1) throw UsageError("build_kernel_fkN: N must be >= 1");
    require_cycle_budget(N, k, "build_kernel_fkN");
    std::map<std::vector<std::uint32_t>, int> counts;
    std::vector<std::uint32_t> ids;
    for_each_cycle(N, k, [&](std::span<const int> idx) {
        if (!all_pairs_distinct(idx)) return;
        cycle_pair_ids(idx, N, ids);
        std::sort(ids.begin(), ids.end());
        ++counts[ids];
    });
    const double unit = std::pow(static_cast<double>(N), -0.5 * k) / detail::factorial(k);
    SymmetricKernel::Storage entries;
    for (const auto& [key, c] : counts) {
        PointTuple t;
        t.reserve(key.size());
        for (std::uint32_t id : key) t.push_back(pair_point(id, N));
        entries.emplace(std::move(t), c * unit);
    }
    return SymmetricKernel(k, entries);
}

/// Flat form of a kernel for repeated evaluation against N x N samples.
class CompiledKernel {
public:
    CompiledKernel(const SymmetricKernel& f, int N) : order_(f.order()), N_(N) {
        const double w = detail::factorial(f.order());
        ids_.reserve(f.support_size() * static_cast<std::size_t>(order_));
        weights_.reserve(f.support_size());
        for (const auto& [key, value] : f.entries()) {
            for (const IndexPoint& p : key) {
                if (p.row() > N || p.col() > N) throw UsageError("kernel support exceeds the N x N index set");
                ids_.push_back(pair_id(p.row() - 1, p.col() - 1, N));
            }
            weights_.push_back(w * value);
        }
    }

    int order() const noexcept { return order_; }
    int N() const noexcept { return N_; }

    /// Q_k(f, X) for the sample's raw entries.
    double operator()(const MatrixSample& s) const {
        if (s.N != N_) throw UsageError("compiled kernel built for a different N");
        const double* x = s.entries.data();
        const std::uint32_t* id = ids_.data();
        double total = 0.0;
        for (double w : weights_) {
            double p = w;
            for (int a = 0; a < order_; ++a) p *= x[*id++];
            total += p;
        }
        return total;
    }

private:
    int order_;
    int N_;
    std::vector<std::uint32_t> ids_;
    std::vector<double> weights_;
};

/// Obtains the distinct-pair part from a trace value by subtracting the
/// (few) cycles with a repeated pair.
class DPartExtractor {
public:
    DPartExtractor(int N, int k) : N_(N), k_(k), scale_(std::pow(static_cast<double>(N), -0.5 * k)) {
        if (k < 1) throw UsageError("trace order must be >= 1");
        require_cycle_budget(N, k, "DPartExtractor");
        std::vector<std::uint32_t> ids;
        for_each_cycle(N, k, [&](std::span<const int> idx) {
            if (all_pairs_distinct(idx)) return;
            cycle_pair_ids(idx, N, ids);
            ids_.insert(ids_.end(), ids.begin(), ids.end());
        });
    }

    std::size_t non_distinct_cycles() const noexcept { return k_ ? ids_.size() / k_ : 0; }

    /// N^{-k/2} * sum of the products over cycles with a repeated pair.
    double non_distinct_sum(const MatrixSample& s) const {
        const double* x = s.entries.data();
        double total = 0.0;
        for (std::size_t c = 0; c < ids_.size(); c += k_) {
            double p = 1.0;
            for (int a = 0; a < k_; ++a) p *= x[ids_[c + a]];
            total += p;
        }
        return total * scale_;
    }

    double d_part(const MatrixSample& s, double trace) const { return trace - non_distinct_sum(s); }

private:
    int N_;
    int k_;
    double scale_;
    std::vector<std::uint32_t> ids_;
};

enum class VariancePart { full, d_part, remainder };

inline const char* to_string(VariancePart p) {
    switch (p) {
        case VariancePart::full: return "full";
        case VariancePart::d_part: return "d_part";
        case VariancePart::remainder: return "remainder";
    }
    return "?";
}

inline VariancePart parse_variance_part(const std::string& s) {
    if (s == "full") return VariancePart::full;
    if (s == "d_part") return VariancePart::d_part;
    if (s == "remainder") return VariancePart::remainder;
    throw UsageError("unknown variance part '" + s + "' (expected full, d_part or remainder)");
}

namespace detail {

// Var(N^{-k/2} sum_{i in S} prod X) for S = cycles accepted by keep(idx),
// summing exact covariances over pairs of cycles sharing at least one pair
// (the rest are independent).
template <class Keep>
double subset_variance(const EntryDistribution& dist, int N, int k, Keep&& keep) {
    std::vector<std::uint32_t> flat;
    std::vector<double> means;
    std::vector<std::uint32_t> ids;
    for_each_cycle(N, k, [&](std::span<const int> idx) {
        if (!keep(idx)) return;
        cycle_pair_ids(idx, N, ids);
        std::sort(ids.begin(), ids.end());
        flat.insert(flat.end(), ids.begin(), ids.end());
        means.push_back(expected_product(dist, ids));
    });
    const std::size_t n = means.size();
    std::vector<std::vector<std::uint32_t>> by_pair(static_cast<std::size_t>(N) * N);
    for (std::size_t c = 0; c < n; ++c) {
        for (int a = 0; a < k; ++a) {
            const std::uint32_t id = flat[c * k + a];
            if (a > 0 && flat[c * k + a - 1] == id) continue;
            by_pair[id].push_back(static_cast<std::uint32_t>(c));
        }
    }
    std::vector<std::uint32_t> partners;
    std::vector<std::uint32_t> joint(static_cast<std::size_t>(2 * k));
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        partners.clear();
        for (int a = 0; a < k; ++a) {
            const auto& list = by_pair[flat[c * k + a]];
            partners.insert(partners.end(), list.begin(), list.end());
        }
        std::sort(partners.begin(), partners.end());
        partners.erase(std::unique(partners.begin(), partners.end()), partners.end());
        double row = 0.0;
        for (std::uint32_t d : partners) {
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(c * k), k, joint.begin());
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(d * k), k, joint.begin() + k);
            row += expected_product(dist, joint) - means[c] * means[d];
        }
        total += row;
    }
    return total * std::pow(static_cast<double>(N), -static_cast<double>(k));
}

}  // namespace detail

/// Exact variance of the whole trace, of its distinct-pair part, or of the
/// remainder (all cycles with a repeated pair taken together).
inline double exact_variance(const EntryDistribution& dist, int N, int k, VariancePart part) {
    if (k < 1) throw UsageError("trace order must be >= 1");
    if (N < 1) throw UsageError("N must be >= 1");
    require_pair_budget(N, k, "exact_variance");
    switch (part) {
        case VariancePart::full:
            return detail::subset_variance(dist, N, k, [](std::span<const int>) { return true; });
        case VariancePart::d_part:
            return detail::subset_variance(dist, N, k, [](std::span<const int> i) { return all_pairs_distinct(i); });
        case VariancePart::remainder:
            return detail::subset_variance(dist, N, k, [](std::span<const int> i) { return !all_pairs_distinct(i); });
    }
    return 0.0;
}

/// Var(N^{-k/2} sum over cycles with pair pattern pi) for each pi with a
/// repeated pair.
inline std::map<Partition, double> remainder_variance_by_partition(const EntryDistribution& dist, int N, int k) {
    require_pair_budget(N, k, "remainder_variance_by_partition");
    std::map<Partition, double> out;
    if (k < 2) return out;
    for (const Partition& pi : enumerate_partitions(k, PartitionFamily::Q)) {
        out[pi] = detail::subset_variance(dist, N, k, [&](std::span<const int> i) { return cycle_partition(i) == pi; });
    }
    return out;
}

/// Gaussian variance of the distinct-pair part as N^{-k} times the number of
/// (i, j, sigma) with i, j distinct-pair cycles and (i_s, i_{s+1}) =
/// (j_{sigma(s)}, j_{sigma(s)+1}) for all s.
inline double gaussian_dpart_variance_permutation_form(int N, int k) {
    if (k < 1) throw UsageError("trace order must be >= 1");
    require_pair_budget(N, k, "gaussian_dpart_variance_permutation_form");
    std::vector<int> sigma(static_cast<std::size_t>(k));
    std::vector<int> j(static_cast<std::size_t>(k));
    double count = 0.0;
    for_each_cycle(N, k, [&](std::span<const int> i) {
        if (!all_pairs_distinct(i)) return;
        for (int s = 0; s < k; ++s) sigma[s] = s;
        do {
            for (int s = 0; s < k; ++s) j[sigma[s]] = i[s];
            bool ok = true;
            for (int s = 0; s < k && ok; ++s) ok = j[(sigma[s] + 1) % k] == i[(s + 1) % k];
            if (ok && all_pairs_distinct(j)) count += 1.0;
        } while (std::next_permutation(sigma.begin(), sigma.end()));
    });
    return count * std::pow(static_cast<double>(N), -static_cast<double>(k));
}

struct Centering {
    enum class Mode { exact, empirical, automatic };
    Mode mode = Mode::automatic;
    std::vector<double> means;   // per order; exact values are filled in on demand
    std::vector<double> scales;  // optional variances to standardize by
};

/// Exact means for every order (enumeration budget permitting).
inline Centering exact_centering(const EntryDistribution& dist, int N, std::span<const int> orders) {
    Centering c;
    c.mode = Centering::Mode::exact;
    for (int k : orders) c.means.push_back(expected_trace(dist, N, k));
    return c;
}

struct FluctuationVector {
    std::vector<int> orders;
    std::vector<double> values;
    bool standardized = false;
};

inline FluctuationVector fluctuation_vector(const MatrixSample& s, const EntryDistribution& dist,
                                            std::span<const int> orders, const Centering& centering) {
    FluctuationVector out;
    out.orders.assign(orders.begin(), orders.end());
    for (std::size_t j = 1; j < orders.size(); ++j) {
        if (orders[j] <= orders[j - 1]) throw UsageError("orders must be strictly increasing");
    }
    std::vector<double> means = centering.means;
    if (means.size() != orders.size()) {
        if (!means.empty()) throw UsageError("centering means do not match the number of orders");
        bool affordable = true;
        for (int k : orders) affordable = affordable && int_pow(s.N, k) <= cycle_budget;
        switch (centering.mode) {
            case Centering::Mode::empirical:
                throw UsageError("empirical centering requires trial means");
            case Centering::Mode::exact:
                for (int k : orders) means.push_back(expected_trace(dist, s.N, k));
                break;
            case Centering::Mode::automatic:
                if (!affordable) {
                    throw UsageError("no centering available: exact means exceed the enumeration "
                                     "limit and no trial means were supplied");
                }
                for (int k : orders) means.push_back(expected_trace(dist, s.N, k));
                break;
        }
    }
    out.values = trace_powers(s, orders);
    for (std::size_t j = 0; j < orders.size(); ++j) out.values[j] -= means[j];
    if (!centering.scales.empty()) {
        if (centering.scales.size() != orders.size()) throw UsageError("scales do not match the number of orders");
        for (std::size_t j = 0; j < orders.size(); ++j) {
            if (!(centering.scales[j] > 0.0)) throw UsageError("standardizing variance must be positive");
            out.values[j] /= std::sqrt(centering.scales[j]);
        }
        out.standardized = true;
    }
    return out;
}

}  // namespace tracefluct
