#pragma once

// Centered unit-variance entry laws, their exact moment tables, matrix
// sampling and factorized product expectations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tracefluct/error.hpp"
#include "tracefluct/index_point.hpp"
#include "tracefluct/rng.hpp"

namespace tracefluct {

inline constexpr int default_max_moment = 12;

class EntryDistribution {
public:
    enum class Kind { rademacher, gaussian, uniform, two_point };

    EntryDistribution(Kind kind, double p = 0.5, int max_moment = default_max_moment)
        : kind_(kind), p_(p), max_moment_(max_moment) {
        if (kind == Kind::two_point && !(p > 0.0 && p < 1.0)) {
            throw UsageError("two_point(p) requires 0 < p < 1, got p = " + std::to_string(p));
        }
        if (max_moment < 3) throw UsageError("moment table must reach at least m = 3");
        if (kind == Kind::two_point) {
            hi_ = std::sqrt((1.0 - p) / p);
            lo_ = -std::sqrt(p / (1.0 - p));
        }
        moments_.resize(static_cast<std::size_t>(max_moment + 1));
        for (int m = 0; m <= max_moment; ++m) moments_[m] = exact_moment(m);
        abs_third_ = exact_abs_third();
    }

    Kind kind() const noexcept { return kind_; }
    double p() const noexcept { return p_; }
    int max_moment() const noexcept { return max_moment_; }

    std::string name() const {
        switch (kind_) {
            case Kind::rademacher: return "rademacher";
            case Kind::gaussian: return "gaussian";
            case Kind::uniform: return "uniform";
            case Kind::two_point: {
                char buf[48];
                std::snprintf(buf, sizeof buf, "two_point(%g)", p_);
                return buf;
            }
        }
        return "?";
    }

    double moment(int m) const {
        if (m < 0 || m > max_moment_) {
            throw UsageError("moment order " + std::to_string(m) + " outside table [0, " +
                             std::to_string(max_moment_) + "]");
        }
        return moments_[m];
    }
    const std::vector<double>& moments() const noexcept { return moments_; }

    /// beta = E|X|^3
    double abs_third_moment() const noexcept { return abs_third_; }

    bool odd_symmetric() const noexcept { return kind_ != Kind::two_point; }

    /// Entry number `index` of the given stream.
    double draw(const CounterStream& s, std::uint64_t index) const {
        switch (kind_) {
            case Kind::rademacher:
                return ((s.bits(index >> 6) >> (index & 63)) & 1U) ? 1.0 : -1.0;
            case Kind::gaussian: {
                const std::uint64_t q = index >> 1;
                const double r = std::sqrt(-2.0 * std::log(s.uniform(2 * q)));
                const double th = 2.0 * std::numbers::pi * s.uniform(2 * q + 1);
                return (index & 1) ? r * std::sin(th) : r * std::cos(th);
            }
            case Kind::uniform:
                return std::numbers::sqrt3 * (2.0 * s.uniform(index) - 1.0);
            case Kind::two_point:
                return s.uniform(index) < p_ ? hi_ : lo_;
        }
        return 0.0;
    }

    /// out[e] = draw(s, e) for e = 0..size-1, sharing work between neighbours.
    void fill(const CounterStream& s, std::span<double> out) const {
        const std::size_t n = out.size();
        switch (kind_) {
            case Kind::rademacher:
                for (std::size_t w = 0; w * 64 < n; ++w) {
                    const std::uint64_t b = s.bits(w);
                    const std::size_t end = std::min(n, w * 64 + 64);
                    for (std::size_t e = w * 64; e < end; ++e) {
                        out[e] = ((b >> (e & 63)) & 1U) ? 1.0 : -1.0;
                    }
                }
                return;
            case Kind::gaussian:
                for (std::size_t q = 0; 2 * q < n; ++q) {
                    const double r = std::sqrt(-2.0 * std::log(s.uniform(2 * q)));
                    const double th = 2.0 * std::numbers::pi * s.uniform(2 * q + 1);
                    out[2 * q] = r * std::cos(th);
                    if (2 * q + 1 < n) out[2 * q + 1] = r * std::sin(th);
                }
                return;
            default:
                for (std::size_t e = 0; e < n; ++e) out[e] = draw(s, e);
        }
    }

private:
    double exact_moment(int m) const {
        if (m == 0) return 1.0;
        switch (kind_) {
            case Kind::rademacher: return m % 2 == 0 ? 1.0 : 0.0;
            case Kind::gaussian: {
                if (m % 2) return 0.0;
                double v = 1.0;
                for (int i = m - 1; i > 1; i -= 2) v *= i;
                return v;
            }
            case Kind::uniform:
                return m % 2 ? 0.0 : std::pow(3.0, m / 2) / (m + 1);
            case Kind::two_point:
                return p_ * std::pow(hi_, m) + (1.0 - p_) * std::pow(lo_, m);
        }
        return 0.0;
    }

    double exact_abs_third() const {
        switch (kind_) {
            case Kind::rademacher: return 1.0;
            case Kind::gaussian: return 2.0 * std::sqrt(2.0 / std::numbers::pi);
            case Kind::uniform: return 9.0 / (4.0 * std::numbers::sqrt3);
            case Kind::two_point:
                return p_ * hi_ * hi_ * hi_ - (1.0 - p_) * lo_ * lo_ * lo_;
        }
        return 0.0;
    }

    Kind kind_;
    double p_;
    int max_moment_;
    double hi_ = 0.0;
    double lo_ = 0.0;
    std::vector<double> moments_;
    double abs_third_ = 0.0;
};

/// Accepts "rademacher", "gaussian", "uniform", "two_point(p)".
inline EntryDistribution make_distribution(const std::string& spec) {
    using K = EntryDistribution::Kind;
    if (spec == "rademacher") return EntryDistribution(K::rademacher);
    if (spec == "gaussian") return EntryDistribution(K::gaussian);
    if (spec == "uniform") return EntryDistribution(K::uniform);
    const std::string prefix = "two_point(";
    if (spec.rfind(prefix, 0) == 0 && spec.size() > prefix.size() + 1 && spec.back() == ')') {
        const std::string arg = spec.substr(prefix.size(), spec.size() - prefix.size() - 1);
        std::size_t used = 0;
        double p = 0.0;
        try {
            p = std::stod(arg, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != arg.size()) {
            throw UsageError("two_point: cannot parse probability '" + arg + "'");
        }
        return EntryDistribution(K::two_point, p);
    }
    throw UsageError("unknown distribution '" + spec +
                     "' (expected rademacher, gaussian, uniform or two_point(p))");
}

inline EntryDistribution make_distribution(const std::string& name, std::optional<double> p) {
    if (name == "two_point") {
        if (!p) throw UsageError("two_point requires a probability p");
        return EntryDistribution(EntryDistribution::Kind::two_point, *p);
    }
    return make_distribution(name);
}

/// One realization of the unscaled N x N entries, row-major.
struct MatrixSample {
    int N = 0;
    std::vector<double> entries;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    // 1-based, matching the (row, col) convention of IndexPoint.
    double at(int row, int col) const {
        return entries[static_cast<std::size_t>(row - 1) * N + (col - 1)];
    }
};

inline void sample_matrix_into(const EntryDistribution& dist, int N, std::uint64_t seed,
                               std::uint64_t stream, MatrixSample& out) {
    if (N < 2) throw UsageError("matrix dimension N must be >= 2, got " + std::to_string(N));
    out.N = N;
    out.seed = seed;
    out.stream = stream;
    out.entries.resize(static_cast<std::size_t>(N) * N);
    dist.fill(CounterStream(seed, stream), out.entries);
}

/// Deterministic in (dist, N, seed, stream); stream numbers the matrix within a run.
inline MatrixSample sample_matrix(const EntryDistribution& dist, int N, std::uint64_t seed,
                                  std::uint64_t stream = 0) {
    MatrixSample s;
    sample_matrix_into(dist, N, seed, stream, s);
    return s;
}

/// Exposes a sample as the assignment a = (i, j) -> X_ij.
class MatrixAssignment {
public:
    explicit MatrixAssignment(const MatrixSample& s) : s_(&s) {}
    const double* find(IndexPoint p) const {
        if (p.row() > s_->N || p.col() > s_->N) return nullptr;
        return &s_->entries[static_cast<std::size_t>(p.row() - 1) * s_->N + (p.col() - 1)];
    }

private:
    const MatrixSample* s_;
};

/// E[prod_p X_p^{m_p}] for independent entries.
inline double product_expectation(const EntryDistribution& dist,
                                  const std::map<IndexPoint, int>& multiset) {
    double v = 1.0;
    for (const auto& [p, m] : multiset) {
        if (m < 1) throw UsageError("product_expectation: multiplicities must be >= 1");
        if (m > dist.max_moment()) {
            throw UsageError("product_expectation: multiplicity " + std::to_string(m) +
                             " exceeds moment table size " + std::to_string(dist.max_moment()));
        }
        v *= dist.moment(m);
    }
    return v;
}

inline void write_moments_csv(std::ostream& os, const EntryDistribution& dist) {
    os << "dist,m,moment\n";
    char buf[64];
    for (int m = 0; m <= dist.max_moment(); ++m) {
        std::snprintf(buf, sizeof buf, "%.17g", dist.moment(m));
        os << dist.name() << ',' << m << ',' << buf << '\n';
    }
    std::snprintf(buf, sizeof buf, "%.17g", dist.abs_third_moment());
    os << dist.name() << ",abs3," << buf << '\n';
}

}  // namespace tracefluct
