#pragma once

// Declarative Monte Carlo experiments over the trace statistics, with
// CSV/JSON reports and two-column plot data.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tracefluct/cycle.hpp"
#include "tracefluct/distribution.hpp"
#include "tracefluct/error.hpp"
#include "tracefluct/kernel.hpp"
#include "tracefluct/rng.hpp"
#include "tracefluct/statistics.hpp"
#include "tracefluct/trace_stats.hpp"
#include "tracefluct/universal_bound.hpp"

namespace tracefluct {

enum class ExperimentKind { clt, universality, decay, bound };

inline std::string to_string(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::clt: return "clt";
        case ExperimentKind::universality: return "universality";
        case ExperimentKind::decay: return "decay";
        case ExperimentKind::bound: return "bound";
    }
    return "?";
}

inline ExperimentKind parse_experiment_kind(const std::string& s) {
    if (s == "clt" || s == "simulate") return ExperimentKind::clt;
    if (s == "universality") return ExperimentKind::universality;
    if (s == "decay") return ExperimentKind::decay;
    if (s == "bound") return ExperimentKind::bound;
    throw UsageError("unknown experiment '" + s + "' (expected clt, universality, decay or bound)");
}

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::clt;
    std::vector<std::string> dists{"gaussian"};
    std::vector<int> Ns{50};
    std::vector<int> orders{2};
    std::size_t trials = 1000;
    std::uint64_t seed = 1;
    std::vector<double> t;  // frequencies of phi(x) = cos(t . x); empty means all ones
    std::string out;
    std::string format = "csv";
    unsigned threads = 1;

    std::vector<double> frequencies() const {
        return t.empty() ? std::vector<double>(orders.size(), 1.0) : t;
    }

    void validate() const {
        if (dists.empty()) throw UsageError("config: at least one distribution is required");
        for (const auto& d : dists) make_distribution(d);
        if (Ns.empty()) throw UsageError("config: the N list is empty");
        for (int N : Ns) {
            if (N < 2) throw UsageError("config: every N must be >= 2");
        }
        if (orders.empty()) throw UsageError("config: the order list is empty");
        for (std::size_t j = 0; j < orders.size(); ++j) {
            if (orders[j] < 1) throw UsageError("config: orders must be >= 1");
            if (j > 0 && orders[j] <= orders[j - 1]) throw UsageError("config: orders must be strictly increasing");
        }
        if (trials < 100) throw UsageError("config: trials must be >= 100");
        if (!t.empty() && t.size() != orders.size()) {
            throw UsageError("config: need one frequency per order");
        }
        if (format != "csv" && format != "json") throw UsageError("config: format must be csv or json");
        if (kind == ExperimentKind::universality && dists.size() < 2) {
            throw UsageError("config: universality compares at least two distributions");
        }
        if (kind == ExperimentKind::decay || kind == ExperimentKind::bound) {
            if (orders.front() < 2) throw UsageError("config: " + to_string(kind) + " needs orders >= 2");
        }
    }
};

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
    j = nlohmann::json{{"experiment", to_string(c.kind)},
                       {"dists", c.dists},
                       {"N", c.Ns},
                       {"orders", c.orders},
                       {"trials", c.trials},
                       {"seed", c.seed},
                       {"t", c.frequencies()},
                       {"format", c.format},
                       {"threads", c.threads}};
    if (!c.out.empty()) j["out"] = c.out;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{"experiment", "dists", "N", "orders", "trials", "seed",
                                             "t", "out", "format", "threads"};
    if (!j.is_object()) throw UsageError("config: top level must be an object");
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw UsageError("config: unknown key '" + key + "'");
    }
    ExperimentConfig c;
    try {
        if (j.contains("experiment")) c.kind = parse_experiment_kind(j.at("experiment").get<std::string>());
        if (j.contains("dists")) c.dists = j.at("dists").get<std::vector<std::string>>();
        if (j.contains("N")) c.Ns = j.at("N").get<std::vector<int>>();
        if (j.contains("orders")) c.orders = j.at("orders").get<std::vector<int>>();
        if (j.contains("trials")) c.trials = j.at("trials").get<std::size_t>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("t")) c.t = j.at("t").get<std::vector<double>>();
        if (j.contains("out")) c.out = j.at("out").get<std::string>();
        if (j.contains("format")) c.format = j.at("format").get<std::string>();
        if (j.contains("threads")) c.threads = j.at("threads").get<unsigned>();
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("config file " + path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

struct ReportRow {
    std::string dist;
    int N = 0;
    std::string statistic;
    std::string component;
    double value = 0.0;
    std::optional<double> se;
    std::optional<double> reference;
    std::string note;
};

struct PlotSeries {
    std::string name;
    std::string relation;  // what the points illustrate
    std::string x_label;
    std::string y_label;
    std::vector<std::pair<double, double>> points;
};

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct ExperimentReport {
    std::string experiment;
    std::uint64_t seed = 0;
    nlohmann::json config;
    std::vector<ReportRow> rows;
    std::vector<PlotSeries> series;
    std::vector<Check> checks;
    double runtime_seconds = 0.0;  // kept out of the emitted files

    bool all_passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }

    const ReportRow* find(const std::string& dist, int N, const std::string& statistic,
                          const std::string& component = "") const {
        for (const auto& r : rows) {
            if (r.dist == dist && r.N == N && r.statistic == statistic && r.component == component) return &r;
        }
        return nullptr;
    }
};

namespace detail {

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

// Seed of the trial family for one (distribution, N) cell.
inline std::uint64_t cell_seed(std::uint64_t master, std::size_t dist_index, int N) {
    return derive_seed(derive_seed(master, dist_index), static_cast<std::uint64_t>(N));
}

/// Runs fn(trial, sample, out) for trials 0..M-1 on up to `threads` threads;
/// out is the trial's row of width `width`. Rows are stored by trial index,
/// so results do not depend on scheduling.
template <class Fn>
std::vector<double> run_trials(const EntryDistribution& dist, int N, std::uint64_t seed, std::size_t M,
                               std::size_t width, unsigned threads, Fn&& fn) {
    std::vector<double> rows(M * width, 0.0);
    auto work = [&](std::size_t begin, std::size_t end) {
        MatrixSample s;
        for (std::size_t t = begin; t < end; ++t) {
            sample_matrix_into(dist, N, seed, t, s);
            fn(t, s, std::span<double>(rows.data() + t * width, width));
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(M)));
    if (n == 1) {
        work(0, M);
        return rows;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(work, M * w / n, M * (w + 1) / n);
    for (auto& th : pool) th.join();
    return rows;
}

inline std::vector<double> column(const std::vector<double>& rows, std::size_t width, std::size_t j) {
    std::vector<double> out(rows.size() / width);
    for (std::size_t t = 0; t < out.size(); ++t) out[t] = rows[t * width + j];
    return out;
}

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

// Q_k(f_{k,N}, X): the diagonal sum for k = 1, the compiled kernel otherwise.
class ChaosEvaluator {
public:
    ChaosEvaluator(int k, int N) : k_(k), N_(N) {
        if (k >= 2) {
            const SymmetricKernel f = build_kernel_fkN(k, N);
            variance_ = factorial(k) * norm_sq(f);
            kernel_.emplace(f, N);
        }
    }
    double operator()(const MatrixSample& s) const {
        if (kernel_) return (*kernel_)(s);
        double d = 0.0;
        for (int i = 0; i < N_; ++i) d += s.entries[static_cast<std::size_t>(i) * N_ + i];
        return d / std::sqrt(static_cast<double>(N_));
    }
    double variance() const noexcept { return variance_; }

private:
    int k_;
    int N_;
    double variance_ = 1.0;
    std::optional<CompiledKernel> kernel_;
};

inline std::string pair_label(int a, int b) { return std::to_string(a) + "x" + std::to_string(b); }

}  // namespace detail

/// Central limit experiment: centered traces of powers, their covariance
/// against diag(k_j), normality of the marginals.
inline ExperimentReport run_clt(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport rep;
    rep.experiment = "clt";
    rep.seed = cfg.seed;
    rep.config = cfg;
    const std::size_t m = cfg.orders.size();
    const unsigned threads = detail::resolve_threads(cfg.threads);
    for (std::size_t di = 0; di < cfg.dists.size(); ++di) {
        const EntryDistribution dist = make_distribution(cfg.dists[di]);
        const std::string dn = dist.name();
        for (int N : cfg.Ns) {
            const auto rows = detail::run_trials(dist, N, detail::cell_seed(cfg.seed, di, N), cfg.trials, m, threads,
                                                 [&](std::size_t, const MatrixSample& s, std::span<double> out) {
                                                     const auto tr = trace_powers(s, cfg.orders);
                                                     std::copy(tr.begin(), tr.end(), out.begin());
                                                 });
            std::vector<std::vector<double>> centered(m);
            std::vector<double> standardizer(m);
            for (std::size_t j = 0; j < m; ++j) {
                const int k = cfg.orders[j];
                const std::string comp = "k=" + std::to_string(k);
                auto col = detail::column(rows, m, j);
                const Summary s = summarize(col);
                ReportRow mean{dn, N, "mean", comp, s.mean, s.stderr_mean, std::nullopt, "pooled trial mean"};
                if (int_pow(N, k) <= cycle_budget) {
                    mean.reference = expected_trace(dist, N, k);
                    mean.note += "; reference exact";
                }
                rep.rows.push_back(mean);
                for (double& x : col) x -= s.mean;
                standardizer[j] = s.variance;
                std::string how = "pooled";
                if (int_pow(N, 2 * k) <= pair_budget) {
                    const double ex = exact_variance(dist, N, k, VariancePart::full);
                    rep.rows.push_back({dn, N, "exact_variance", comp, ex, std::nullopt, static_cast<double>(k),
                                        "exact; reference is the limit variance"});
                    standardizer[j] = ex;
                    how = "exact";
                }
                centered[j] = std::move(col);
                std::vector<double> z = centered[j];
                const double sd = std::sqrt(standardizer[j]);
                if (sd > 0.0) {
                    for (double& x : z) x /= sd;
                }
                const double d = ks_normal(z);
                const double n = static_cast<double>(z.size());
                rep.rows.push_back({dn, N, "ks_normal", comp, d, std::nullopt, ks_critical(n, 0.01),
                                    "standardized by " + how + " variance; reference is the 99% null quantile; p=" +
                                        detail::fmt_short(ks_pvalue(d, n))});
                const Estimate sk = standardized_moment(centered[j], 3);
                const Estimate ku = standardized_moment(centered[j], 4);
                rep.rows.push_back({dn, N, "moment3", comp, sk.value, sk.se, 0.0, "standardized"});
                rep.rows.push_back({dn, N, "moment4", comp, ku.value, ku.se, 3.0, "standardized"});
                rep.checks.push_back({"clt " + dn + " N=" + std::to_string(N) + " " + comp + " kurtosis",
                                      ku.value >= 2.6 && ku.value <= 3.4, "moment4=" + detail::fmt_short(ku.value)});
            }
            for (std::size_t a = 0; a < m; ++a) {
                for (std::size_t b = a; b < m; ++b) {
                    const Estimate c = covariance_estimate(centered[a], centered[b]);
                    const double ka = cfg.orders[a];
                    const double kb = cfg.orders[b];
                    const double ref = a == b ? ka : 0.0;
                    rep.rows.push_back({dn, N, "covariance", detail::pair_label(cfg.orders[a], cfg.orders[b]),
                                        c.value, c.se, ref, "empirical centering"});
                    const bool ok = a == b ? std::abs(c.value - ka) <= 0.15 * ka
                                           : std::abs(c.value) <= 0.1 * std::sqrt(ka * kb);
                    rep.checks.push_back({"clt " + dn + " N=" + std::to_string(N) + " covariance " +
                                              detail::pair_label(cfg.orders[a], cfg.orders[b]),
                                          ok, "value=" + detail::fmt_short(c.value) + " reference=" + detail::fmt_short(ref)});
                }
            }
        }
    }
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

/// Compares the laws of (Q_{k_j}(f_{k_j,N}, X))_j across entry distributions
/// through phi(x) = cos(t . x) and two-sample KS distances.
inline ExperimentReport run_universality(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport rep;
    rep.experiment = "universality";
    rep.seed = cfg.seed;
    rep.config = cfg;
    const std::size_t m = cfg.orders.size();
    const auto t = cfg.frequencies();
    const unsigned threads = detail::resolve_threads(cfg.threads);
    const std::size_t nd = cfg.dists.size();
    std::vector<EntryDistribution> dists;
    for (const auto& d : cfg.dists) dists.push_back(make_distribution(d));
    std::vector<std::string> labels;
    for (std::size_t di = 0; di < nd; ++di) {
        std::string l = dists[di].name();
        if (std::count(cfg.dists.begin(), cfg.dists.begin() + di, cfg.dists[di]) > 0) l += "#" + std::to_string(di);
        labels.push_back(l);
    }
    std::map<std::pair<std::size_t, std::size_t>, PlotSeries> pair_series;
    for (int N : cfg.Ns) {
        std::vector<detail::ChaosEvaluator> evals;
        double target_exponent = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            evals.emplace_back(cfg.orders[j], N);
            target_exponent += t[j] * t[j] * evals.back().variance();
        }
        const double target = std::exp(-0.5 * target_exponent);
        std::vector<std::vector<double>> q(nd);
        std::vector<Estimate> phi(nd);
        for (std::size_t di = 0; di < nd; ++di) {
            const std::size_t width = m + 1;
            q[di] = detail::run_trials(dists[di], N, detail::cell_seed(cfg.seed, di, N), cfg.trials, width, threads,
                                       [&](std::size_t, const MatrixSample& s, std::span<double> out) {
                                           double arg = 0.0;
                                           for (std::size_t j = 0; j < m; ++j) {
                                               out[j] = evals[j](s);
                                               arg += t[j] * out[j];
                                           }
                                           out[m] = std::cos(arg);
                                       });
            const auto ph = detail::column(q[di], width, m);
            phi[di] = mean_estimate(ph);
            rep.rows.push_back({labels[di], N, "smooth_mean", "phi", phi[di].value, phi[di].se, target,
                                "reference is E phi of the Gaussian with the exact chaos variances"});
            for (std::size_t j = 0; j < m; ++j) {
                const auto col = detail::column(q[di], width, j);
                const Summary s = summarize(col);
                const Estimate v = covariance_estimate(col, col);
                rep.rows.push_back({labels[di], N, "variance", "k=" + std::to_string(cfg.orders[j]), v.value, v.se,
                                    evals[j].variance(), "reference k! ||f||^2"});
                (void)s;
            }
        }
        for (std::size_t a = 0; a < nd; ++a) {
            for (std::size_t b = a + 1; b < nd; ++b) {
                const std::string pl = labels[a] + "|" + labels[b];
                const double dist_ab = std::abs(phi[a].value - phi[b].value);
                const double se = std::hypot(phi[a].se, phi[b].se);
                rep.rows.push_back({pl, N, "smooth_distance", "phi", dist_ab, se, 0.0, "|E phi(Q_a) - E phi(Q_b)|"});
                rep.checks.push_back({"universality " + pl + " N=" + std::to_string(N) + " smooth distance",
                                      dist_ab <= 0.05 + 3.0 * se,
                                      "distance=" + detail::fmt_short(dist_ab) + " se=" + detail::fmt_short(se)});
                auto& ser = pair_series[{a, b}];
                if (ser.name.empty()) {
                    ser.name = "universality_" + std::to_string(a) + "_" + std::to_string(b);
                    ser.relation = "smooth-function distance between " + pl + " driven homogeneous sums against N";
                    ser.x_label = "N";
                    ser.y_label = "distance";
                }
                ser.points.emplace_back(N, dist_ab);
                for (std::size_t j = 0; j < m; ++j) {
                    const auto ca = detail::column(q[a], m + 1, j);
                    const auto cb = detail::column(q[b], m + 1, j);
                    const double d = ks_two_sample(ca, cb);
                    const double n1 = static_cast<double>(ca.size());
                    const double n2 = static_cast<double>(cb.size());
                    rep.rows.push_back({pl, N, "ks_two_sample", "k=" + std::to_string(cfg.orders[j]), d, std::nullopt,
                                        ks_critical(n1 * n2 / (n1 + n2), 0.01),
                                        "reference is the 99% null quantile; p=" +
                                            detail::fmt_short(ks_pvalue_two_sample(d, n1, n2))});
                }
            }
        }
    }
    for (auto& [key, s] : pair_series) rep.series.push_back(std::move(s));
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

/// Contraction norms of f_{k,N} over the N grid with log-log slopes, and the
/// Monte Carlo fourth moment of Q_k(f_{k,N}, X) against 3 sigma^4.
inline ExperimentReport run_decay(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<int> Ns = cfg.Ns;
    std::sort(Ns.begin(), Ns.end());
    Ns.erase(std::unique(Ns.begin(), Ns.end()), Ns.end());
    if (Ns.size() < 2) throw UsageError("decay: a slope needs at least two distinct N");
    for (int k : cfg.orders) {
        for (int N : Ns) require_cycle_budget(N, k, "decay");
    }
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport rep;
    rep.experiment = "decay";
    rep.seed = cfg.seed;
    rep.config = cfg;
    const unsigned threads = detail::resolve_threads(cfg.threads);
    for (int k : cfg.orders) {
        std::map<int, std::vector<double>> log_norm;
        std::vector<double> log_n;
        for (int N : Ns) {
            const SymmetricKernel f = build_kernel_fkN(k, N);
            const double sigma2 = detail::factorial(k) * norm_sq(f);
            rep.rows.push_back({"", N, "second_moment", "k=" + std::to_string(k), sigma2, std::nullopt, std::nullopt,
                                "k! ||f||^2"});
            rep.rows.push_back({"", N, "max_influence", "k=" + std::to_string(k), max_influence(f), std::nullopt,
                                std::nullopt, ""});
            log_n.push_back(std::log(static_cast<double>(N)));
            for (const auto& [r, v] : contraction_profile(f)) {
                const std::string comp = "k=" + std::to_string(k) + ",r=" + std::to_string(r);
                ReportRow row{"", N, "contraction_norm", comp, v, std::nullopt, std::nullopt, ""};
                if (k == 2) {
                    const double closed = std::sqrt(static_cast<double>(N) * (N - 1)) / (static_cast<double>(N) * N);
                    row.reference = closed;
                    row.note = "reference sqrt(N(N-1))/N^2";
                    rep.checks.push_back({"decay k=2 N=" + std::to_string(N) + " closed form",
                                          std::abs(v - closed) <= 1e-12, "value=" + detail::fmt(v)});
                }
                rep.rows.push_back(row);
                log_norm[r].push_back(std::log(v));
            }
        }
        for (const auto& [r, ys] : log_norm) {
            const std::string comp = "k=" + std::to_string(k) + ",r=" + std::to_string(r);
            const LineFit fit = least_squares(log_n, ys);
            rep.rows.push_back({"", 0, "slope", comp, fit.slope, fit.slope_stderr, -0.5,
                                "least squares on (log N, log norm); reference is the O(N^-1/2) rate"});
            rep.checks.push_back({"decay " + comp + " slope", fit.slope <= -0.45, "slope=" + detail::fmt_short(fit.slope)});
            PlotSeries s;
            s.name = "decay_k" + std::to_string(k) + "_r" + std::to_string(r);
            s.relation = "log ||f_{k,N} star_r f_{k,N}|| against log N (k=" + std::to_string(k) + ", r=" +
                         std::to_string(r) + "), expected slope <= -1/2";
            s.x_label = "log N";
            s.y_label = "log norm";
            for (std::size_t i = 0; i < log_n.size(); ++i) s.points.emplace_back(log_n[i], ys[i]);
            rep.series.push_back(std::move(s));
        }
        for (std::size_t di = 0; di < cfg.dists.size(); ++di) {
            const EntryDistribution dist = make_distribution(cfg.dists[di]);
            for (int N : Ns) {
                const detail::ChaosEvaluator q(k, N);
                const auto rows = detail::run_trials(dist, N, detail::cell_seed(cfg.seed, di, N), cfg.trials, 1, threads,
                                                     [&](std::size_t, const MatrixSample& s, std::span<double> out) {
                                                         out[0] = q(s);
                                                     });
                std::vector<double> q2(rows.size());
                std::vector<double> q4(rows.size());
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    q2[i] = rows[i] * rows[i];
                    q4[i] = q2[i] * q2[i];
                }
                const Estimate e2 = mean_estimate(q2);
                const Estimate e4 = mean_estimate(q4);
                const double s2 = q.variance();
                rep.rows.push_back({dist.name(), N, "second_moment_mc", "k=" + std::to_string(k), e2.value, e2.se, s2,
                                    "reference k! ||f||^2"});
                rep.rows.push_back({dist.name(), N, "fourth_moment", "k=" + std::to_string(k), e4.value, e4.se,
                                    3.0 * s2 * s2, "reference 3 sigma^4"});
            }
        }
    }
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

/// Monte Carlo distance |E phi(standardized traces) - E phi(Z)| next to the
/// computed invariance bound for the normalized kernels f_{k_j,N}.
inline ExperimentReport run_bound(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    ExperimentReport rep;
    rep.experiment = "bound";
    rep.seed = cfg.seed;
    rep.config = cfg;
    const std::size_t m = cfg.orders.size();
    const auto t = cfg.frequencies();
    const double d2 = cosine_derivative_bound(t, 2);
    const double d3 = cosine_derivative_bound(t, 3);
    double t2 = 0.0;
    double t1 = 0.0;
    for (double x : t) {
        t2 += x * x;
        t1 += std::abs(x);
    }
    const double target = std::exp(-0.5 * t2);
    const unsigned threads = detail::resolve_threads(cfg.threads);
    std::vector<int> Ns = cfg.Ns;
    std::sort(Ns.begin(), Ns.end());
    Ns.erase(std::unique(Ns.begin(), Ns.end()), Ns.end());
    for (std::size_t di = 0; di < cfg.dists.size(); ++di) {
        const EntryDistribution dist = make_distribution(cfg.dists[di]);
        const std::string dn = dist.name();
        const double beta = std::max(1.0, dist.abs_third_moment());
        PlotSeries lhs_series{"bound_lhs_" + std::to_string(di),
                              "Monte Carlo |E phi(standardized traces) - E phi(Z)| against N for " + dn +
                                  ", expected rate N^-1/4 or faster",
                              "N", "distance", {}};
        PlotSeries rhs_series{"bound_rhs_" + std::to_string(di),
                              "invariance bound for the normalized distinct-pair kernels against N for " + dn, "N",
                              "bound", {}};
        std::vector<Estimate> lhs_by_n;
        for (int N : Ns) {
            std::vector<SymmetricKernel> kernels;
            std::vector<double> vd(m);
            std::vector<DPartExtractor> extract;
            for (std::size_t j = 0; j < m; ++j) {
                const SymmetricKernel f = build_kernel_fkN(cfg.orders[j], N);
                vd[j] = detail::factorial(cfg.orders[j]) * norm_sq(f);
                kernels.push_back(f.scaled(1.0 / std::sqrt(vd[j])));
                extract.emplace_back(N, cfg.orders[j]);
            }
            const double K = influence_budget(kernels);
            std::vector<ChaosComponentSummary> comps;
            for (const auto& g : kernels) comps.push_back(summarize_component(g));
            const BoundTerms terms = universal_bound_terms(comps, beta);
            const double rhs = universal_bound(comps, beta, d2, d3, K);
            rep.rows.push_back({dn, N, "rhs", "", rhs, std::nullopt, std::nullopt,
                                "beta=" + detail::fmt_short(beta) + " K=" + detail::fmt_short(K)});
            rep.rows.push_back({dn, N, "rhs_second_order", "", d2 * terms.second_order, std::nullopt, std::nullopt, ""});
            rep.rows.push_back({dn, N, "rhs_third_order", "", K * d3 * terms.third_order_factor, std::nullopt,
                                std::nullopt, ""});
            rep.rows.push_back({dn, N, "max_influence", "", terms.max_influence, std::nullopt, std::nullopt, ""});

            // per trial: traces then distinct-pair parts
            const auto rows = detail::run_trials(dist, N, detail::cell_seed(cfg.seed, di, N), cfg.trials, 2 * m, threads,
                                                 [&](std::size_t, const MatrixSample& s, std::span<double> out) {
                                                     const auto tr = trace_powers(s, cfg.orders);
                                                     for (std::size_t j = 0; j < m; ++j) {
                                                         out[j] = tr[j];
                                                         out[m + j] = extract[j].d_part(s, tr[j]);
                                                     }
                                                 });
            std::vector<std::vector<double>> total(m);
            std::vector<std::vector<double>> dpart(m);
            std::vector<double> C(m);
            double b_bound = 0.0;
            bool b_exact = true;
            for (std::size_t j = 0; j < m; ++j) {
                const int k = cfg.orders[j];
                const std::string comp = "k=" + std::to_string(k);
                total[j] = detail::column(rows, 2 * m, j);
                dpart[j] = detail::column(rows, 2 * m, m + j);
                double mean = 0.0;
                std::string centering = "pooled";
                if (int_pow(N, k) <= cycle_budget) {
                    mean = expected_trace(dist, N, k);
                    centering = "exact";
                } else {
                    mean = summarize(total[j]).mean;
                }
                for (double& x : total[j]) x -= mean;
                std::vector<double> rem(total[j].size());
                for (std::size_t i = 0; i < rem.size(); ++i) rem[i] = total[j][i] - dpart[j][i];
                double var_rem = 0.0;
                std::string how = "pooled";
                if (int_pow(N, 2 * k) <= pair_budget) {
                    C[j] = exact_variance(dist, N, k, VariancePart::full);
                    var_rem = exact_variance(dist, N, k, VariancePart::remainder);
                    how = "exact";
                } else {
                    C[j] = summarize(total[j]).variance;
                    var_rem = summarize(rem).variance;
                    b_exact = false;
                }
                rep.rows.push_back({dn, N, "trace_variance", comp, C[j], std::nullopt, std::nullopt,
                                    how + "; centering " + centering});
                rep.rows.push_back({dn, N, "dpart_variance", comp, vd[j], std::nullopt, static_cast<double>(k),
                                    "exact k! ||f||^2; reference is the limit"});
                rep.rows.push_back({dn, N, "remainder_variance", comp, var_rem, std::nullopt, std::nullopt, how});
                b_bound += std::abs(t[j]) * std::sqrt(std::max(0.0, var_rem) / C[j]);
            }
            std::vector<double> phi_total(cfg.trials);
            std::vector<double> phi_a(cfg.trials);
            std::vector<double> phi_chaos(cfg.trials);
            std::vector<double> diff(cfg.trials);
            for (std::size_t i = 0; i < cfg.trials; ++i) {
                double at = 0.0;
                double aa = 0.0;
                double ac = 0.0;
                for (std::size_t j = 0; j < m; ++j) {
                    at += t[j] * total[j][i] / std::sqrt(C[j]);
                    aa += t[j] * dpart[j][i] / std::sqrt(C[j]);
                    ac += t[j] * dpart[j][i] / std::sqrt(vd[j]);
                }
                phi_total[i] = std::cos(at) - target;
                phi_a[i] = std::cos(aa) - target;
                phi_chaos[i] = std::cos(ac) - target;
                diff[i] = phi_total[i] - phi_a[i];
            }
            const Estimate lt = mean_estimate(phi_total);
            const Estimate la = mean_estimate(phi_a);
            const Estimate lc = mean_estimate(phi_chaos);
            const Estimate bn = mean_estimate(diff);
            const Estimate lhs_total{std::abs(lt.value), lt.se};
            const Estimate a_n{std::abs(la.value), la.se};
            const Estimate lhs_chaos{std::abs(lc.value), lc.se};
            const Estimate b_n{std::abs(bn.value), bn.se};
            rep.rows.push_back({dn, N, "lhs_total", "", lhs_total.value, lhs_total.se, rhs,
                                "traces standardized by the trace variance; reference is rhs"});
            rep.rows.push_back({dn, N, "a_n", "", a_n.value, a_n.se, std::nullopt,
                                "distinct-pair parts standardized by the trace variance"});
            rep.rows.push_back({dn, N, "lhs_chaos", "", lhs_chaos.value, lhs_chaos.se, rhs,
                                "distinct-pair parts with unit variance; reference is rhs"});
            rep.rows.push_back({dn, N, "b_n", "", b_n.value, b_n.se, b_bound, "paired Monte Carlo; reference is the remainder bound"});
            rep.rows.push_back({dn, N, "b_n_bound", "", b_bound, std::nullopt, std::nullopt,
                                std::string("sum |t_j| sqrt(Var(remainder)/Var(trace)), ") +
                                    (b_exact ? "exact variances" : "Monte Carlo variances (flagged)")});
            const std::string cell = dn + " N=" + std::to_string(N);
            rep.checks.push_back({"bound " + cell + " chaos dominance", lhs_chaos.value <= rhs + 3.0 * lhs_chaos.se,
                                  "lhs=" + detail::fmt_short(lhs_chaos.value) + " rhs=" + detail::fmt_short(rhs)});
            rep.checks.push_back({"bound " + cell + " total dominance", lhs_total.value <= rhs + 3.0 * lhs_total.se,
                                  "lhs=" + detail::fmt_short(lhs_total.value) + " rhs=" + detail::fmt_short(rhs)});
            rep.checks.push_back({"bound " + cell + " split", std::abs(lhs_total.value - a_n.value) <= b_n.value + 3.0 * b_n.se,
                                  "|lhs-a|=" + detail::fmt_short(std::abs(lhs_total.value - a_n.value)) +
                                      " b=" + detail::fmt_short(b_n.value)});
            rep.checks.push_back({"bound " + cell + " remainder", b_n.value <= b_bound + 3.0 * b_n.se,
                                  "b=" + detail::fmt_short(b_n.value) + " bound=" + detail::fmt_short(b_bound)});
            lhs_series.points.emplace_back(N, lhs_total.value);
            rhs_series.points.emplace_back(N, rhs);
            lhs_by_n.push_back(lhs_total);
        }
        for (std::size_t i = 1; i < lhs_by_n.size(); ++i) {
            const double tol = 2.0 * std::hypot(lhs_by_n[i].se, lhs_by_n[i - 1].se);
            rep.checks.push_back({"bound " + dn + " trend N=" + std::to_string(Ns[i - 1]) + "->" + std::to_string(Ns[i]),
                                  lhs_by_n[i].value <= lhs_by_n[i - 1].value + tol,
                                  detail::fmt_short(lhs_by_n[i - 1].value) + " -> " + detail::fmt_short(lhs_by_n[i].value)});
        }
        (void)t1;
        rep.series.push_back(std::move(lhs_series));
        rep.series.push_back(std::move(rhs_series));
    }
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.kind) {
        case ExperimentKind::clt: return run_clt(cfg);
        case ExperimentKind::universality: return run_universality(cfg);
        case ExperimentKind::decay: return run_decay(cfg);
        case ExperimentKind::bound: return run_bound(cfg);
    }
    throw UsageError("unknown experiment kind");
}

inline constexpr const char* report_csv_header = "dist,N,statistic,component,value,stderr,reference,note";

inline void write_report_csv(std::ostream& os, const ExperimentReport& rep) {
    os << report_csv_header << '\n';
    for (const auto& r : rep.rows) {
        os << detail::csv_field(r.dist) << ',' << r.N << ',' << detail::csv_field(r.statistic) << ','
           << detail::csv_field(r.component) << ',' << detail::fmt(r.value) << ',' << (r.se ? detail::fmt(*r.se) : "")
           << ',' << (r.reference ? detail::fmt(*r.reference) : "") << ',' << detail::csv_field(r.note) << '\n';
    }
    for (const auto& c : rep.checks) {
        os << ",0,check," << detail::csv_field(c.name) << ',' << (c.passed ? 1 : 0) << ",,1,"
           << detail::csv_field(c.detail) << '\n';
    }
}

inline nlohmann::json report_to_json(const ExperimentReport& rep) {
    nlohmann::json j;
    j["experiment"] = rep.experiment;
    j["seed"] = rep.seed;
    j["config"] = rep.config;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        nlohmann::json row{{"dist", r.dist}, {"N", r.N}, {"statistic", r.statistic}, {"component", r.component},
                           {"value", r.value}, {"note", r.note}};
        row["stderr"] = r.se ? nlohmann::json(*r.se) : nlohmann::json(nullptr);
        row["reference"] = r.reference ? nlohmann::json(*r.reference) : nlohmann::json(nullptr);
        j["rows"].push_back(std::move(row));
    }
    j["checks"] = nlohmann::json::array();
    for (const auto& c : rep.checks) {
        j["checks"].push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    }
    j["series"] = nlohmann::json::array();
    for (const auto& s : rep.series) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& [x, y] : s.points) pts.push_back({x, y});
        j["series"].push_back({{"name", s.name}, {"relation", s.relation}, {"points", pts}});
    }
    return j;
}

inline void write_report_json(std::ostream& os, const ExperimentReport& rep) { os << report_to_json(rep).dump(2) << '\n'; }

inline void write_series(std::ostream& os, const PlotSeries& s) {
    os << "# " << s.relation << '\n' << "# " << s.x_label << '\t' << s.y_label << '\n';
    for (const auto& [x, y] : s.points) os << detail::fmt(x) << '\t' << detail::fmt(y) << '\n';
}

/// Writes the report to `path` (extension added when missing) and each plot
/// series next to it as <stem>_<series>.dat. Returns the files written.
inline std::vector<std::filesystem::path> emit_report(const ExperimentReport& rep, const std::string& format,
                                                      const std::filesystem::path& path) {
    if (format != "csv" && format != "json") throw UsageError("format must be csv or json");
    std::filesystem::path main = path;
    if (main.extension() != "." + format) main += "." + format;
    if (main.has_parent_path() && !main.parent_path().empty()) {
        std::error_code ec;
        std::filesystem::create_directories(main.parent_path(), ec);
    }
    std::vector<std::filesystem::path> written;
    auto open = [](const std::filesystem::path& p) {
        std::ofstream os(p, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + p.string());
        return os;
    };
    {
        std::ofstream os = open(main);
        if (format == "csv") {
            write_report_csv(os, rep);
        } else {
            write_report_json(os, rep);
        }
        if (!os) throw std::runtime_error("write failed for " + main.string());
    }
    written.push_back(main);
    for (const auto& s : rep.series) {
        std::filesystem::path p = main.parent_path() / (main.stem().string() + "_" + s.name + ".dat");
        std::ofstream os = open(p);
        write_series(os, s);
        if (!os) throw std::runtime_error("write failed for " + p.string());
        written.push_back(p);
    }
    return written;
}

}  // namespace tracefluct
