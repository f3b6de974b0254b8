#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "tracefluct/error.hpp"

namespace tracefluct {

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double stderr_mean = 0.0;
};

inline Summary summarize(std::span<const double> xs) {
    Summary s;
    s.n = xs.size();
    if (s.n == 0) return s;
    double sum = 0.0;
    for (double x : xs) sum += x;
    s.mean = sum / s.n;
    if (s.n > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - s.mean) * (x - s.mean);
        s.variance = ss / (s.n - 1);
        s.stderr_mean = std::sqrt(s.variance / s.n);
    }
    return s;
}

/// Estimate with its Monte Carlo standard error.
struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

/// Mean of xs and its standard error.
inline Estimate mean_estimate(std::span<const double> xs) {
    const Summary s = summarize(xs);
    return {s.mean, s.stderr_mean};
}

/// Sample covariance (divisor n - 1) with a delta-method standard error:
/// se^2 = Var((x - mx)(y - my)) / n.
inline Estimate covariance_estimate(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw UsageError("covariance needs two equal samples of size >= 2");
    const std::size_t n = x.size();
    const double mx = summarize(x).mean;
    const double my = summarize(y).mean;
    std::vector<double> prod(n);
    for (std::size_t i = 0; i < n; ++i) prod[i] = (x[i] - mx) * (y[i] - my);
    const Summary p = summarize(prod);
    return {p.mean * n / (n - 1), p.stderr_mean};
}

/// Standardized central moment E[(x - m)^p] / sd^p with a delta-method
/// standard error.
inline Estimate standardized_moment(std::span<const double> xs, int p) {
    if (xs.size() < 4) throw UsageError("standardized moment needs at least 4 observations");
    if (p < 3) throw UsageError("standardized moment order must be >= 3");
    const std::size_t n = xs.size();
    const double m = summarize(xs).mean;
    std::vector<double> z(n);
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        z[i] = xs[i] - m;
        m2 += z[i] * z[i];
    }
    m2 /= n;
    if (m2 <= 0.0) return {0.0, 0.0};
    const double sd = std::sqrt(m2);
    // influence function of m_p / m2^{p/2}, ignoring the mean estimate
    double mp = 0.0;
    for (double v : z) mp += std::pow(v / sd, p);
    mp /= n;
    std::vector<double> infl(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = z[i] / sd;
        infl[i] = std::pow(u, p) - mp - 0.5 * p * mp * (u * u - 1.0);
    }
    return {mp, summarize(infl).stderr_mean};
}

/// sup_x |F_n(x) - cdf(x)|
template <class Cdf>
double ks_statistic(std::span<const double> xs, Cdf&& cdf) {
    if (xs.empty()) throw UsageError("KS statistic of an empty sample");
    std::vector<double> s(xs.begin(), xs.end());
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    double d = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double f = cdf(s[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

inline double ks_normal(std::span<const double> xs) {
    return ks_statistic(xs, [](double x) { return normal_cdf(x); });
}

inline double ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw UsageError("KS statistic of an empty sample");
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    std::size_t i = 0;
    std::size_t j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double t = std::min(x[i], y[j]);
        while (i < x.size() && x[i] <= t) ++i;
        while (j < y.size() && y[j] <= t) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / x.size() - static_cast<double>(j) / y.size()));
    }
    return d;
}

/// P(K > lambda) for the Kolmogorov distribution.
inline double kolmogorov_survival(double lambda) {
    if (lambda <= 0.0) return 1.0;
    if (lambda < 0.2) return 1.0;
    double s = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        s += (j % 2 ? 2.0 : -2.0) * term;
        if (term < 1e-17) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

/// Effective sample size for the asymptotic distribution.
inline double ks_scale(double n) { return std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n); }

inline double ks_pvalue(double d, double n) { return kolmogorov_survival(ks_scale(n) * d); }

inline double ks_pvalue_two_sample(double d, double n1, double n2) { return ks_pvalue(d, n1 * n2 / (n1 + n2)); }

/// Critical distance at level alpha (e.g. 0.01 gives the 99% null quantile).
inline double ks_critical(double n, double alpha) {
    double lo = 0.0;
    double hi = 3.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (kolmogorov_survival(mid) > alpha) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi) / ks_scale(n);
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw UsageError("a line fit needs at least two points");
    const std::size_t n = x.size();
    const double mx = summarize(x).mean;
    const double my = summarize(y).mean;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw UsageError("a line fit needs at least two distinct x values");
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (n > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = y[i] - f.intercept - f.slope * x[i];
            rss += e * e;
        }
        f.slope_stderr = std::sqrt(rss / (n - 2) / sxx);
    }
    return f;
}

}  // namespace tracefluct
