#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "tracefluct/tracefluct.hpp"

using namespace tracefluct;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

SymmetricKernel random_kernel(std::mt19937_64& rng, int k, int grid = 3) {
    std::uniform_int_distribution<int> coord(1, grid);
    std::uniform_int_distribution<int> nsupp(1, grid == 2 ? 4 : 6);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    SymmetricKernel::Storage st;
    const int n = nsupp(rng);
    while (static_cast<int>(st.size()) < n) {
        std::set<IndexPoint> pts;
        while (static_cast<int>(pts.size()) < k) pts.insert(IndexPoint(coord(rng), coord(rng)));
        st[PointTuple(pts.begin(), pts.end())] = val(rng);
    }
    return SymmetricKernel(k, st);
}

IndexPoint P(int r, int c) { return IndexPoint(r, c); }

}  // namespace

TEST_CASE("index points are positive and ordered lexicographically") {
    CHECK_THROWS_AS(IndexPoint(0, 1), UsageError);
    CHECK_THROWS_AS(IndexPoint(1, 0), UsageError);
    CHECK(P(1, 2) < P(2, 1));
    CHECK(P(2, 1) < P(2, 3));
    std::ostringstream os;
    os << P(3, 4);
    CHECK(os.str() == "(3,4)");
}

TEST_CASE("evaluate is symmetric and vanishes on diagonals") {
    SymmetricKernel f(2, {{{P(1, 1), P(1, 2)}, 0.5}});
    CHECK(f(PointTuple{P(1, 2), P(1, 1)}) == 0.5);
    CHECK(f(PointTuple{P(1, 1), P(1, 2)}) == 0.5);
    CHECK(f(PointTuple{P(1, 1), P(1, 1)}) == 0.0);
    CHECK_THROWS_AS(f(PointTuple{P(1, 1)}), UsageError);
    CHECK_THROWS_AS(SymmetricKernel(2, {{{P(1, 1), P(1, 1)}, 1.0}}), UsageError);
    CHECK_THROWS_AS(SymmetricKernel(2, {{{P(1, 1)}, 1.0}}), UsageError);

    const auto f23 = build_kernel_fkN(2, 3);
    CHECK_THAT(f23(PointTuple{P(1, 2), P(2, 1)}), WithinAbs(1.0 / 3.0, 1e-15));
    CHECK_THAT(f23(PointTuple{P(1, 2), P(2, 1)}), WithinAbs(oracle::kernel_value(3, 2, {{0, 1}, {1, 0}}), 1e-15));
}

TEST_CASE("random kernels are invariant under argument permutation") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 2 + trial % 3;
        const auto f = random_kernel(rng, k);
        for (const auto& [key, v] : f.entries()) {
            PointTuple t = key;
            std::shuffle(t.begin(), t.end(), rng);
            CHECK(f(t) == v);
        }
    }
}

TEST_CASE("norm_sq counts every ordering") {
    CHECK(norm_sq(SymmetricKernel(2, {{{P(1, 1), P(1, 2)}, 1.0}})) == 2.0);
    CHECK_THAT(norm_sq(build_kernel_fkN(2, 4)), WithinAbs(0.75, 1e-15));
    CHECK(norm_sq(SymmetricKernel(3)) == 0.0);
}

TEST_CASE("homogeneous sum") {
    SymmetricKernel f(2, {{{P(1, 1), P(1, 2)}, 1.0}});
    SampleAssignment y;
    y.set(P(1, 1), 2.0);
    y.set(P(1, 2), 3.0);
    CHECK(homogeneous_sum(f, y) == 12.0);

    SampleAssignment zero;
    zero.set(P(1, 1), 0.0);
    zero.set(P(1, 2), 0.0);
    CHECK(homogeneous_sum(f, zero) == 0.0);

    SampleAssignment partial;
    partial.set(P(1, 1), 1.0);
    CHECK_THROWS_AS(homogeneous_sum(f, partial), UsageError);
}

TEST_CASE("f_{2,4} with Rademacher entries has second moment 3/2") {
    const auto f = build_kernel_fkN(2, 4);
    const auto rad = make_distribution("rademacher");
    std::vector<double> q(100000);
    for (std::size_t t = 0; t < q.size(); ++t) {
        const auto s = sample_matrix(rad, 4, 77, t);
        q[t] = homogeneous_sum(f, MatrixAssignment(s));
    }
    const Estimate m2 = covariance_estimate(q, q);
    CHECK_THAT(m2.value, WithinAbs(1.5, 0.05));
}

TEST_CASE("second moment identity against the sign-enumeration oracle") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const int k = 2 + trial % 3;
        const auto f = random_kernel(rng, k);
        if (oracle::domain(f).size() > 14) continue;
        const double exact = oracle::rademacher_second_moment(f);
        CHECK_THAT(detail::factorial(k) * norm_sq(f), WithinAbs(exact, 1e-12 * std::max(1.0, exact)));
    }
}

TEST_CASE("second moment identity by Monte Carlo with Gaussian values") {
    std::mt19937_64 rng(9);
    const auto gauss = make_distribution("gaussian");
    for (int trial = 0; trial < 5; ++trial) {
        const auto f = random_kernel(rng, 2 + trial % 3);
        const auto dom = oracle::domain(f);
        std::vector<double> q(20000);
        for (std::size_t t = 0; t < q.size(); ++t) {
            SampleAssignment y;
            CounterStream cs(1234 + trial, t);
            for (std::size_t i = 0; i < dom.size(); ++i) y.set(dom[i], gauss.draw(cs, i));
            const double v = homogeneous_sum(f, y);
            q[t] = v * v;
        }
        const Estimate e = mean_estimate(q);
        CHECK(std::abs(e.value - detail::factorial(f.order()) * norm_sq(f)) <= 5.0 * e.se);
    }
}

TEST_CASE("contraction of f_{2,3}") {
    const auto f = build_kernel_fkN(2, 3);
    const auto c1 = contract(f, f, 1);
    CHECK(c1.order() == 2);
    CHECK_THAT(c1(PointTuple{P(1, 2), P(1, 2)}), WithinAbs(1.0 / 9.0, 1e-15));
    CHECK(c1(PointTuple{P(1, 2), P(2, 3)}) == 0.0);
    CHECK(c1(PointTuple{P(1, 2), P(2, 1)}) == 0.0);
    CHECK_THAT(std::sqrt(norm_sq(c1)), WithinAbs(std::sqrt(6.0) / 9.0, 1e-15));
    CHECK_THAT(std::sqrt(oracle::contraction_norm_sq(f, f, 1, oracle::domain(f))), WithinAbs(std::sqrt(6.0) / 9.0, 1e-15));
    CHECK_THROWS_AS(contract(f, f, 3), UsageError);
    CHECK_THROWS_AS(contract(f, f, -1), UsageError);
}

TEST_CASE("full contraction is the squared norm") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int k = 2 + trial % 3;
        const auto f = random_kernel(rng, k);
        const auto c = contract(f, f, k);
        CHECK(c.order() == 0);
        CHECK_THAT(c.scalar(), WithinAbs(norm_sq(f), 1e-12));
    }
    const auto f = build_kernel_fkN(2, 4);
    CHECK_THAT(contract(f, f, 2).scalar(), WithinAbs(0.75, 1e-15));
}

TEST_CASE("contraction norms agree with the definition") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 24; ++trial) {
        const int k = 2 + trial % 2;
        const auto f = random_kernel(rng, k, 2);
        const auto g = random_kernel(rng, k, 2);
        const auto dom = oracle::domain(f);
        for (int r = 0; r <= k; ++r) {
            const double brute_ff = oracle::contraction_norm_sq(f, f, r, dom);
            CHECK_THAT(norm_sq(contract(f, f, r)), WithinAbs(brute_ff, 1e-12));
            CHECK_THAT(contraction_norm(f, r), WithinAbs(std::sqrt(brute_ff), 1e-12));
            std::set<IndexPoint> both(dom.begin(), dom.end());
            for (const auto& p : oracle::domain(g)) both.insert(p);
            const std::vector<IndexPoint> dfg(both.begin(), both.end());
            CHECK_THAT(norm_sq(contract(f, g, r)), WithinAbs(oracle::contraction_norm_sq(f, g, r, dfg), 1e-12));
        }
    }
    const auto f33 = build_kernel_fkN(3, 3);
    const auto dom = oracle::domain(f33);
    for (int r = 1; r <= 2; ++r) {
        CHECK_THAT(contraction_norm(f33, r), WithinAbs(std::sqrt(oracle::contraction_norm_sq(f33, f33, r, dom)), 1e-12));
    }
}

TEST_CASE("f *_r f is symmetric under swapping its argument blocks") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 40; ++trial) {
        const int k = 2 + trial % 3;
        const auto f = random_kernel(rng, k);
        for (int r = 1; r < k; ++r) {
            const auto c = contract(f, f, r);
            for (const auto& [t, v] : c.entries()) {
                PointTuple swapped(t.begin() + (k - r), t.end());
                swapped.insert(swapped.end(), t.begin(), t.begin() + (k - r));
                CHECK_THAT(c(swapped), WithinAbs(v, 1e-14));
            }
        }
    }
}

TEST_CASE("symmetrize") {
    OrderedKernel g(2, {{{P(1, 1), P(1, 2)}, 1.0}}, false);
    const auto s = symmetrize(g);
    CHECK(s(PointTuple{P(1, 1), P(1, 2)}) == 0.5);
    CHECK(s(PointTuple{P(1, 2), P(1, 1)}) == 0.5);
    CHECK(s.is_symmetric());
    CHECK_FALSE(g.is_symmetric());
    const auto ss = symmetrize(s);
    CHECK(ss.entries() == s.entries());

    const auto f = build_kernel_fkN(2, 3);
    const auto c = symmetrize(contract(f, f, 1));
    CHECK_THAT(c(PointTuple{P(1, 2), P(1, 2)}), WithinAbs(1.0 / 9.0, 1e-15));
    CHECK_THAT(norm_sq(c), WithinAbs(norm_sq(contract(f, f, 1)), 1e-15));
}

TEST_CASE("influence") {
    const auto f = build_kernel_fkN(2, 3);
    CHECK(influence(f, P(7, 7)) == 0.0);
    CHECK_THAT(influence(f, P(1, 2)), WithinAbs(1.0 / 9.0, 1e-15));
    CHECK_THAT(influence(f, P(1, 2)), WithinAbs(oracle::influence(f, P(1, 2), oracle::domain(f)), 1e-15));

    SymmetricKernel g(3, {{{P(1, 1), P(1, 2), P(2, 1)}, 0.3}});
    for (const auto& p : {P(1, 1), P(1, 2), P(2, 1)}) CHECK_THAT(influence(g, p), WithinAbs(0.09, 1e-15));

    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 60; ++trial) {
        const int k = 2 + trial % 3;
        const auto h = random_kernel(rng, k);
        double total = 0.0;
        for (const auto& [a, v] : influences(h)) total += v;
        CHECK_THAT(total, WithinAbs(norm_sq(h) / detail::factorial(k - 1), 1e-12));
        if (trial % 6 == 0) {
            const auto dom = oracle::domain(h);
            for (const auto& a : dom) CHECK_THAT(influence(h, a), WithinAbs(oracle::influence(h, a, dom), 1e-12));
        }
    }
}

TEST_CASE("maximal influence is controlled by the (k-1)-contraction") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 2 + trial % 3;
        const auto f = random_kernel(rng, k);
        CHECK(detail::factorial(k - 1) * max_influence(f) <= std::sqrt(norm_sq(contract(f, f, k - 1))) + 1e-12);
    }
}

TEST_CASE("contraction profile") {
    const auto p = contraction_profile(build_kernel_fkN(2, 3));
    REQUIRE(p.size() == 1);
    CHECK_THAT(p.at(1), WithinAbs(std::sqrt(6.0) / 9.0, 1e-15));

    double prev = 1e9;
    for (int N = 4; N <= 12; ++N) {
        const double v = contraction_profile(build_kernel_fkN(2, N)).at(1);
        CHECK_THAT(v, WithinAbs(std::sqrt(N * (N - 1.0)) / (N * N), 1e-12));
        CHECK(v < prev);
        prev = v;
    }
    const auto single = contraction_profile(SymmetricKernel(3, {{{P(1, 1), P(1, 2), P(2, 2)}, 1.0}}));
    for (const auto& [r, v] : single) CHECK(v > 0.0);
    CHECK_THROWS_AS(contraction_profile(SymmetricKernel(1, {{{P(1, 1)}, 1.0}})), UsageError);
}

TEST_CASE("invariance bound terms") {
    SECTION("degenerate kernel summaries give zero") {
        ChaosComponentSummary c{2, {0.0, 0.0, 0.0}, 0.0};
        std::vector<ChaosComponentSummary> comps{c};
        CHECK(universal_bound(comps, 1.0, 1.0, 1.0, 1.0) == 0.0);
    }
    SECTION("single order-2 component by hand") {
        double prev = 1e300;
        for (int N : {5, 10, 20, 40}) {
            const auto f = build_kernel_fkN(2, N);
            const auto g = f.scaled(1.0 / std::sqrt(2.0 * norm_sq(f)));
            const std::vector<ChaosComponentSummary> comps{summarize_component(g)};
            const auto terms = universal_bound_terms(comps, 1.0);
            CHECK_THAT(terms.delta[0][0], WithinRel(2.0 / std::sqrt(N * (N - 1.0)), 1e-12));
            CHECK_THAT(terms.max_influence, WithinRel(1.0 / (2.0 * N * (N - 1.0)), 1e-12));
            const double bracket = std::cbrt(16.0 * std::sqrt(2.0)) * 2.0;
            CHECK_THAT(terms.third_order_factor,
                       WithinRel((1.0 + std::sqrt(8.0 / M_PI)) * std::pow(bracket, 3) * std::sqrt(terms.max_influence), 1e-12));
            const std::vector<SymmetricKernel> ks{g};
            const double b = universal_bound(ks, 1.0, 0.5, 1.0 / 6.0, influence_budget(ks));
            CHECK(b < prev);
            prev = b;
        }
    }
    SECTION("monotone in every contraction norm and in the maximal influence") {
        const auto f2 = build_kernel_fkN(2, 6);
        const auto f3 = build_kernel_fkN(3, 4);
        std::vector<ChaosComponentSummary> comps{summarize_component(f2.scaled(1.0 / std::sqrt(2.0 * norm_sq(f2)))),
                                                 summarize_component(f3.scaled(1.0 / std::sqrt(6.0 * norm_sq(f3))))};
        const double base = universal_bound(comps, 1.5, 1.0, 1.0, 2.0);
        CHECK(base >= 0.0);
        for (std::size_t j = 0; j < comps.size(); ++j) {
            for (std::size_t s = 0; s < comps[j].contraction_norms.size(); ++s) {
                auto up = comps;
                up[j].contraction_norms[s] += 0.1;
                CHECK(universal_bound(up, 1.5, 1.0, 1.0, 2.0) >= base);
            }
            auto up = comps;
            up[j].max_influence += 0.01;
            CHECK(universal_bound(up, 1.5, 1.0, 1.0, 2.0) >= base);
        }
    }
    SECTION("preconditions") {
        const std::vector<SymmetricKernel> raw{build_kernel_fkN(2, 5)};
        CHECK_THROWS_AS(universal_bound(raw, 1.0, 1.0, 1.0, 1.0), UsageError);
        ChaosComponentSummary c{2, {0.0, 0.0, 0.0}, 0.0};
        std::vector<ChaosComponentSummary> comps{c};
        CHECK_THROWS_AS(universal_bound(comps, 0.5, 1.0, 1.0, 1.0), UsageError);
        std::vector<ChaosComponentSummary> twice{c, c};
        CHECK_THROWS_AS(universal_bound(twice, 1.0, 1.0, 1.0, 1.0), UsageError);
    }
}

TEST_CASE("derivative bounds of cos(t . x)") {
    const std::vector<double> one{1.0};
    CHECK(cosine_derivative_bound(one, 2) == 0.5);
    CHECK_THAT(cosine_derivative_bound(one, 3), WithinAbs(1.0 / 6.0, 1e-15));
    const std::vector<double> two{1.0, 1.0};
    CHECK(cosine_derivative_bound(two, 2) == 1.0);
    CHECK(cosine_derivative_bound(two, 3) == 0.5);
    const std::vector<double> zero{0.0, 0.0};
    CHECK(cosine_derivative_bound(zero, 2) == 0.0);
}

TEST_CASE("kernel CSV round trip") {
    const auto f = build_kernel_fkN(3, 3);
    std::stringstream ss;
    write_kernel_csv(ss, f);
    CHECK(ss.str().rfind("order,3\n", 0) == 0);
    const auto g = read_kernel_csv(ss);
    CHECK(g.order() == 3);
    CHECK(g.entries() == f.entries());
    std::stringstream bad("order,x\n");
    CHECK_THROWS_AS(read_kernel_csv(bad), UsageError);
}
