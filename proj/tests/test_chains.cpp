#include <catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "tracefluct/tracefluct.hpp"

using namespace tracefluct;

namespace {

using Blocks = std::vector<std::vector<int>>;

std::set<IndexPoint> walk_pairs(const std::vector<int>& w) {
    std::set<IndexPoint> s;
    for (std::size_t a = 0; a < w.size(); ++a) s.insert(IndexPoint(w[a], w[(a + 1) % w.size()]));
    return s;
}

// Pairs of w that occur at exactly one position.
std::set<IndexPoint> lonely_pairs(const std::vector<int>& w) {
    std::map<IndexPoint, int> m;
    for (std::size_t a = 0; a < w.size(); ++a) ++m[IndexPoint(w[a], w[(a + 1) % w.size()])];
    std::set<IndexPoint> s;
    for (const auto& [p, c] : m) {
        if (c == 1) s.insert(p);
    }
    return s;
}

// Direct reading of C_pi on the written pairs of both walks.
bool in_class_oracle(const Chain& c, const Partition& pi) {
    const auto lab = pi.labels();
    const std::vector<int> want(lab.begin(), lab.end());
    if (oracle::pattern(c.upper) != want || oracle::pattern(c.lower) != want) return false;
    const auto up = walk_pairs(c.upper);
    const auto low = walk_pairs(c.lower);
    const auto lu = lonely_pairs(c.upper);
    const auto ll = lonely_pairs(c.lower);
    if (lu.empty()) {
        for (const auto& p : up) {
            if (low.contains(p)) return true;
        }
        return false;
    }
    for (const auto& p : lu) {
        if (!low.contains(p)) return false;
    }
    for (const auto& p : ll) {
        if (!up.contains(p)) return false;
    }
    return true;
}

std::vector<std::vector<int>> oracle_walks(const Partition& pi, int N) {
    const auto lab = pi.labels();
    const std::vector<int> want(lab.begin(), lab.end());
    std::vector<std::vector<int>> out;
    oracle::odometer(N, pi.k(), [&](const std::vector<int>& i) {
        std::vector<int> w(i);
        for (int& x : w) ++x;
        if (oracle::pattern(w) == want) out.push_back(w);
    });
    return out;
}

}  // namespace

TEST_CASE("partitions") {
    const std::vector<std::size_t> bell{2, 5, 15, 52, 203, 877};
    for (int k = 2; k <= 7; ++k) {
        CHECK(enumerate_partitions(k).size() == bell[k - 2]);
        CHECK(enumerate_partitions(k, PartitionFamily::Q).size() == bell[k - 2] - 1);
    }
    CHECK(enumerate_partitions(3).size() == 5);
    CHECK(enumerate_partitions(3, PartitionFamily::Q).size() == 4);
    CHECK(enumerate_partitions(4, PartitionFamily::Q).size() == 14);
    CHECK_THROWS_AS(enumerate_partitions(1), UsageError);

    const auto p = Partition::from_blocks(5, Blocks{{1, 2}, {3}, {4}, {5}});
    CHECK(p.block_count() == 4);
    CHECK(p.singleton_blocks() == std::vector<int>{2, 3, 4});
    CHECK(p.block_of(2) == 1);
    CHECK(Partition::from_labels({7, 7, 3, 7}) == Partition::from_blocks(4, Blocks{{1, 2, 4}, {3}}));
    CHECK_THROWS_AS(Partition::from_blocks(3, Blocks{{1, 2}, {2, 3}}), UsageError);
    CHECK_THROWS_AS(Partition::from_blocks(3, Blocks{{1, 2}}), UsageError);
    CHECK_THROWS_AS(Partition::from_blocks(3, Blocks{{1, 4}, {2, 3}}), UsageError);
    CHECK_THROWS_AS(Partition(std::vector<int>{0, 2, 1}), UsageError);
    CHECK_THROWS_AS(Partition(std::vector<int>{1, 0}), UsageError);
}

TEST_CASE("cycle partitions") {
    const std::vector<int> alt{0, 1, 0, 1};
    CHECK(cycle_partition(std::span<const int>(alt)) == Partition::from_blocks(4, Blocks{{1, 3}, {2, 4}}));
    const std::vector<int> flat{2, 2, 2};
    CHECK(cycle_partition(std::span<const int>(flat)) == Partition::one_block(3));
    const std::vector<int> distinct{0, 1, 2};
    CHECK(cycle_partition(std::span<const int>(distinct)) == Partition::singletons(3));

    for (int k = 2; k <= 4; ++k) {
        for (int N = 1; N <= 4; ++N) {
            std::size_t total = 0;
            for (const auto& pi : enumerate_partitions(k)) {
                const auto w = walks_with_partition(pi, N);
                CHECK(w == oracle_walks(pi, N));
                CHECK(std::set<std::vector<int>>(w.begin(), w.end()).size() == w.size());
                for (const auto& x : w) CHECK(detail::walk_partition(x) == pi);
                total += w.size();
            }
            CHECK(total == static_cast<std::size_t>(std::pow(N, k)));
        }
    }
    std::size_t n = 0;
    for (const auto& pi : enumerate_partitions(3)) n += walks_with_partition(pi, 3).size();
    CHECK(n == 27);
}

TEST_CASE("chains") {
    const Chain c = Chain::from_pairs({IndexPoint(1, 2), IndexPoint(2, 1), IndexPoint(3, 3), IndexPoint(3, 3)});
    CHECK(c.upper == std::vector<int>{1, 2});
    CHECK(c.lower == std::vector<int>{3, 3});
    CHECK(c.upper_pair(2) == IndexPoint(2, 1));
    CHECK_THROWS_AS(Chain::from_pairs({IndexPoint(1, 2), IndexPoint(1, 1), IndexPoint(3, 3), IndexPoint(3, 3)}), UsageError);
    CHECK_THROWS_AS(Chain({1, 2}, {1}), UsageError);
    CHECK_THROWS_AS(Chain({0, 2}, {1, 1}), UsageError);
}

TEST_CASE("worked chain examples") {
    SECTION("alternating walks share the pattern but no pair") {
        const Chain c({1, 2, 1, 2}, {3, 1, 3, 1});
        const auto pi = Partition::from_blocks(4, Blocks{{1, 3}, {2, 4}});
        CHECK(chain_has_partition(c, pi));
        CHECK_FALSE(class_membership(c, ChainClassDescriptor::plain(pi)));
        CHECK_FALSE(in_class_oracle(c, pi));
    }
    SECTION("pattern without a shared singleton pair") {
        const Chain c({1, 1, 2, 1, 1, 1, 3}, {1, 1, 4, 1, 1, 1, 5});
        const auto pi = Partition::from_blocks(7, Blocks{{1, 4, 5}, {2}, {3}, {6}, {7}});
        CHECK(chain_has_partition(c, pi));
        CHECK_FALSE(class_membership(c, ChainClassDescriptor::plain(pi)));
        CHECK_FALSE(in_class_oracle(c, pi));
    }
    SECTION("singleton pairs matched across walks") {
        const Chain c({1, 1, 1, 1, 2, 5}, {2, 2, 2, 2, 5, 1});
        const auto pi = Partition::from_blocks(6, Blocks{{1, 2, 3}, {4}, {5}, {6}});
        CHECK(chain_has_partition(c, pi));
        CHECK(class_membership(c, ChainClassDescriptor::plain(pi)));
        CHECK(in_class_oracle(c, pi));
    }
    SECTION("bijection classes") {
        const auto pi = Partition::from_blocks(5, Blocks{{1, 2}, {3}, {4}, {5}});
        const Chain c1({1, 1, 1, 2, 5}, {2, 2, 2, 5, 1});
        CHECK(class_membership(c1, ChainClassDescriptor::bijection(pi, {{2, 4}, {3, 2}, {4, 3}})));
        CHECK_FALSE(class_membership(c1, ChainClassDescriptor::bijection(pi, {{2, 2}, {3, 3}, {4, 4}})));
        CHECK(blocks_correspond(c1, pi, 2, 4));
        CHECK_FALSE(blocks_correspond(c1, pi, 2, 2));
        const Chain c2({1, 1, 1, 2, 5}, {1, 1, 1, 2, 5});
        CHECK(class_membership(c2, ChainClassDescriptor::bijection(pi, {{2, 2}, {3, 3}, {4, 4}})));
        const auto members = enumerate_class(ChainClassDescriptor::bijection(pi, {{2, 4}, {3, 2}, {4, 3}}), 5, 5, true).members;
        CHECK(std::find(members.begin(), members.end(), c1) != members.end());
    }
    SECTION("one-block chain") {
        const Chain c({3, 3}, {3, 3});
        const auto one = Partition::one_block(2);
        CHECK(class_membership(c, ChainClassDescriptor::single(one, 1, 1)));
        CHECK_FALSE(class_membership(Chain({3, 3}, {2, 2}), ChainClassDescriptor::plain(one)));
    }
    SECTION("witness on a singleton-free pattern") {
        const auto pi = Partition::from_blocks(6, Blocks{{1, 2}, {3, 5}, {4, 6}});
        CHECK(dof_witness_check(ChainClassDescriptor::single(pi, 1, 1), 6, 3, {1, 4}, {4}));
    }
    SECTION("anchors") {
        const auto p9 = Partition::from_blocks(9, Blocks{{1}, {2}, {3, 6, 7}, {4}, {5}, {8}, {9}});
        const auto a9 = detail::find_anchor(p9);
        CHECK(a9.s_star == 8);
        CHECK(a9.u_star == 3);
        CHECK(a9.consecutive);
        CHECK(proof_witnesses(p9).front().construction == "B1");

        const auto p8 = Partition::from_blocks(8, Blocks{{1, 2}, {3, 5}, {4, 6}, {7}, {8}});
        const auto a8 = detail::find_anchor(p8);
        CHECK(a8.s_star == 7);
        CHECK(a8.u_star == 3);
        CHECK_FALSE(a8.consecutive);
        const auto w8 = proof_witnesses(p8);
        CHECK(w8.front().construction == "B2");
        // the block left out of D is the one after position 4
        CHECK(w8.front().D == std::vector<int>{1, 4, 7, 8});
        CHECK(dof_witness_check(ChainClassDescriptor::bijection(p8, {{2, 4}, {3, 5}, {4, 2}, {5, 3}}), 8, 3, {4, 7, 8}, {}));
    }
}

TEST_CASE("class counts") {
    for (int k = 2; k <= 4; ++k) {
        for (int N = 1; N <= 4; ++N) {
            CHECK(enumerate_class(ChainClassDescriptor::plain(Partition::one_block(k)), k, N).count == static_cast<std::uint64_t>(N));
        }
    }
    CHECK_THROWS_AS(dof_witness_check(ChainClassDescriptor::plain(Partition::one_block(2)), 2, 2, {}, {}), UsageError);
    CHECK_THROWS_AS(dof_witness_check(ChainClassDescriptor::plain(Partition::one_block(2)), 2, 2, {3}, {}), UsageError);
    CHECK_THROWS_AS(enumerate_class(ChainClassDescriptor::plain(Partition::one_block(3)), 2, 2), UsageError);
    CHECK_THROWS_AS(enumerate_class(ChainClassDescriptor::plain(Partition::one_block(5)), 5, 50), BudgetError);

    for (int k = 2; k <= 4; ++k) {
        for (int N = 2; N <= 4; ++N) {
            for (const auto& pi : enumerate_partitions(k, PartitionFamily::Q)) {
                const auto members = enumerate_class(ChainClassDescriptor::plain(pi), k, N, true).members;
                const std::set<Chain> got(members.begin(), members.end());
                std::set<Chain> want;
                const auto walks = oracle_walks(pi, N);
                for (const auto& a : walks) {
                    for (const auto& b : walks) {
                        Chain c(a, b);
                        if (in_class_oracle(c, pi)) want.insert(c);
                    }
                }
                CHECK(got == want);
            }
        }
    }
}

TEST_CASE("covering families and witnesses") {
    for (int k = 2; k <= 6; ++k) {
        const int N = k <= 4 ? 4 : 3;
        for (const auto& pi : enumerate_partitions(k, PartitionFamily::Q)) {
            INFO("k=" << k << " pi=" << pi);
            const auto plain = enumerate_class(ChainClassDescriptor::plain(pi), k, N, true).members;
            std::set<Chain> cover;
            for (const auto& d : union_family(pi)) {
                const auto m = enumerate_class(d, k, N, true).members;
                cover.insert(m.begin(), m.end());
            }
            CHECK(cover == std::set<Chain>(plain.begin(), plain.end()));

            for (const auto& w : proof_witnesses(pi)) {
                const int q = static_cast<int>(w.D.size() + w.E.size());
                CHECK(q <= k - 1);
                CHECK(dof_witness_check(w.descriptor, k, N, w.D, w.E));
                CHECK(enumerate_class(w.descriptor, k, N).count <= static_cast<std::uint64_t>(std::pow(N, q)));
            }
        }
    }
    CHECK_THROWS_AS(proof_witnesses(Partition::singletons(3)), UsageError);
}

TEST_CASE("nonvanishing covariances sit inside the class") {
    for (const auto& name : {"rademacher", "two_point(0.2)"}) {
        const auto d = make_distribution(name);
        for (int k = 2; k <= 3; ++k) {
            for (int N = 2; N <= 4; ++N) {
                for (const auto& pi : enumerate_partitions(k, PartitionFamily::Q)) {
                    for (const auto& c : nonvanishing_pairs(d, pi, k, N)) {
                        CHECK(class_membership(c, ChainClassDescriptor::plain(pi)));
                        CHECK(in_class_oracle(c, pi));
                    }
                }
            }
        }
    }
    const auto rad = make_distribution("rademacher");
    const auto nv = nonvanishing_pairs(rad, Partition::one_block(2), 2, 2);
    CHECK(std::find(nv.begin(), nv.end(), Chain({1, 1}, {2, 2})) == nv.end());
    CHECK(std::find(nv.begin(), nv.end(), Chain({1, 1}, {1, 1})) == nv.end());  // X^2 = 1 under signs
    const auto g = make_distribution("gaussian");
    const auto nvg = nonvanishing_pairs(g, Partition::one_block(2), 2, 2);
    CHECK(nvg.size() == 2);
}

TEST_CASE("descriptors") {
    const auto pi = Partition::from_blocks(5, Blocks{{1, 2}, {3}, {4}, {5}});
    CHECK_THROWS_AS(ChainClassDescriptor::single(pi, 0, 1), UsageError);
    CHECK_THROWS_AS(ChainClassDescriptor::single(pi, 1, 5), UsageError);
    CHECK_THROWS_AS(ChainClassDescriptor::bijection(pi, {{2, 3}, {3, 3}, {4, 2}}), UsageError);
    CHECK_THROWS_AS(ChainClassDescriptor::bijection(pi, {{2, 3}, {3, 2}}), UsageError);
    CHECK_THROWS_AS(ChainClassDescriptor::bijection(pi, {{2, 3}, {3, 2}, {4, 9}}), UsageError);
    CHECK(ChainClassDescriptor::plain(pi).label() == "plain");
    CHECK(ChainClassDescriptor::single(pi, 1, 2).label() == "single(1;2)");
    CHECK(ChainClassDescriptor::bijection(pi, {{2, 4}, {3, 2}, {4, 3}}).label() == "bijection(2->4;3->2;4->3)");
    for (const auto& d : union_family(pi)) CHECK(d.kind() == ChainClassDescriptor::Kind::bijection);
    const auto paired = Partition::from_blocks(4, Blocks{{1, 3}, {2, 4}});
    CHECK(union_family(paired).size() == 4);
}
