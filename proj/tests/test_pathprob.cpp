#include <catch2/catch_amalgamated.hpp>

#include "simatch/moments.hpp"
#include "simatch/sampler.hpp"

using namespace simatch;

namespace {

BigRat rational_total(const Sampler& s) {
    BigRat total = 0;
    for (const auto& pi : enumerate_matchings(*s.g)) total += *path_probability(s, pi, true).exact;
    return total;
}

double float_total(const Sampler& s) {
    double total = 0;
    for (const auto& pi : enumerate_matchings(*s.g)) total += std::exp(path_probability(s, pi).log_p);
    return total;
}

}  // namespace

TEST_CASE("uniform-rule samplers are exactly normalized") {
    for (int n : {1, 2, 5, 8}) {
        const auto f1 = BipartiteGraph::fibonacci(1, n);
        CHECK(rational_total(make_sampler(f1, OrderPolicy::fixed(), RuleKind::Uniform)) == 1);
        CHECK(rational_total(make_sampler(f1, OrderPolicy::random(), RuleKind::Uniform)) == 1);
        CHECK(rational_total(make_sampler(f1, OrderPolicy::greedy_fib1(), RuleKind::Uniform)) == 1);
        std::vector<int> order(n);
        for (int i = 0; i < n; ++i) order[i] = i;
        std::rotate(order.begin(), order.begin() + n / 2, order.end());
        CHECK(rational_total(make_sampler(f1, OrderPolicy::explicit_order(order), RuleKind::Uniform)) ==
              1);
        const auto f2 = BipartiteGraph::fibonacci(2, n);
        CHECK(rational_total(make_sampler(f2, OrderPolicy::fixed(), RuleKind::Uniform)) == 1);
        CHECK(rational_total(make_sampler(f2, OrderPolicy::random_cycle(), RuleKind::Uniform)) == 1);
        CHECK(rational_total(make_sampler(f2, OrderPolicy::greedy_cycle_fib2(), RuleKind::Uniform)) ==
              1);
        const auto d2 = BipartiteGraph::distance(2, n);
        CHECK(rational_total(make_sampler(d2, OrderPolicy::fixed(), RuleKind::Uniform)) == 1);
        if (n <= 7)
            CHECK(rational_total(make_sampler(d2, OrderPolicy::random(), RuleKind::Uniform)) == 1);
    }
}

TEST_CASE("tuned rules are normalized to floating accuracy") {
    static const auto f1 = BipartiteGraph::fibonacci(1, 8);
    static const auto f2 = BipartiteGraph::fibonacci(2, 8);
    static const auto d2 = BipartiteGraph::distance(2, 8);
    CHECK_THAT(float_total(make_sampler(f1, OrderPolicy::fixed(), RuleKind::FibStarFixed)),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(float_total(make_sampler(f1, OrderPolicy::greedy_fib1(), RuleKind::FibStarGreedy)),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(float_total(make_sampler(f2, OrderPolicy::fixed(), RuleKind::Fib2StarFixed)),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(float_total(make_sampler(d2, OrderPolicy::fixed(), RuleKind::Dist2StarFixed)),
               Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("fixed-order weights count transpositions") {
    // P_f(pi) 2^{n-k-1} = 1 where k counts transpositions excluding (n, n-1)
    for (int n : {3, 7, 12}) {
        const auto g = BipartiteGraph::fibonacci(1, n);
        const auto s = make_sampler(g, OrderPolicy::fixed(), RuleKind::Uniform);
        for (const auto& pi : enumerate_matchings(g)) {
            int k = 0;
            for (int i = 0; i + 1 < n; ++i)
                if (pi[i] == i + 1 && !(i == n - 2)) ++k;
            const auto pp = path_probability(s, pi, true);
            CHECK(*pp.exact * BigRat(BigInt(1) << (n - k - 1)) == 1);
        }
    }
}

TEST_CASE("unreachable matchings are rejected") {
    const auto g = BipartiteGraph::fibonacci(1, 4);
    const auto s = make_sampler(g, OrderPolicy::fixed(), RuleKind::Uniform);
    CHECK_THROWS_AS(path_probability(s, matching_from_string("2413")), not_a_matching_error);
    CHECK_THROWS_AS(path_probability(s, matching_from_string("1234567")), not_a_matching_error);
}

TEST_CASE("interval recursion agrees with the subset recursion") {
    const auto g = BipartiteGraph::fibonacci(1, 8);
    const auto s = make_sampler(g, OrderPolicy::random(), RuleKind::Uniform);
    for (const auto& pi : enumerate_matchings(g)) {
        const BigRat via_intervals = *path_probability(s, pi, true).exact;
        const BigRat via_subsets =
            detail::subset_average<BigRat>(g, pi, [](int c) { return BigRat(1, c); });
        CHECK(via_intervals == via_subsets);
    }
}
