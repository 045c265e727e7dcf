#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "simatch/counts.hpp"
#include "simatch/matching.hpp"
#include "simatch/rng.hpp"

using namespace simatch;

namespace {

// The five-vertex graph with exactly three perfect matchings, used across
// the probability examples.
BipartiteGraph three_matching_graph() {
    return BipartiteGraph::custom({{0, 1}, {1, 3}, {0, 4}, {2, 3, 4}, {2, 3}});
}

std::vector<int> options_1b(const BipartiteGraph& g, const Partial& p, int i_1based) {
    auto v = allowable_options(g, p, i_1based - 1);
    for (int& x : v) ++x;
    return v;
}

}  // namespace

TEST_CASE("family adjacency") {
    const auto f = BipartiteGraph::fibonacci(1, 4);
    CHECK(f.neighbors(1) == std::vector<int>{0, 1, 2});  // vertex 2 pairs with 1,2,3
    CHECK(f.neighbors(0) == std::vector<int>{0, 1});     // boundary truncation
    const auto d = BipartiteGraph::distance(2, 5);
    CHECK(d.neighbors(2) == std::vector<int>{0, 1, 2, 3, 4});
    CHECK_THROWS_AS(BipartiteGraph::fibonacci(0, 4), validation_error);
    CHECK_THROWS_AS(BipartiteGraph::distance(1, -2), validation_error);
    const auto f2 = BipartiteGraph::fibonacci(2, 6);
    CHECK(f2.lower_bandwidth() == 1);
    CHECK(f2.upper_bandwidth() == 2);
}

TEST_CASE("custom graph text format") {
    std::istringstream in("3\n1 2\n1 2 3\n3\n");
    const auto g = BipartiteGraph::load(in);
    CHECK(g.n() == 3);
    CHECK(g.neighbors(0) == std::vector<int>{0, 1});
    std::ostringstream out;
    g.save(out);
    std::istringstream in2(out.str());
    const auto g2 = BipartiteGraph::load(in2);
    CHECK(g2.neighbors(1) == g.neighbors(1));

    std::istringstream bad("2\n1 5\n2\n");
    CHECK_THROWS_AS(BipartiteGraph::load(bad), validation_error);
    // a vertex with no neighbors cannot be matched
    std::istringstream isolated("2\n1\n\n");
    CHECK_THROWS_AS(BipartiteGraph::load(isolated), validation_error);
}

TEST_CASE("enumeration in lexicographic order") {
    const auto f = BipartiteGraph::fibonacci(1, 4);
    const auto pis = enumerate_matchings(f);
    REQUIRE(pis.size() == 5);
    const std::vector<std::string> expect = {"1 2 3 4", "1 2 4 3", "1 3 2 4", "2 1 3 4", "2 1 4 3"};
    for (std::size_t k = 0; k < pis.size(); ++k) CHECK(matching_to_string(pis[k]) == expect[k]);

    const auto g3 = three_matching_graph();
    const auto ms = enumerate_matchings(g3);
    REQUIRE(ms.size() == 3);
    CHECK(matching_to_string(ms[0]) == "1 2 5 3 4");
    CHECK(matching_to_string(ms[1]) == "1 2 5 4 3");
    CHECK(matching_to_string(ms[2]) == "2 4 1 5 3");

    CHECK(enumerate_matchings(BipartiteGraph::fibonacci(1, 1)).size() == 1);
    CHECK_THROWS_AS(enumerate_matchings(BipartiteGraph::fibonacci(1, 24), 1000), limit_error);
}

TEST_CASE("completion feasibility") {
    const auto f = BipartiteGraph::fibonacci(1, 4);
    Partial p(4);
    p.assign(0, 1);  // 1 -> 2
    CHECK(has_completion(f, p));  // completed by 2 1 3 4
    p.unassign(0);
    p.assign(1, 0);  // 2 -> 1
    p.assign(2, 1);  // 3 -> 2: vertex 1 has no remaining neighbor
    CHECK_FALSE(has_completion(f, p));

    const auto g3 = three_matching_graph();
    Partial q(5);
    q.assign(0, 1);  // u1 -> v2: the rest is forced
    CHECK(has_completion(g3, q));
    std::size_t completions = 0;
    for (const auto& pi : enumerate_matchings(g3))
        if (pi[0] == 1) ++completions;
    CHECK(completions == 1);
}

TEST_CASE("allowable options on fresh graphs") {
    const auto f = BipartiteGraph::fibonacci(1, 4);
    Partial p(4);
    CHECK(options_1b(f, p, 1) == std::vector<int>{1, 2});
    CHECK(options_1b(f, p, 2) == std::vector<int>{1, 2, 3});
    const auto d = BipartiteGraph::distance(2, 5);
    Partial q(5);
    CHECK(options_1b(d, q, 3) == std::vector<int>{1, 2, 3, 4, 5});
}

TEST_CASE("option probes agree on random reachable states") {
    RngStream rng(20240601, 0);
    for (int rep = 0; rep < 60; ++rep) {
        const int n = 4 + rng.next_below(17);  // up to 20
        BipartiteGraph g = [&] {
            switch (rep % 3) {
                case 0: return BipartiteGraph::fibonacci(1, n);
                case 1: return BipartiteGraph::fibonacci(2, n);
                default: return BipartiteGraph::distance(2, n);
            }
        }();
        // random feasible partial state, built with feasibility checking
        Partial p(g.n());
        OptionProbe probe(g);
        const int steps = rng.next_below(g.n());
        for (int s = 0; s < steps; ++s) {
            std::vector<int> open;
            for (int i = 0; i < g.n(); ++i)
                if (!p.assigned(i)) open.push_back(i);
            if (open.empty()) break;
            const int i = open[rng.next_below(static_cast<int>(open.size()))];
            const auto opts = probe.options(p, i);
            REQUIRE_FALSE(opts.empty());
            p.assign(i, opts[rng.next_below(static_cast<int>(opts.size()))]);
        }
        for (int i = 0; i < g.n(); ++i) {
            if (p.assigned(i)) continue;
            const auto incremental = probe.options(p, i);
            const auto recomputed = allowable_options_recompute(g, p, i);
            CHECK(incremental == recomputed);
            if (g.family() == Family::Fibonacci && g.family_param() == 1)
                CHECK(allowable_options_fib1(g, p, i) == recomputed);
        }
    }
}

TEST_CASE("permanent bound") {
    CHECK(bregman_bound(BipartiteGraph::custom({{0}})) == 0.0);
    const auto f = BipartiteGraph::fibonacci(1, 200);
    const double exact_deg = bregman_bound(f);
    const double uniform_deg = bregman_bound_uniform(f);
    // boundary vertices have degree 2, so the per-vertex product is smaller
    CHECK(exact_deg < uniform_deg);
    const double correction = 2.0 * (std::log(6.0) / 3.0 - std::log(2.0) / 2.0);
    CHECK_THAT(uniform_deg - exact_deg, Catch::Matchers::WithinAbs(correction, 1e-9));
    // uniform-degree form is log(6^{n/3}/F_{n,1})
    const double expected = 200.0 * std::log(6.0) / 3.0 - fib1_counts().log_at(200);
    CHECK_THAT(uniform_deg, Catch::Matchers::WithinAbs(expected, 1e-9));
    CHECK_THAT(uniform_deg, Catch::Matchers::WithinRel(std::log(1.6446e10), 5e-4));
}
