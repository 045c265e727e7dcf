#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "simatch/moments.hpp"
#include "simatch/sampler.hpp"

using namespace simatch;

namespace {

BipartiteGraph three_matching_graph() {
    return BipartiteGraph::custom({{0, 1}, {1, 3}, {0, 4}, {2, 3, 4}, {2, 3}});
}

BigRat exact_prob(const Sampler& s, const std::string& pi) {
    return *path_probability(s, matching_from_string(pi), true).exact;
}

}  // namespace

TEST_CASE("tuned tables are normalized") {
    const StarTables& t = star_rule_tables();
    const double phi = golden_ratio();
    CHECK_THAT(1 / phi + 1 / (phi * phi), Catch::Matchers::WithinAbs(1.0, 1e-15));
    CHECK_THAT(2 / (phi * phi) + 1 / std::pow(phi, 3), Catch::Matchers::WithinAbs(1.0, 1e-15));
    auto sum = [](const StarTable& st) {
        double s = 0;
        for (double p : st.p) s += p;
        return s;
    };
    CHECK_THAT(sum(t.fib_fixed), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(sum(t.fib_greedy), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(sum(t.fib2_fixed), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(sum(t.dist2_case1), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(sum(t.dist2_case2), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_FALSE(t.dist2_case1.renormalized);
    CHECK_FALSE(t.dist2_case2.renormalized);
}

TEST_CASE("fixed-order probabilities on the three-matching graph") {
    const auto g = three_matching_graph();
    const auto s = make_sampler(g, OrderPolicy::fixed(), RuleKind::Uniform);
    CHECK(exact_prob(s, "1 2 5 3 4") == BigRat(1, 4));
    CHECK(exact_prob(s, "1 2 5 4 3") == BigRat(1, 4));
    CHECK(exact_prob(s, "2 4 1 5 3") == BigRat(1, 2));
}

TEST_CASE("two schemes on the size-4 fibonacci graph") {
    const auto g = BipartiteGraph::fibonacci(1, 4);
    const auto fixed = make_sampler(g, OrderPolicy::fixed(), RuleKind::Uniform);
    const std::map<std::string, BigRat> p1 = {{"1234", {1, 8}},
                                              {"2134", {1, 4}},
                                              {"1324", {1, 4}},
                                              {"1243", {1, 8}},
                                              {"2143", {1, 4}}};
    for (const auto& [pi, want] : p1) CHECK(exact_prob(fixed, pi) == want);

    const auto byorder =
        make_sampler(g, OrderPolicy::explicit_order({1, 2, 0, 3}), RuleKind::Uniform);
    const std::map<std::string, BigRat> p2 = {{"1234", {1, 6}},
                                              {"2134", {1, 6}},
                                              {"1324", {1, 3}},
                                              {"1243", {1, 6}},
                                              {"2143", {1, 6}}};
    for (const auto& [pi, want] : p2) CHECK(exact_prob(byorder, pi) == want);
}

TEST_CASE("greedy pivot rule") {
    CHECK(greedy_next_index(0, 8) == 1);  // fresh: index 2 is matched first
    CHECK(greedy_next_index(3, 8) == 4);  // after pi(2)=3 settles 1..3
    CHECK(greedy_next_index(2, 8) == 3);  // after pi(2)=1 settles 1..2
    CHECK(greedy_next_index(7, 8) == 7);  // single leftover index
}

TEST_CASE("cycle configuration menus") {
    const auto g = BipartiteGraph::fibonacci(2, 9);
    std::vector<char> det(9, 0);
    CHECK(cycle_options_fib2(g, det, 4).size() == 6);
    const auto at_bottom = cycle_options_fib2(g, det, 0);
    REQUIRE(at_bottom.size() == 3);  // fixed point, right transposition, right 3-cycle
    CHECK(at_bottom[0][0] == 0);
    CHECK(at_bottom[1][0] == 1);
    CHECK(at_bottom[2][0] == 2);
    CHECK(cycle_options_fib2(g, det, 8).size() == 3);
    CHECK(cycle_options_fib2(g, det, 1).size() == 5);

    const auto& menu = fib2_greedy_menu();
    REQUIRE(menu.size() == 9);
    std::map<std::size_t, int> spans;
    for (const auto& pat : menu) ++spans[pat.size()];
    CHECK(spans[3] == 4);
    CHECK(spans[4] == 3);
    CHECK(spans[5] == 2);
}

TEST_CASE("unsupported combinations are rejected") {
    const auto d = BipartiteGraph::distance(2, 6);
    CHECK_THROWS_AS(make_sampler(d, OrderPolicy::fixed(), RuleKind::FibStarFixed), unsupported_error);
    CHECK_THROWS_AS(make_sampler(d, OrderPolicy::greedy_fib1(), RuleKind::Uniform), unsupported_error);
    const auto f = BipartiteGraph::fibonacci(1, 6);
    CHECK_THROWS_AS(make_sampler(f, OrderPolicy::random_cycle(), RuleKind::Uniform), unsupported_error);
    CHECK_THROWS_AS(make_sampler(f, OrderPolicy::fixed(), RuleKind::Dist2StarFixed), unsupported_error);
    CHECK_THROWS_AS(make_sampler(f, OrderPolicy::explicit_order({0, 0, 1}), RuleKind::Uniform),
                    validation_error);
}

TEST_CASE("traces are valid matchings with consistent weights") {
    RngStream rng(99, 0);
    std::vector<Sampler> samplers;
    static const auto f1 = BipartiteGraph::fibonacci(1, 17);
    static const auto f2 = BipartiteGraph::fibonacci(2, 17);
    static const auto d2 = BipartiteGraph::distance(2, 17);
    samplers.push_back(make_sampler(f1, OrderPolicy::fixed(), RuleKind::Uniform));
    samplers.push_back(make_sampler(f1, OrderPolicy::random(), RuleKind::Uniform));
    samplers.push_back(make_sampler(f1, OrderPolicy::greedy_fib1(), RuleKind::Uniform));
    samplers.push_back(make_sampler(f1, OrderPolicy::fixed(), RuleKind::FibStarFixed));
    samplers.push_back(make_sampler(f1, OrderPolicy::greedy_fib1(), RuleKind::FibStarGreedy));
    samplers.push_back(make_sampler(f2, OrderPolicy::fixed(), RuleKind::Uniform));
    samplers.push_back(make_sampler(f2, OrderPolicy::random_cycle(), RuleKind::Uniform));
    samplers.push_back(make_sampler(f2, OrderPolicy::greedy_cycle_fib2(), RuleKind::Uniform));
    samplers.push_back(make_sampler(f2, OrderPolicy::fixed(), RuleKind::Fib2StarFixed));
    samplers.push_back(make_sampler(d2, OrderPolicy::fixed(), RuleKind::Uniform));
    samplers.push_back(make_sampler(d2, OrderPolicy::random(), RuleKind::Uniform));
    samplers.push_back(make_sampler(d2, OrderPolicy::fixed(), RuleKind::Dist2StarFixed));

    for (const auto& s : samplers) {
        for (int k = 0; k < 100; ++k) {
            const DecisionTrace tr = sample(s, rng, true, true);
            REQUIRE(s.g->is_perfect_matching(tr.pi));
            double lw = 0;
            for (const auto& st : tr.steps) lw -= std::log(st.prob);
            CHECK_THAT(tr.logT, Catch::Matchers::WithinAbs(lw, 1e-10));
            if (tr.weight_exact)
                CHECK_THAT(tr.logT,
                           Catch::Matchers::WithinAbs(
                               std::log(tr.weight_exact->convert_to<double>()), 1e-9));
        }
    }
}

TEST_CASE("trace weight equals the replayed path probability for deterministic orders") {
    RngStream rng(7, 0);
    static const auto f1 = BipartiteGraph::fibonacci(1, 12);
    static const auto d2 = BipartiteGraph::distance(2, 12);
    for (const auto& s : {make_sampler(f1, OrderPolicy::fixed(), RuleKind::Uniform),
                          make_sampler(f1, OrderPolicy::greedy_fib1(), RuleKind::FibStarGreedy),
                          make_sampler(d2, OrderPolicy::fixed(), RuleKind::Dist2StarFixed)}) {
        for (int k = 0; k < 50; ++k) {
            const DecisionTrace tr = sample(s, rng);
            const PathProb pp = path_probability(s, tr.pi);
            CHECK_THAT(tr.logT, Catch::Matchers::WithinAbs(-pp.log_p, 1e-10));
        }
    }
}

TEST_CASE("random-order trace weights average to the path probability") {
    // brute-force order exhaustion, written independently of the library's
    // memoized recursion
    const auto g = BipartiteGraph::fibonacci(1, 6);
    const auto s = make_sampler(g, OrderPolicy::random(), RuleKind::Uniform);
    for (const auto& pi : enumerate_matchings(g)) {
        std::function<double(Partial&)> brute = [&](Partial& p) -> double {
            std::vector<int> open;
            for (int i = 0; i < g.n(); ++i)
                if (!p.assigned(i)) open.push_back(i);
            if (open.empty()) return 1.0;
            double total = 0;
            for (int i : open) {
                auto opts = allowable_options_recompute(g, p, i);
                // eager closure of the forced transposition partner
                p.assign(i, pi[i]);
                const bool closed = pi[i] != i && !p.assigned(pi[i]);
                if (closed) p.assign(pi[i], i);
                total += 1.0 / static_cast<double>(opts.size()) * brute(p);
                if (closed) p.unassign(pi[i]);
                p.unassign(i);
            }
            return total / static_cast<double>(open.size());
        };
        Partial p(g.n());
        const double expect = brute(p);
        CHECK_THAT(std::exp(path_probability(s, pi).log_p), Catch::Matchers::WithinRel(expect, 1e-12));
    }
}

TEST_CASE("empirical frequencies match path probabilities") {
    struct Case {
        BipartiteGraph g;
        Sampler s;
    };
    static const auto f1 = BipartiteGraph::fibonacci(1, 6);
    static const auto f2 = BipartiteGraph::fibonacci(2, 6);
    for (const auto& s : {make_sampler(f1, OrderPolicy::random(), RuleKind::Uniform),
                          make_sampler(f2, OrderPolicy::random_cycle(), RuleKind::Uniform)}) {
        const std::size_t N = 200000;
        std::map<Matching, std::size_t> freq;
        for (std::size_t k = 0; k < N; ++k) {
            RngStream rng(4242, k);
            ++freq[sample(s, rng, false).pi];
        }
        for (const auto& pi : enumerate_matchings(*s.g)) {
            const double p = std::exp(path_probability(s, pi).log_p);
            const double sd = std::sqrt(p * (1 - p) * N);
            const double observed = static_cast<double>(freq[pi]);
            CHECK_THAT(observed, Catch::Matchers::WithinAbs(p * N, 4 * sd));
        }
    }
}

TEST_CASE("fixed-order state machines agree with generic feasibility") {
    RngStream rng(314, 0);
    for (int rep = 0; rep < 40; ++rep) {
        const int n = 12 + rng.next_below(12);  // exercises the capped state cache
        if (rep % 2 == 0) {
            Dist2FixedProcess proc(n, RuleKind::Uniform);
            const auto g = BipartiteGraph::distance(2, n);
            Partial mirror(n);
            Menu menu;
            while (!proc.done()) {
                const int i = proc.pick_location(nullptr);
                proc.build_menu(i, menu);
                std::vector<int> opts;
                for (const auto& mv : menu.moves) opts.push_back(mv.assigns[0][1]);
                std::sort(opts.begin(), opts.end());
                REQUIRE(opts == allowable_options_recompute(g, mirror, i));
                const int k = rng.next_below(static_cast<int>(menu.moves.size()));
                mirror.assign(i, menu.moves[k].assigns[0][1]);
                proc.apply(menu.moves[k]);
            }
        } else {
            Fib2FixedProcess proc(n, RuleKind::Uniform);
            const auto g = BipartiteGraph::fibonacci(2, n);
            Partial mirror(n);
            Menu menu;
            while (!proc.done()) {
                const int i = proc.pick_location(nullptr);
                proc.build_menu(i, menu);
                std::vector<int> opts;
                for (const auto& mv : menu.moves) opts.push_back(mv.assigns[0][1]);
                std::sort(opts.begin(), opts.end());
                REQUIRE(opts == allowable_options_recompute(g, mirror, i));
                const int k = rng.next_below(static_cast<int>(menu.moves.size()));
                mirror.assign(i, menu.moves[k].assigns[0][1]);
                proc.apply(menu.moves[k]);
            }
        }
    }
}

TEST_CASE("uniform matching samplers are uniform") {
    for (const auto& g : {BipartiteGraph::fibonacci(1, 7), BipartiteGraph::fibonacci(2, 6),
                          BipartiteGraph::distance(2, 6)}) {
        const auto ms = enumerate_matchings(g);
        std::map<Matching, std::size_t> freq;
        const std::size_t N = 150000;
        for (std::size_t k = 0; k < N; ++k) {
            RngStream rng(808, k);
            ++freq[sample_uniform_matching(g, rng)];
        }
        const double p = 1.0 / static_cast<double>(ms.size());
        const double sd = std::sqrt(p * (1 - p) * N);
        for (const auto& pi : ms)
            CHECK_THAT(static_cast<double>(freq[pi]), Catch::Matchers::WithinAbs(p * N, 4.5 * sd));
    }
    CHECK_THROWS_AS(
        [] {
            RngStream rng(1, 0);
            return sample_uniform_matching(BipartiteGraph::custom({{0}}), rng);
        }(),
        unsupported_error);
}

TEST_CASE("prefix-transposition tables agree") {
    for (int n = 0; n <= 30; ++n) CHECK(dist2_prefix_counts().at(n) == count_prefix_d2(n));
}

TEST_CASE("trace serialization round trip") {
    const auto g = BipartiteGraph::fibonacci(1, 6);
    const auto s = make_sampler(g, OrderPolicy::fixed(), RuleKind::Uniform);
    RngStream rng(5, 0);
    const DecisionTrace tr = sample(s, rng, true, true);
    const std::string line = tr.to_line();
    // permutation, tab, logT, tab, step log
    const auto tab1 = line.find('\t');
    const auto tab2 = line.find('\t', tab1 + 1);
    REQUIRE(tab1 != std::string::npos);
    REQUIRE(tab2 != std::string::npos);
    CHECK(matching_from_string(line.substr(0, tab1)) == tr.pi);
    CHECK_THAT(std::stod(line.substr(tab1 + 1, tab2 - tab1 - 1)),
               Catch::Matchers::WithinRel(tr.logT, 1e-15));
}
