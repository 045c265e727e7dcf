#include <catch2/catch_amalgamated.hpp>

#include "simatch/analytics.hpp"
#include "simatch/rng.hpp"

using namespace simatch;

namespace {
// matches a printed decimal to plus/minus one unit in its last digit
void check_printed(double value, double printed, double last_digit) {
    CHECK_THAT(value, Catch::Matchers::WithinAbs(printed, last_digit * 1.0000001));
}
}  // namespace

TEST_CASE("algebraic constants satisfy their defining equations") {
    const auto& k = closed_form_constants();
    CHECK_THAT(k.phi * k.phi - k.phi - 1, Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(std::pow(k.phi2, 3) - std::pow(k.phi2, 2) - k.phi2 - 1,
               Catch::Matchers::WithinAbs(0.0, 1e-12));
    CHECK_THAT(std::pow(k.gamma2, 5) - 2 * std::pow(k.gamma2, 4) - 2 * std::pow(k.gamma2, 2) + 1,
               Catch::Matchers::WithinAbs(0.0, 1e-12));
    const double g = k.gamma2;
    CHECK_THAT(k.gamma2_prime,
               Catch::Matchers::WithinAbs(
                   (g * g * g * g + g * g * g + g * g - g - 1) / (2 * std::pow(g, 5)), 1e-14));
}

TEST_CASE("growth constants reproduce exact count ratios") {
    const auto& k = closed_form_constants();
    const double f2 = fib2_counts().log_at(200);
    CHECK_THAT(std::exp(f2 - 201 * std::log(k.phi2)), Catch::Matchers::WithinRel(k.c2, 1e-8));
    const double d2 = dist2_counts().log_at(200);
    CHECK_THAT(std::exp(d2 - 201 * std::log(k.gamma2)), Catch::Matchers::WithinRel(k.d2, 1e-8));
    // prefix-transposition proportion
    const double dp = log_big(count_prefix_d2(200));
    CHECK_THAT(std::exp(dp - d2), Catch::Matchers::WithinRel(k.gamma2_prime, 1e-8));
}

TEST_CASE("constants agree with their printed decimals") {
    const auto& k = closed_form_constants();
    check_printed(k.mu_r, 0.4944, 1e-4);
    check_printed(k.sigma2_r, 0.0267, 1e-4);
    check_printed(k.mu_f, 0.5016, 1e-4);
    check_printed(k.sigma2_f, 0.0430, 1e-4);
    check_printed(k.mu_g, 0.4913, 1e-4);
    check_printed(k.sigma2_g, 0.0195, 1e-4);
    check_printed(k.mu_r2, 0.6465, 1e-4);
    check_printed(k.sigma2_r2, 0.0799, 1e-4);
    check_printed(k.mu_f2, 0.6794, 1e-4);
    check_printed(k.sigma2_f2, 0.1592, 1e-4);
    check_printed(k.mu_g2, 0.6365, 1e-4);
    check_printed(k.sigma2_g2, 0.0514, 1e-4);
    check_printed(k.mu_d2f, 0.9053, 1e-4);
    check_printed(k.sigma2_d2f, 0.1147, 1e-4);
    check_printed(k.phi2, 1.8393, 1e-4);
    check_printed(k.c2, 0.3363, 1e-4);
    check_printed(k.gamma2, 2.3335, 1e-4);
    check_printed(k.gamma2_prime, 0.3213, 1e-4);
    check_printed(k.d2, 0.1948, 1e-4);
    CHECK_THAT(k.knuth_c, Catch::Matchers::WithinAbs(0.013143, 1e-5));
}

TEST_CASE("closed forms equal the recurrence slopes") {
    const auto& k = closed_form_constants();
    const auto sf = slope_pair_gf(GfId::FixedFib1, 500);
    CHECK_THAT(sf.mu, Catch::Matchers::WithinAbs(k.mu_f, 1e-10));
    CHECK_THAT(sf.sigma2, Catch::Matchers::WithinAbs(k.sigma2_f, 1e-10));
    const auto sg = slope_pair_gf(GfId::GreedyFib1, 500);
    CHECK_THAT(sg.mu, Catch::Matchers::WithinAbs(k.mu_g, 1e-10));
    CHECK_THAT(sg.sigma2, Catch::Matchers::WithinAbs(k.sigma2_g, 1e-10));
    const auto sr = slope_pair_random_fib1(500);
    CHECK_THAT(sr.mu, Catch::Matchers::WithinAbs(k.mu_r, 1e-9));
    CHECK_THAT(sr.sigma2, Catch::Matchers::WithinAbs(k.sigma2_r, 1e-8));
}

TEST_CASE("renewal constants") {
    const auto& k = closed_form_constants();
    // the fixed-order sampler is a renewal process with steps 1 and 2
    auto [mf, sf] = renewal_constants({{1, 1 / k.phi}, {2, 1 / (k.phi * k.phi)}}, std::log(2.0));
    CHECK_THAT(mf, Catch::Matchers::WithinAbs(k.mu_f, 1e-12));
    CHECK_THAT(sf, Catch::Matchers::WithinAbs(k.sigma2_f, 1e-12));
    // greedy: steps 2 and 3
    auto [mg, sg] = renewal_constants(
        {{2, 2 / (k.phi * k.phi)}, {3, 1 / std::pow(k.phi, 3)}}, std::log(3.0));
    CHECK_THAT(mg, Catch::Matchers::WithinAbs(k.mu_g, 1e-12));
    CHECK_THAT(sg, Catch::Matchers::WithinAbs(k.sigma2_g, 1e-12));
    // degenerate renewal
    auto [mc, sc] = renewal_constants({{1, 1.0}}, 0.37);
    CHECK(mc == 0.37);
    CHECK(sc == 0.0);
    CHECK_THROWS_AS(renewal_constants({{1, 0.5}, {2, 0.4}}, 1.0), validation_error);
}

TEST_CASE("relative variance singularities") {
    const auto& s = relvar_singularities();
    CHECK_THAT(s.z_f, Catch::Matchers::WithinAbs((std::sqrt(3.0) - 1) / 2, 1e-15));
    CHECK_THAT(s.z_f, Catch::Matchers::WithinAbs(0.3660, 1e-4));
    CHECK_THAT(s.z_3, Catch::Matchers::WithinAbs(0.3747, 1e-4));
    CHECK_THAT(s.z_r, Catch::Matchers::WithinAbs(0.3720, 5e-4));
    CHECK_THAT(s.residue_r, Catch::Matchers::WithinAbs(0.1911, 5e-3));
    // singularity equations hold
    CHECK_THAT(2 * s.z_f * (1 + s.z_f), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(3 * s.z_3 * s.z_3 * (2 + s.z_3), Catch::Matchers::WithinAbs(1.0, 1e-12));
    CHECK_THAT(detail::relvar_bracket(s.z_r), Catch::Matchers::WithinAbs(1.0, 1e-11));
    // residue against the exact coefficient sequence
    CHECK_THAT(residue_from_sequence(400), Catch::Matchers::WithinRel(s.residue_r, 1e-6));
}

TEST_CASE("variance asymptotics match the exact second moments") {
    for (int n : {100, 150, 200}) {
        CHECK_THAT(nv_asymptotics_log(Algo::Random, n),
                   Catch::Matchers::WithinAbs(moments_random_fib1(n).log_n_var(), std::log(1.01)));
        CHECK_THAT(nv_asymptotics_log(Algo::Fixed, n),
                   Catch::Matchers::WithinAbs(moments_fixed_fib1(n).log_n_var(), std::log(1.01)));
        CHECK_THAT(nv_asymptotics_log(Algo::Greedy, n),
                   Catch::Matchers::WithinAbs(moments_greedy_fib1(n).log_n_var(), std::log(1.01)));
    }
}

TEST_CASE("sample size criteria") {
    const auto r = moments_for(BipartiteGraph::fibonacci(1, 200), Algo::Greedy, 200);
    auto [ns, nv] = sample_size_criteria(r);
    CHECK_THAT(ns, Catch::Matchers::WithinRel(std::exp(r.L() + r.sigma()), 1e-12));
    CHECK_THAT(nv, Catch::Matchers::WithinRel(std::exp(r.log_second_moment - 2 * r.log_count), 1e-12));
    // the asymptotic criterion reproduces the published sample sizes
    const double lf = fib1_counts().log_at(200);
    CHECK_THAT(std::exp(log_n_star_asymptotic(Family::Fibonacci, 1, Algo::Greedy, 200, lf)),
               Catch::Matchers::WithinRel(75.0, 0.05));
    CHECK_THAT(std::exp(log_n_star_asymptotic(Family::Fibonacci, 1, Algo::Random, 200, lf)),
               Catch::Matchers::WithinRel(194.0, 0.05));
    CHECK_THAT(std::exp(log_n_star_asymptotic(Family::Fibonacci, 1, Algo::Fixed, 200, lf)),
               Catch::Matchers::WithinRel(1520.0, 0.05));
}

TEST_CASE("tail bounds") {
    auto [p1, n1] = chebyshev_tail(1.0);
    CHECK(p1 == 0.5);
    CHECK_THAT(n1, Catch::Matchers::WithinAbs(0.2420, 1e-4));
    auto [p3, n3] = chebyshev_tail(3.0);
    CHECK(p3 == 0.1);
    CHECK_THAT(n3, Catch::Matchers::WithinAbs(0.00148, 1e-5));
    CHECK(chebyshev_tail(1e-9).first > 0.999999);
    CHECK_THROWS_AS(chebyshev_tail(0.0), validation_error);
}

TEST_CASE("normality diagnostics self test") {
    // synthetic standard normal via Box-Muller
    RngStream rng(2718, 0);
    std::vector<double> x(20000);
    for (std::size_t i = 0; i < x.size(); i += 2) {
        const double u = rng.next_double(), v = rng.next_double();
        const double r = std::sqrt(-2 * std::log(1 - u));
        x[i] = r * std::cos(2 * M_PI * v);
        if (i + 1 < x.size()) x[i + 1] = r * std::sin(2 * M_PI * v);
    }
    // offset so that standardization by (mu, sigma) = (0.25, 1) at n = 1 recovers them
    for (double& v : x) v += 0.25;
    const CltDiagnostics d = clt_diagnostics(x, 0.25, 1.0, 1);
    CHECK(d.ks_distance <= 0.02);
    CHECK(std::abs(d.skewness) <= 0.1);
    CHECK(std::abs(d.excess_kurtosis) <= 0.2);
    CHECK_FALSE(d.degenerate);

    std::vector<double> constant(2000, 3.0);
    CHECK(clt_diagnostics(constant, 0.0, 1.0, 4).degenerate);
    std::vector<double> few(10, 0.0);
    CHECK_THROWS_AS(clt_diagnostics(few, 0.0, 1.0, 4), validation_error);
}

TEST_CASE("crossover points against the polynomial benchmark") {
    CHECK_THAT(crossover_vs_n7(Family::Fibonacci, 1, Algo::Greedy),
               Catch::Matchers::WithinRel(4894.0, 0.02));
    CHECK_THAT(crossover_vs_n7(Family::Fibonacci, 2, Algo::Greedy),
               Catch::Matchers::WithinRel(1549.0, 0.02));
    CHECK_THAT(crossover_vs_n7(Family::Distance, 2, Algo::Fixed),
               Catch::Matchers::WithinRel(617.0, 0.02));
}
