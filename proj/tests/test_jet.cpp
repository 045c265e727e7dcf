#include <catch2/catch_amalgamated.hpp>

#include "simatch/jet.hpp"
#include "simatch/sampler.hpp"

using namespace simatch;

TEST_CASE("power jets match central finite differences") {
    const double h = 1e-4;
    for (double c : {2.0, 3.0, golden_ratio(), tribonacci_constant(), dist2_growth_constant()}) {
        const Jet2 j = Jet2::pow_t(c);
        auto f = [&](double t) { return std::pow(c, t); };
        const double d1 = (f(h) - f(-h)) / (2 * h);
        const double d2 = (f(h) - 2 * f(0) + f(-h)) / (h * h);
        CHECK(j.v0 == 1.0);
        CHECK_THAT(j.v1, Catch::Matchers::WithinRel(d1, 1e-7));
        CHECK_THAT(j.v2, Catch::Matchers::WithinRel(d2, 1e-7));
    }
}

TEST_CASE("jet product follows the Leibniz rule") {
    const Jet2 a(1.3, -0.7, 2.1), b(0.8, 0.5, -1.9);
    const Jet2 p = a * b;
    CHECK_THAT(p.v0, Catch::Matchers::WithinRel(a.v0 * b.v0, 1e-15));
    CHECK_THAT(p.v1, Catch::Matchers::WithinRel(a.v0 * b.v1 + a.v1 * b.v0, 1e-15));
    CHECK_THAT(p.v2, Catch::Matchers::WithinRel(a.v0 * b.v2 + 2 * a.v1 * b.v1 + a.v2 * b.v0, 1e-15));

    // numerically: product of jets of (2.5)^t and (1.7)^t is the jet of (4.25)^t
    const Jet2 q = Jet2::pow_t(2.5) * Jet2::pow_t(1.7);
    const Jet2 r = Jet2::pow_t(2.5 * 1.7);
    CHECK_THAT(q.v1, Catch::Matchers::WithinRel(r.v1, 1e-14));
    CHECK_THAT(q.v2, Catch::Matchers::WithinRel(r.v2, 1e-14));
}

TEST_CASE("moment extraction from normalized jets") {
    // mixture of two weights: T = 2 or 8 with equal probability
    const Jet2 j = (Jet2::pow_t(2) + Jet2::pow_t(8)) / 2.0;
    const double mean = (std::log(2) + std::log(8)) / 2;
    CHECK_THAT(j.mean(), Catch::Matchers::WithinRel(mean, 1e-14));
    const double second = (std::pow(std::log(2), 2) + std::pow(std::log(8), 2)) / 2;
    CHECK_THAT(j.variance(), Catch::Matchers::WithinRel(second - mean * mean, 1e-13));
}
