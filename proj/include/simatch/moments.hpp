#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "simatch/counts.hpp"
#include "simatch/jet.hpp"
#include "simatch/sampler.hpp"

namespace simatch {

// Exact log-weight statistics of a sampler at one size, plus the derived
// sample-size criteria.
struct MomentReport {
    int n = 0;
    std::string family;
    std::string algorithm;
    double mean = 0.0;      // E[log T] in nats
    double variance = 0.0;  // Var[log T]
    double log_second_moment = std::numeric_limits<double>::quiet_NaN();  // log E[T^2]
    BigInt count;
    double log_count = 0.0;
    bool asymptotic_only = false;  // assembled from constants, no exact recurrence

    double L() const { return mean - log_count; }
    double sigma() const { return std::sqrt(std::max(0.0, variance)); }
    double log_n_star() const { return L() + sigma(); }
    double n_star() const { return std::exp(log_n_star()); }
    double log_n_var() const { return log_second_moment - 2.0 * log_count; }
    double n_var() const { return std::exp(log_n_var()); }
    bool has_second_moment() const { return !std::isnan(log_second_moment); }
};

enum class GfId {
    FixedFib1,
    GreedyFib1,
    FixedFib2,
    FibStarFixed,
    FibStarGreedy,
    Fib2StarFixed,
    Dist2Fixed,
    Dist2StarFixed,
};

inline const char* gf_name(GfId id) {
    switch (id) {
        case GfId::FixedFib1: return "fixed-fib1";
        case GfId::GreedyFib1: return "greedy-fib1";
        case GfId::FixedFib2: return "fixed-fib2";
        case GfId::FibStarFixed: return "fib-star-fixed";
        case GfId::FibStarGreedy: return "fib-star-greedy";
        case GfId::Fib2StarFixed: return "fib2-star-fixed";
        case GfId::Dist2Fixed: return "dist2-fixed";
        default: return "dist2-star-fixed";
    }
}

namespace detail {

// A coefficient of the moment generating functions: sum of a * c^t terms.
struct TPoly {
    struct Term {
        double coef, base;
    };
    std::vector<Term> terms;

    TPoly() = default;
    TPoly(std::initializer_list<Term> t) : terms(t) {}

    Jet2 jet() const {
        Jet2 j(0.0);
        for (const auto& t : terms) j += Jet2::pow_t(t.base) * t.coef;
        return j;
    }
    double at(double tval) const {
        double s = 0;
        for (const auto& t : terms) s += t.coef * std::pow(t.base, tval);
        return s;
    }
};

// X(z,t) = U(z,t)/V(z,t); v_0 = 1. Produces count-normalized sequences.
struct Gf {
    std::vector<TPoly> U, V;
    const CountTable* counts = nullptr;
};

inline Gf make_gf(GfId id) {
    auto C = [](double a) { return TPoly{{a, 1.0}}; };              // constant
    auto T = [](double a, double c) { return TPoly{{a, c}}; };      // a * c^t
    Gf gf;
    switch (id) {
        case GfId::FixedFib1:
            gf.U = {C(1), TPoly{{1, 1.0}, {-1, 2}}};
            gf.V = {C(1), T(-1, 2), T(-1, 2)};
            gf.counts = &fib1_counts();
            break;
        case GfId::GreedyFib1:
            gf.U = {C(1), C(1), TPoly{{2, 2}, {-2, 3}}};
            gf.V = {C(1), C(0), T(-2, 3), T(-1, 3)};
            gf.counts = &fib1_counts();
            break;
        case GfId::FixedFib2:
            gf.U = {C(1), TPoly{{1, 1.0}, {-1, 3}}, TPoly{{2, 2}, {-2, 3}}};
            gf.V = {C(1), T(-1, 3), T(-1, 3), T(-1, 3)};
            gf.counts = &fib2_counts();
            break;
        case GfId::FibStarFixed: {
            const double p = golden_ratio();
            gf.U = {C(1), TPoly{{1, 1.0}, {-1, p}}};
            gf.V = {C(1), T(-1, p), T(-1, p * p)};
            gf.counts = &fib1_counts();
            break;
        }
        case GfId::FibStarGreedy: {
            const double p = golden_ratio();
            gf.U = {C(1), C(1), TPoly{{2, 2}, {-2, p * p}}};
            gf.V = {C(1), C(0), T(-2, p * p), T(-1, p * p * p)};
            gf.counts = &fib1_counts();
            break;
        }
        case GfId::Fib2StarFixed: {
            const double p = tribonacci_constant();
            gf.U = {C(1), TPoly{{1, 1.0}, {-1, p}}, TPoly{{2, 2}, {-1, p}, {-1, p * p}}};
            gf.V = {C(1), T(-1, p), T(-1, p * p), T(-1, p * p * p)};
            gf.counts = &fib2_counts();
            break;
        }
        case GfId::Dist2Fixed:
            gf.U = {C(1),
                    TPoly{{-1, 3}, {1, 1.0}},
                    TPoly{{2, 2}, {-2, 3}, {-1, 9}},
                    TPoly{{4, 6}, {-1, 3}, {-2, 9}, {-1, 27}},
                    TPoly{{2, 18}, {-2, 6}, {-2, 27}, {2, 9}},
                    TPoly{{-2, 18}, {2, 27}}};
            gf.V = {C(1),          T(-1, 3),          TPoly{{-1, 3}, {-1, 9}},
                    TPoly{{-1, 9}, {-1, 27}}, TPoly{{-1, 9}, {-1, 27}}, T(1, 27),
                    T(1, 27)};
            gf.counts = &dist2_counts();
            break;
        case GfId::Dist2StarFixed: {
            const double g = dist2_growth_constant();
            const double gp = dist2_prefix_ratio_constant();
            const double g2 = g * g, g3 = g2 * g, g4 = g3 * g, g5 = g4 * g, g6 = g5 * g;
            gf.U = {C(1),
                    TPoly{{1, 1.0}, {-1, g}},
                    TPoly{{2, 2}, {-1, g}, {-2, g2}},
                    TPoly{{6, 6}, {-2, 2 * g}, {-2, g2}, {-2, g3}},
                    TPoly{{2, 2 * g / gp}, {1, g * g / gp}, {-2, 2 * g * g}, {-1, g * g3}},
                    TPoly{{-6, 6 * g2}, {2, 2 * g2 / gp}, {2, 2 * g * g2}, {1, g * g2 / gp}, {1, g3 * g2}}};
            gf.V = {C(1), T(-1, g), T(-2, g2), T(-2, g3), T(-2, g4), T(1, g5), T(1, g6)};
            gf.counts = &dist2_counts();
            break;
        }
    }
    return gf;
}

// Count-normalized jet sequence: element m is E_u[T^t] as a jet at size m.
inline std::vector<Jet2> gf_jets(const Gf& gf, int n) {
    std::vector<Jet2> x(n + 1);
    for (int m = 0; m <= n; ++m) {
        Jet2 val(0.0);
        if (m < static_cast<int>(gf.U.size()))
            val = gf.U[m].jet() * (1.0 / gf.counts->scaled(m).to_double());
        for (int k = 1; k < static_cast<int>(gf.V.size()) && k <= m; ++k)
            val -= gf.V[k].jet() * x[m - k] * gf.counts->ratio(m - k, m);
        x[m] = val;
    }
    return x;
}

// t = 1 sequence normalized by count^2: element m is E[T^2]/count(m)^2.
inline std::vector<double> gf_relvar(const Gf& gf, int n) {
    std::vector<double> w(n + 1);
    for (int m = 0; m <= n; ++m) {
        double val = 0.0;
        if (m < static_cast<int>(gf.U.size())) {
            const double c = gf.counts->scaled(m).to_double();
            val = gf.U[m].at(1.0) / (c * c);
        }
        for (int k = 1; k < static_cast<int>(gf.V.size()) && k <= m; ++k) {
            const double r = gf.counts->ratio(m - k, m);
            val -= gf.V[k].at(1.0) * w[m - k] * r * r;
        }
        w[m] = val;
    }
    return w;
}

// Random-order recurrence on the 1-Fibonacci family. normpow = 1 computes
// count-normalized jets; the t=1 variant uses squared count ratios.
template <class Num, class PowFn>
std::vector<Num> random_fib1_seq(int n, PowFn pw, int normpow) {
    const CountTable& C = fib1_counts();
    auto q = [&](int a, int b, int m) {
        double r = C.ratio2(a, b, m);
        return normpow == 2 ? r * r : r;
    };
    auto r1 = [&](int a, int m) {
        double r = C.ratio(a, m);
        return normpow == 2 ? r * r : r;
    };
    std::vector<Num> x(n + 1);
    x[0] = Num(1);
    if (n >= 1) x[1] = Num(1);
    for (int m = 2; m <= n; ++m) {
        Num acc = (pw(2) - pw(3)) * (x[m - 1] * r1(m - 1, m) + x[m - 2] * r1(m - 2, m)) * 2.0;
        Num conv(0.0);
        for (int i = 0; i <= m - 1; ++i) conv += x[i] * x[m - 1 - i] * q(i, m - 1 - i, m);
        Num conv2(0.0);
        for (int i = 0; i <= m - 2; ++i) conv2 += x[i] * x[m - 2 - i] * q(i, m - 2 - i, m);
        acc += pw(3) * (conv + conv2 * 2.0);
        x[m] = acc / static_cast<double>(m);
    }
    return x;
}

// Random-cycle recurrence on the 2-Fibonacci family.
template <class Num, class PowFn>
std::vector<Num> random_fib2_seq(int n, PowFn pw, int normpow) {
    const CountTable& C = fib2_counts();
    auto q = [&](int a, int b, int m) {
        double r = C.ratio2(a, b, m);
        return normpow == 2 ? r * r : r;
    };
    auto r1 = [&](int a, int m) {
        double r = C.ratio(a, m);
        return normpow == 2 ? r * r : r;
    };
    std::vector<Num> x(n + 1);
    x[0] = Num(1);
    if (n >= 1) x[1] = Num(1);
    // raw seeds 2*2^t and (4/3)(3^t+6^t+4^t), scaled by count^-normpow
    if (n >= 2) x[2] = pw(2) * (2.0 / std::pow(2.0, normpow));
    if (n >= 3) x[3] = (pw(3) + pw(6) + pw(4)) * ((4.0 / 3.0) / std::pow(4.0, normpow));
    for (int m = 4; m <= n; ++m) {
        Num acc = (pw(3) - pw(6)) *
                  (x[m - 1] * r1(m - 1, m) + x[m - 2] * r1(m - 2, m) + x[m - 3] * r1(m - 3, m)) * 2.0;
        acc += (pw(5) - pw(6)) *
               (x[m - 2] * (2.0 * r1(m - 2, m)) + x[m - 3] * (2.0 * r1(m - 3, m)) +
                x[m - 4] * r1(m - 4, m)) *
               2.0;
        Num conv(0.0);
        for (int i = 0; i <= m - 1; ++i) conv += x[i] * x[m - 1 - i] * q(i, m - 1 - i, m);
        Num conv2(0.0);
        for (int i = 0; i <= m - 2; ++i) conv2 += x[i] * x[m - 2 - i] * q(i, m - 2 - i, m);
        Num conv3(0.0);
        for (int i = 0; i <= m - 3; ++i) conv3 += x[i] * x[m - 3 - i] * q(i, m - 3 - i, m);
        acc += pw(6) * (conv + conv2 * 2.0 + conv3 * 3.0);
        x[m] = acc / static_cast<double>(m);
    }
    return x;
}

inline Jet2 jet_pow(double c) { return Jet2::pow_t(c); }
inline double t1_pow(double c) { return c; }

}  // namespace detail

// ---------------------------------------------------------------------------
// Moment reports
// ---------------------------------------------------------------------------

namespace detail {
inline MomentReport report_from_jet(const Jet2& j, int n, const CountTable& C, std::string family,
                                    std::string algorithm) {
    MomentReport r;
    r.n = n;
    r.family = std::move(family);
    r.algorithm = std::move(algorithm);
    r.mean = j.mean();
    r.variance = j.variance();
    r.count = C.at(n);
    r.log_count = C.log_at(n);
    return r;
}
}  // namespace detail

inline MomentReport moments_from_gf(GfId id, int n) {
    const detail::Gf gf = detail::make_gf(id);
    const Jet2 j = detail::gf_jets(gf, n)[n];
    const double w = detail::gf_relvar(gf, n)[n];
    const char* family = gf.counts == &fib1_counts()   ? "fib1"
                         : gf.counts == &fib2_counts() ? "fib2"
                                                       : "dist2";
    MomentReport r = detail::report_from_jet(j, n, *gf.counts, family, gf_name(id));
    r.log_second_moment = std::log(w) + 2.0 * r.log_count;
    return r;
}

inline MomentReport moments_fixed_fib1(int n) { return moments_from_gf(GfId::FixedFib1, n); }
inline MomentReport moments_greedy_fib1(int n) { return moments_from_gf(GfId::GreedyFib1, n); }

inline MomentReport moments_random_fib1(int n) {
    const Jet2 j = detail::random_fib1_seq<Jet2>(n, detail::jet_pow, 1)[n];
    const double w = detail::random_fib1_seq<double>(n, detail::t1_pow, 2)[n];
    MomentReport r = detail::report_from_jet(j, n, fib1_counts(), "fib1", "random-fib1");
    r.log_second_moment = std::log(w) + 2.0 * r.log_count;
    return r;
}

inline MomentReport moments_random_fib2(int n) {
    const Jet2 j = detail::random_fib2_seq<Jet2>(n, detail::jet_pow, 1)[n];
    const double w = detail::random_fib2_seq<double>(n, detail::t1_pow, 2)[n];
    MomentReport r = detail::report_from_jet(j, n, fib2_counts(), "fib2", "random-fib2");
    r.log_second_moment = std::log(w) + 2.0 * r.log_count;
    return r;
}

// log E[T^2] under the sampling measure (the t = 1 recurrence value).
inline double second_moment_log(GfId id, int n) {
    const detail::Gf gf = detail::make_gf(id);
    return std::log(detail::gf_relvar(gf, n)[n]) + 2.0 * gf.counts->log_at(n);
}

// Asymptotic slope extraction: first differences of the exact sequences at
// n and n/2; the geometric convergence makes the n-difference already exact
// to well below 1e-6 for n >= 200, and the n/2 value is the cross-check.
struct SlopePair {
    double mu = 0, sigma2 = 0;
    double mu_check = 0, sigma2_check = 0;  // from the half-size differences
};

namespace detail {
template <class SeqFn>
SlopePair slopes_from(SeqFn seq, int n) {
    SlopePair s;
    const std::vector<Jet2> x = seq(n);
    auto mean = [&](int m) { return x[m].mean(); };
    auto var = [&](int m) { return x[m].variance(); };
    s.mu = mean(n) - mean(n - 1);
    s.sigma2 = var(n) - var(n - 1);
    s.mu_check = mean(n / 2) - mean(n / 2 - 1);
    s.sigma2_check = var(n / 2) - var(n / 2 - 1);
    return s;
}
}  // namespace detail

inline SlopePair slope_pair_gf(GfId id, int n = 1000) {
    const detail::Gf gf = detail::make_gf(id);
    return detail::slopes_from([&](int m) { return detail::gf_jets(gf, m); }, n);
}

inline SlopePair slope_pair_random_fib1(int n = 1000) {
    return detail::slopes_from(
        [&](int m) { return detail::random_fib1_seq<Jet2>(m, detail::jet_pow, 1); }, n);
}

inline SlopePair slope_pair_random_fib2(int n = 1000) {
    return detail::slopes_from(
        [&](int m) { return detail::random_fib2_seq<Jet2>(m, detail::jet_pow, 1); }, n);
}

// ---------------------------------------------------------------------------
// Exhaustive oracle: enumeration, with the order-averaged weight moments for
// random-order policies (the quantity the recurrences compute).
// ---------------------------------------------------------------------------

inline MomentReport exhaustive_moments(const BipartiteGraph& g, OrderPolicy policy, RuleKind rule,
                                       std::size_t limit = limits().exhaustive) {
    const Sampler s = make_sampler(g, policy, rule);
    const auto pis = enumerate_matchings(g, limit);
    const int n = g.n();
    Jet2 sum(0.0);
    double sum_t1 = 0.0;
    const PolicyKind pk = policy.kind;
    for (const auto& pi : pis) {
        if (pk == PolicyKind::UniformRandom && s.fib(1)) {
            sum += detail::interval_average<Jet2>(pi, n, [](int c) { return Jet2::pow_t(c); },
                                                  detail::fib1_block, detail::fib1_interval_choices);
            sum_t1 += detail::interval_average<double>(pi, n, [](int c) { return double(c); },
                                                       detail::fib1_block,
                                                       detail::fib1_interval_choices);
        } else if (pk == PolicyKind::RandomCycle) {
            sum += detail::interval_average<Jet2>(pi, n, [](int c) { return Jet2::pow_t(c); },
                                                  detail::fib2_cycle_span,
                                                  detail::fib2_interval_choices);
            sum_t1 += detail::interval_average<double>(pi, n, [](int c) { return double(c); },
                                                       detail::fib2_cycle_span,
                                                       detail::fib2_interval_choices);
        } else if (pk == PolicyKind::UniformRandom) {
            sum += detail::subset_average<Jet2>(g, pi, [](int c) { return Jet2::pow_t(c); });
            sum_t1 += detail::subset_average<double>(g, pi, [](int c) { return double(c); });
        } else {
            const double logp = path_probability(s, pi).log_p;
            sum += Jet2(1.0, -logp, logp * logp);
            sum_t1 += std::exp(-logp);
        }
    }
    MomentReport r;
    r.n = n;
    r.family = g.describe();
    r.algorithm = std::string(policy_name(pk)) + "/" + rule_name(rule);
    r.mean = sum.mean();
    r.variance = sum.variance();
    r.log_second_moment = std::log(sum_t1);
    r.count = BigInt(pis.size());
    r.log_count = std::log(static_cast<double>(pis.size()));
    return r;
}

// Exact rational E[T^2] under the sampling measure, for small-n tests.
inline BigRat exhaustive_second_moment_rational(const BipartiteGraph& g, OrderPolicy policy,
                                                RuleKind rule, std::size_t limit = limits().exhaustive) {
    const Sampler s = make_sampler(g, policy, rule);
    if (rule != RuleKind::Uniform)
        throw unsupported_error("rational second moment requires the uniform rule");
    BigRat total = 0;
    for (const auto& pi : enumerate_matchings(g, limit)) {
        if (policy.kind == PolicyKind::UniformRandom && s.fib(1))
            total += detail::interval_average<BigRat>(pi, g.n(), [](int c) { return BigRat(c); },
                                                      detail::fib1_block,
                                                      detail::fib1_interval_choices);
        else if (policy.kind == PolicyKind::RandomCycle)
            total += detail::interval_average<BigRat>(pi, g.n(), [](int c) { return BigRat(c); },
                                                      detail::fib2_cycle_span,
                                                      detail::fib2_interval_choices);
        else if (policy.kind == PolicyKind::UniformRandom)
            total += detail::subset_average<BigRat>(g, pi, [](int c) { return BigRat(c); });
        else {
            const auto pp = path_probability(s, pi, true);
            total += BigRat(1) / *pp.exact;
        }
    }
    return total;
}

// ---------------------------------------------------------------------------
// (family, algorithm) dispatch used by the CLI and the table harness
// ---------------------------------------------------------------------------

enum class Algo { Fixed, Random, Greedy, FixedStar, GreedyStar };

inline const char* algo_name(Algo a) {
    switch (a) {
        case Algo::Fixed: return "fixed";
        case Algo::Random: return "random";
        case Algo::Greedy: return "greedy";
        case Algo::FixedStar: return "fixed-star";
        default: return "greedy-star";
    }
}

inline Algo algo_from_string(const std::string& s) {
    if (s == "fixed") return Algo::Fixed;
    if (s == "random") return Algo::Random;
    if (s == "greedy") return Algo::Greedy;
    if (s == "fixed-star") return Algo::FixedStar;
    if (s == "greedy-star") return Algo::GreedyStar;
    throw validation_error("unknown algorithm '" + s + "'");
}

// The sampler implementing an algorithm label on a graph.
inline Sampler sampler_for(const BipartiteGraph& g, Algo a) {
    const bool f1 = g.family() == Family::Fibonacci && g.family_param() == 1;
    const bool f2 = g.family() == Family::Fibonacci && g.family_param() == 2;
    const bool d2 = g.family() == Family::Distance && g.family_param() == 2;
    switch (a) {
        case Algo::Fixed: return make_sampler(g, OrderPolicy::fixed(), RuleKind::Uniform);
        case Algo::Random:
            if (f2) return make_sampler(g, OrderPolicy::random_cycle(), RuleKind::Uniform);
            return make_sampler(g, OrderPolicy::random(), RuleKind::Uniform);
        case Algo::Greedy:
            if (f1) return make_sampler(g, OrderPolicy::greedy_fib1(), RuleKind::Uniform);
            if (f2) return make_sampler(g, OrderPolicy::greedy_cycle_fib2(), RuleKind::Uniform);
            throw unsupported_error("no greedy sampler for this family");
        case Algo::FixedStar:
            if (f1) return make_sampler(g, OrderPolicy::fixed(), RuleKind::FibStarFixed);
            if (f2) return make_sampler(g, OrderPolicy::fixed(), RuleKind::Fib2StarFixed);
            if (d2) return make_sampler(g, OrderPolicy::fixed(), RuleKind::Dist2StarFixed);
            throw unsupported_error("no tuned fixed-order sampler for this family");
        case Algo::GreedyStar:
            if (f1) return make_sampler(g, OrderPolicy::greedy_fib1(), RuleKind::FibStarGreedy);
            throw unsupported_error("no tuned greedy sampler for this family");
    }
    throw validation_error("unreachable");
}

// Exact moment report for an algorithm label; set `renewal_mu/sigma2` for the
// one pair without a recurrence (block-greedy on the 2-Fibonacci family).
inline MomentReport moments_for(const BipartiteGraph& g, Algo a, int n) {
    const bool f1 = g.family() == Family::Fibonacci && g.family_param() == 1;
    const bool f2 = g.family() == Family::Fibonacci && g.family_param() == 2;
    const bool d2 = g.family() == Family::Distance && g.family_param() == 2;
    MomentReport r;
    if (f1) {
        switch (a) {
            case Algo::Fixed: r = moments_from_gf(GfId::FixedFib1, n); break;
            case Algo::Random: r = moments_random_fib1(n); break;
            case Algo::Greedy: r = moments_from_gf(GfId::GreedyFib1, n); break;
            case Algo::FixedStar: r = moments_from_gf(GfId::FibStarFixed, n); break;
            case Algo::GreedyStar: r = moments_from_gf(GfId::FibStarGreedy, n); break;
        }
    } else if (f2) {
        switch (a) {
            case Algo::Fixed: r = moments_from_gf(GfId::FixedFib2, n); break;
            case Algo::Random: r = moments_random_fib2(n); break;
            case Algo::FixedStar: r = moments_from_gf(GfId::Fib2StarFixed, n); break;
            default:
                throw unsupported_error(
                    "no exact moment recurrence for this pair (asymptotic constants only)");
        }
    } else if (d2) {
        switch (a) {
            case Algo::Fixed: r = moments_from_gf(GfId::Dist2Fixed, n); break;
            case Algo::FixedStar: r = moments_from_gf(GfId::Dist2StarFixed, n); break;
            default:
                throw unsupported_error("no exact moment recurrence for this pair");
        }
    } else {
        throw unsupported_error("moment recurrences exist for the built-in families only");
    }
    r.algorithm = algo_name(a);
    return r;
}

}  // namespace simatch
