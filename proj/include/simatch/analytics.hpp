#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "simatch/moments.hpp"

namespace simatch {

// ---------------------------------------------------------------------------
// Quadrature and root finding
// ---------------------------------------------------------------------------

namespace detail {

// Adaptive Simpson to absolute tolerance; the integrands here are smooth.
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-13) {
    auto simpson = [&](double lo, double hi) {
        return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi));
    };
    std::function<double(double, double, double, double)> rec = [&](double lo, double hi,
                                                                    double whole, double eps) {
        const double mid = 0.5 * (lo + hi);
        const double left = simpson(lo, mid), right = simpson(mid, hi);
        if (std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, left, eps / 2) + rec(mid, hi, right, eps / 2);
    };
    return rec(a, b, simpson(a, b), tol);
}

inline double erf_integral(double z) {  // int_1^{1+z} exp(-u^2) du
    return adaptive_simpson([](double u) { return std::exp(-u * u); }, 1.0, 1.0 + z);
}

// Bracket function for the random-order second-moment singularity:
// G(z) = e^{(1+z)^2} (2/(3e) - int_1^{1+z} e^{-u^2} du); the singularity is
// the positive root of G(z) = 1, with G'(z) = 2(1+z)G(z) - 1.
inline double relvar_bracket(double z) {
    return std::exp((1 + z) * (1 + z)) * (2.0 / (3.0 * std::exp(1.0)) - erf_integral(z));
}

// Bisection plus Newton polish on a bracketed increasing root of f = target.
inline double solve_increasing(const std::function<double(double)>& f, double lo, double hi,
                               double target, double tol = 1e-13) {
    double flo = f(lo) - target, fhi = f(hi) - target;
    if (flo > 0 || fhi < 0) throw std::runtime_error("root not bracketed");
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) - target <= 0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

// Smallest positive singularities of the relative-variance generating
// functions, and the residue at the random-order one.
struct Singularities {
    double z_r = 0, residue_r = 0, z_f = 0, z_3 = 0;
};

inline const Singularities& relvar_singularities() {
    static const Singularities s = [] {
        Singularities out;
        // roots of 1 - 2z(1+z) and 1 - 3z^2(2+z)
        out.z_f = (std::sqrt(3.0) - 1.0) / 2.0;
        out.z_3 = detail::solve_increasing([](double z) { return 6 * z * z + 3 * z * z * z; },
                                           0.0, 0.5, 1.0);
        out.z_r = detail::solve_increasing(detail::relvar_bracket, 0.0, 0.5, 1.0);
        // Newton polish with G' = 2(1+z)G - 1
        for (int it = 0; it < 4; ++it) {
            const double g = detail::relvar_bracket(out.z_r);
            out.z_r -= (g - 1.0) / (2.0 * (1.0 + out.z_r) * g - 1.0);
        }
        out.residue_r = 1.0 / (3.0 * (1.0 + 2.0 * out.z_r));
        return out;
    }();
    return s;
}

// Residue cross-check: c = lim (z* - z) Y(z) estimated from the exact
// coefficient sequence as y_n z*^{n+1}.
inline double residue_from_sequence(int n = 400) {
    const auto w = detail::random_fib1_seq<double>(n, detail::t1_pow, 2);
    // y_n = w_n count(n)^2; y_n z_r^{n+1} -> residue
    const double lw = std::log(w[n]) + 2.0 * fib1_counts().log_at(n);
    return std::exp(lw + (n + 1) * std::log(relvar_singularities().z_r));
}

// ---------------------------------------------------------------------------
// Renewal constants
// ---------------------------------------------------------------------------

// For a renewal process with inter-arrival X and a fixed cost per renewal,
// the asymptotic mean and variance slopes of (cost * number of renewals).
inline std::pair<double, double> renewal_constants(const std::vector<std::pair<int, double>>& dist,
                                                   double step_cost) {
    double p = 0, ex = 0, ex2 = 0;
    for (auto [k, pk] : dist) {
        p += pk;
        ex += k * pk;
        ex2 += double(k) * k * pk;
    }
    if (std::abs(p - 1.0) > 1e-12) throw validation_error("renewal distribution is not normalized");
    const double var = ex2 - ex * ex;
    return {step_cost / ex, step_cost * step_cost * var / (ex * ex * ex)};
}

// ---------------------------------------------------------------------------
// Closed-form constants
// ---------------------------------------------------------------------------

struct AnalyticConstants {
    double phi = 0, phi_hat = 0, phi2 = 0, c2 = 0, gamma2 = 0, gamma2_prime = 0, d2 = 0;
    double mu_r = 0, sigma2_r = 0;    // random order, 1-Fibonacci (closed form)
    double mu_f = 0, sigma2_f = 0;    // fixed order, 1-Fibonacci (closed form)
    double mu_g = 0, sigma2_g = 0;    // greedy order, 1-Fibonacci (closed form)
    double mu_r2 = 0, sigma2_r2 = 0;  // random cycle, 2-Fibonacci (slope-derived)
    double mu_f2 = 0, sigma2_f2 = 0;  // fixed order, 2-Fibonacci (slope-derived)
    double mu_g2 = 0, sigma2_g2 = 0;  // block greedy, 2-Fibonacci (renewal)
    double mu_d2f = 0, sigma2_d2f = 0;  // fixed order, distance-2 (slope-derived)
    double knuth_c = 0;               // mu_r - log phi
    double z_r = 0, residue_r = 0, z_f = 0, z_3 = 0;
};

inline const AnalyticConstants& closed_form_constants() {
    static const AnalyticConstants k = [] {
        AnalyticConstants c;
        const double s5 = std::sqrt(5.0), l2 = std::log(2.0), l3 = std::log(3.0);
        c.phi = golden_ratio();
        c.phi_hat = -1.0 / c.phi;
        c.phi2 = tribonacci_constant();
        c.c2 = (3.0 + 7.0 / c.phi2 + 2.0 / (c.phi2 * c.phi2)) / 22.0;
        c.gamma2 = dist2_growth_constant();
        c.gamma2_prime = dist2_prefix_ratio_constant();
        {
            const double g = c.gamma2, g2 = g * g, g3 = g2 * g, g4 = g3 * g;
            c.d2 = (4652 * g4 + 10711 * g3 + 3737 * g2 - 3424 * g - 2388) / (49163 * g4);
        }
        c.mu_r = (13.0 / 6.0 - 2.0 / s5) * l2 / 5.0 + (1.0 + 1.0 / s5) * l3 / 5.0;
        c.sigma2_r = (1049.0 / (10.0 * s5) - 361.0 / 9.0) * l2 * l2 / 50.0 -
                     (1579.0 / (5.0 * s5) - 113.0) * l2 * l3 / 225.0 +
                     (131.0 / (5.0 * s5) - 7.0) * l3 * l3 / 100.0;
        c.mu_f = 0.5 * (1.0 + 1.0 / s5) * l2;
        c.sigma2_f = l2 * l2 / (5.0 * s5);
        c.mu_g = l3 / s5;
        c.sigma2_g = (1.0 - 11.0 / (5.0 * s5)) * l3 * l3;
        c.knuth_c = c.mu_r - std::log(c.phi);
        {
            const double p3 = std::pow(c.phi2, 3), p4 = std::pow(c.phi2, 4), p5 = std::pow(c.phi2, 5);
            std::tie(c.mu_g2, c.sigma2_g2) =
                renewal_constants({{3, 4 / p3}, {4, 3 / p4}, {5, 2 / p5}}, std::log(9.0));
        }
        {
            const SlopePair r2 = slope_pair_random_fib2(1200);
            c.mu_r2 = r2.mu;
            c.sigma2_r2 = r2.sigma2;
            const SlopePair f2 = slope_pair_gf(GfId::FixedFib2, 1200);
            c.mu_f2 = f2.mu;
            c.sigma2_f2 = f2.sigma2;
            const SlopePair d2f = slope_pair_gf(GfId::Dist2Fixed, 1200);
            c.mu_d2f = d2f.mu;
            c.sigma2_d2f = d2f.sigma2;
        }
        const Singularities& s = relvar_singularities();
        c.z_r = s.z_r;
        c.residue_r = s.residue_r;
        c.z_f = s.z_f;
        c.z_3 = s.z_3;
        return c;
    }();
    return k;
}

// Asymptotic slope constants for a (family, algorithm) pair.
inline std::pair<double, double> slope_constants(Family fam, int param, Algo a) {
    const AnalyticConstants& k = closed_form_constants();
    if (fam == Family::Fibonacci && param == 1) {
        switch (a) {
            case Algo::Fixed: return {k.mu_f, k.sigma2_f};
            case Algo::Random: return {k.mu_r, k.sigma2_r};
            case Algo::Greedy: return {k.mu_g, k.sigma2_g};
            default: break;
        }
    }
    if (fam == Family::Fibonacci && param == 2) {
        switch (a) {
            case Algo::Fixed: return {k.mu_f2, k.sigma2_f2};
            case Algo::Random: return {k.mu_r2, k.sigma2_r2};
            case Algo::Greedy: return {k.mu_g2, k.sigma2_g2};
            default: break;
        }
    }
    if (fam == Family::Distance && param == 2 && a == Algo::Fixed) return {k.mu_d2f, k.sigma2_d2f};
    throw unsupported_error("no analyzed constants for this (family, algorithm) pair");
}

// log of the asymptotic count: F_{n,1} ~ phi^{n+1}/sqrt(5),
// F_{n,2} ~ c2 phi2^{n+1}, D_{n,2} ~ d2 gamma2^{n+1}.
inline double log_count_asymptotic(Family fam, int param, double n) {
    const AnalyticConstants& k = closed_form_constants();
    if (fam == Family::Fibonacci && param == 1)
        return (n + 1) * std::log(k.phi) - 0.5 * std::log(5.0);
    if (fam == Family::Fibonacci && param == 2) return std::log(k.c2) + (n + 1) * std::log(k.phi2);
    if (fam == Family::Distance && param == 2) return std::log(k.d2) + (n + 1) * std::log(k.gamma2);
    throw unsupported_error("no count asymptotics for this family");
}

// ---------------------------------------------------------------------------
// Sample-size criteria
// ---------------------------------------------------------------------------

// (N*, N^v) = (exp(L + sigma), E[T^2]/M^2) from an exact report.
inline std::pair<double, double> sample_size_criteria(const MomentReport& r) {
    return {r.n_star(), r.n_var()};
}

// log N* from the asymptotic linear forms exp(mu n + sigma sqrt(n)) / M_n.
inline double log_n_star_asymptotic(Family fam, int param, Algo a, int n, double log_count) {
    auto [mu, s2] = slope_constants(fam, param, a);
    return mu * n + std::sqrt(s2 * n) - log_count;
}

// log N^v from the singularity analysis: N^v ~ 5 R (z* phi^2)^{-(n+1)} on the
// 1-Fibonacci family, with R the residue of the respective Y(z) at z*.
inline double nv_asymptotics_log(Algo a, int n) {
    const AnalyticConstants& k = closed_form_constants();
    double z = 0, R = 0;
    switch (a) {
        case Algo::Random:
            z = k.z_r;
            R = k.residue_r;
            break;
        case Algo::Fixed: {
            z = k.z_f;  // Y = (1-z)/(1-2z-2z^2): R = -U(z)/V'(z)
            R = (1.0 - z) / (2.0 + 4.0 * z);
            break;
        }
        case Algo::Greedy: {
            z = k.z_3;  // Y = (1+z-2z^2)/(1-6z^2-3z^3)
            R = (1.0 + z - 2.0 * z * z) / (12.0 * z + 9.0 * z * z);
            break;
        }
        default:
            throw unsupported_error("variance asymptotics cover the three uniform samplers");
    }
    return std::log(5.0 * R) - (n + 1) * std::log(z * k.phi * k.phi);
}

inline double nv_asymptotics(Algo a, int n) { return std::exp(nv_asymptotics_log(a, n)); }

// One-sided tail bounds at a standard deviations: polynomial (Chebyshev) and
// normal-approximation versions.
inline std::pair<double, double> chebyshev_tail(double a) {
    if (a <= 0) throw validation_error("tail bound requires a > 0");
    return {1.0 / (1.0 + a * a), std::exp(-a * a / 2.0) / (a * std::sqrt(2.0 * M_PI))};
}

// ---------------------------------------------------------------------------
// Normality diagnostics
// ---------------------------------------------------------------------------

struct CltDiagnostics {
    int n = 0;
    std::size_t samples = 0;
    double skewness = 0, excess_kurtosis = 0, ks_distance = 0;
    double standardized_mean = 0, standardized_sd = 0;
    bool degenerate = false;
    std::vector<int> histogram;  // 32 bins over [-4, 4] of the standardized values
    double bin_lo = -4.0, bin_hi = 4.0;
};

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Standardizes log-weights by (x - mu n)/(sigma sqrt(n)) and reports moment
// and Kolmogorov-Smirnov diagnostics against the standard normal.
inline CltDiagnostics clt_diagnostics(std::vector<double> logT, double mu, double sigma, int n) {
    if (logT.size() < 1000) throw validation_error("normality diagnostics need at least 1000 samples");
    if (!(sigma > 0)) throw validation_error("sigma must be positive");
    CltDiagnostics d;
    d.n = n;
    d.samples = logT.size();
    const double scale = sigma * std::sqrt(static_cast<double>(n));
    for (double& x : logT) x = (x - mu * n) / scale;
    std::sort(logT.begin(), logT.end());
    const double N = static_cast<double>(logT.size());
    double m1 = 0;
    for (double x : logT) m1 += x;
    m1 /= N;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : logT) {
        const double dx = x - m1;
        m2 += dx * dx;
        m3 += dx * dx * dx;
        m4 += dx * dx * dx * dx;
    }
    m2 /= N;
    m3 /= N;
    m4 /= N;
    d.standardized_mean = m1;
    d.standardized_sd = std::sqrt(m2);
    if (m2 == 0.0) {
        d.degenerate = true;
        return d;
    }
    d.skewness = m3 / std::pow(m2, 1.5);
    d.excess_kurtosis = m4 / (m2 * m2) - 3.0;
    double ks = 0;
    for (std::size_t i = 0; i < logT.size(); ++i) {
        const double F = normal_cdf(logT[i]);
        ks = std::max(ks, std::max(std::abs((i + 1) / N - F), std::abs(i / N - F)));
    }
    d.ks_distance = ks;
    d.histogram.assign(32, 0);
    for (double x : logT) {
        if (x < d.bin_lo || x >= d.bin_hi) continue;
        ++d.histogram[static_cast<int>((x - d.bin_lo) / (d.bin_hi - d.bin_lo) * 32)];
    }
    return d;
}

// ---------------------------------------------------------------------------
// Crossover against the n^7 benchmark
// ---------------------------------------------------------------------------

// Smallest n with N*(n) > n^7 under the asymptotic forms.
inline int crossover_vs_n7(Family fam, int param, Algo a) {
    auto excess = [&](double n) {
        return log_n_star_asymptotic(fam, param, a, static_cast<int>(n),
                                     log_count_asymptotic(fam, param, n)) -
               7.0 * std::log(n);
    };
    auto [mu, s2] = slope_constants(fam, param, a);
    (void)s2;
    // bracket: the excess is eventually increasing and unbounded
    long lo = 8, hi = 16;
    while (excess(static_cast<double>(hi)) <= 0) {
        lo = hi;
        hi *= 2;
        if (hi > (1L << 40)) throw limit_error("no crossover found");
    }
    while (lo + 1 < hi) {
        const long mid = lo + (hi - lo) / 2;
        if (excess(static_cast<double>(mid)) > 0)
            hi = mid;
        else
            lo = mid;
    }
    return static_cast<int>(hi);
}

}  // namespace simatch
