#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <thread>

#include "simatch/analytics.hpp"
#include "simatch/moments.hpp"

namespace simatch {

// Monte Carlo estimate of a matching count, in log space.
struct EstimateReport {
    int n = 0;
    std::string family, algorithm;
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
    double log_estimate = 0;   // log((1/N) sum T)
    double rel_stderr = 0;     // delta-method relative standard error
    double mean_logT = 0, var_logT = 0;
    double nv_empirical = 0;   // N * sum T^2 / (sum T)^2
    bool stderr_unreliable = false;  // long-tail flag: empirical N^v > N/10
    double wall_ms = 0;        // informational only; never part of stdout payloads
};

namespace detail {

constexpr std::uint64_t kChunk = 4096;

// Order-fixed accumulator: samples are accumulated within chunks by index
// and chunks are merged left-to-right, so results are independent of how
// chunks were assigned to workers.
struct Accum {
    double m = -std::numeric_limits<double>::infinity(), s = 0;    // lse of logT
    double m2 = -std::numeric_limits<double>::infinity(), s2 = 0;  // lse of 2 logT
    double md = -std::numeric_limits<double>::infinity(), sd = 0;  // lse of logT, flagged
    double sum = 0, sumsq = 0;
    std::uint64_t count = 0, flagged = 0;

    static void lse_add(double& m, double& s, double x) {
        if (x <= m) {
            s += std::exp(x - m);
        } else {
            s = s * std::exp(m - x) + 1.0;
            m = x;
        }
    }
    static void lse_merge(double& m, double& s, double om, double os) {
        if (os == 0) return;
        if (om <= m) {
            s += os * std::exp(om - m);
        } else {
            s = s * std::exp(m - om) + os;
            m = om;
        }
    }

    void add(double logT, bool flag) {
        lse_add(m, s, logT);
        lse_add(m2, s2, 2.0 * logT);
        if (flag) {
            lse_add(md, sd, logT);
            ++flagged;
        }
        sum += logT;
        sumsq += logT * logT;
        ++count;
    }
    void merge(const Accum& o) {
        lse_merge(m, s, o.m, o.s);
        lse_merge(m2, s2, o.m2, o.s2);
        lse_merge(md, sd, o.md, o.sd);
        sum += o.sum;
        sumsq += o.sumsq;
        count += o.count;
        flagged += o.flagged;
    }
    double log_sum_T() const { return m + std::log(s); }
    double log_sum_T2() const { return m2 + std::log(s2); }
    double log_sum_T_flagged() const { return md + std::log(sd); }
};

// Runs N sampler draws split into fixed chunks; sample k always uses rng
// stream (seed, k). `consume(k, trace)` may be empty.
inline Accum run_chunks(const Sampler& s, std::uint64_t N, std::uint64_t seed, int workers,
                        const std::function<bool(const Matching&)>& predicate) {
    const std::uint64_t nchunks = (N + kChunk - 1) / kChunk;
    std::vector<Accum> chunk_acc(nchunks);
    std::atomic<std::uint64_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::uint64_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            Accum& a = chunk_acc[c];
            const std::uint64_t hi = std::min(N, (c + 1) * kChunk);
            for (std::uint64_t k = c * kChunk; k < hi; ++k) {
                RngStream rng(seed, k);
                DecisionTrace tr = sample(s, rng, /*record_steps=*/false);
                a.add(tr.logT, predicate && predicate(tr.pi));
            }
        }
    };
    workers = std::max(1, workers);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    Accum total;
    for (const auto& a : chunk_acc) total.merge(a);
    return total;
}

}  // namespace detail

// Unbiased estimate of M_n; deterministic for fixed (seed, N) regardless of
// the worker count.
inline EstimateReport estimate_count(const BipartiteGraph& g, Algo algo, std::uint64_t N,
                                     std::uint64_t seed, int workers = 1) {
    if (N < 1) throw validation_error("sample count must be positive");
    const Sampler s = sampler_for(g, algo);
    const auto t0 = std::chrono::steady_clock::now();
    const detail::Accum a = detail::run_chunks(s, N, seed, workers, nullptr);
    EstimateReport r;
    r.n = g.n();
    r.family = family_name(g.family());
    r.algorithm = algo_name(algo);
    r.samples = N;
    r.seed = seed;
    r.log_estimate = a.log_sum_T() - std::log(static_cast<double>(N));
    r.mean_logT = a.sum / N;
    r.var_logT = std::max(0.0, a.sumsq / N - r.mean_logT * r.mean_logT);
    r.nv_empirical = std::exp(std::log(static_cast<double>(N)) + a.log_sum_T2() - 2.0 * a.log_sum_T());
    r.rel_stderr = std::sqrt(std::max(0.0, (r.nv_empirical - 1.0) / N));
    r.stderr_unreliable = r.nv_empirical > static_cast<double>(N) / 10.0;
    r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// Estimates a statistic two ways from one sample set: the count form
// (1/N) sum delta T (log scale) estimating #{pi : predicate}, and the ratio
// form sum delta T / sum T estimating the uniform probability.
struct StatisticEstimate {
    EstimateReport base;
    double log_count_form = -std::numeric_limits<double>::infinity();
    double ratio_form = 0;
    std::uint64_t hits = 0;
};

inline StatisticEstimate estimate_statistic(const BipartiteGraph& g, Algo algo,
                                            const std::function<bool(const Matching&)>& predicate,
                                            std::uint64_t N, std::uint64_t seed, int workers = 1) {
    if (N < 1) throw validation_error("sample count must be positive");
    const Sampler s = sampler_for(g, algo);
    const detail::Accum a = detail::run_chunks(s, N, seed, workers, predicate);
    StatisticEstimate out;
    out.base.n = g.n();
    out.base.family = family_name(g.family());
    out.base.algorithm = algo_name(algo);
    out.base.samples = N;
    out.base.seed = seed;
    out.base.log_estimate = a.log_sum_T() - std::log(static_cast<double>(N));
    out.base.mean_logT = a.sum / N;
    out.base.var_logT = std::max(0.0, a.sumsq / N - out.base.mean_logT * out.base.mean_logT);
    out.base.nv_empirical =
        std::exp(std::log(static_cast<double>(N)) + a.log_sum_T2() - 2.0 * a.log_sum_T());
    out.base.rel_stderr = std::sqrt(std::max(0.0, (out.base.nv_empirical - 1.0) / N));
    out.base.stderr_unreliable = out.base.nv_empirical > static_cast<double>(N) / 10.0;
    out.hits = a.flagged;
    if (a.flagged > 0) {
        out.log_count_form = a.log_sum_T_flagged() - std::log(static_cast<double>(N));
        out.ratio_form = std::exp(a.log_sum_T_flagged() - a.log_sum_T());
    }
    return out;
}

// Log-weights under the uniform measure: matchings drawn exactly uniformly,
// the sampler replayed on them (its order randomness intact). This is the
// variable whose mean, variance and limit law the moment machinery predicts.
inline std::vector<double> sample_uniform_log_weights(const BipartiteGraph& g, Algo algo,
                                                      std::uint64_t N, std::uint64_t seed,
                                                      int workers = 1) {
    const Sampler s = sampler_for(g, algo);
    std::vector<double> out(N);
    const std::uint64_t nchunks = (N + detail::kChunk - 1) / detail::kChunk;
    std::atomic<std::uint64_t> next{0};
    auto work = [&] {
        for (;;) {
            const std::uint64_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            const std::uint64_t hi = std::min(N, (c + 1) * detail::kChunk);
            for (std::uint64_t k = c * detail::kChunk; k < hi; ++k) {
                RngStream rng(seed, k);
                const Matching pi = sample_uniform_matching(g, rng);
                out[k] = conditioned_log_weight(s, pi, rng);
            }
        }
    };
    workers = std::max(1, workers);
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    return out;
}

// Exact Var_u[log T*] of the tuned rules over a grid of sizes; bounded in n.
struct StarSweepRow {
    int n;
    double mean, variance, mean_per_n;
};

inline std::vector<StarSweepRow> star_variance_sweep(GfId id, const std::vector<int>& ns) {
    int nmax = 0;
    for (int n : ns) nmax = std::max(nmax, n);
    const auto gf = detail::make_gf(id);
    const auto jets = detail::gf_jets(gf, nmax);
    std::vector<StarSweepRow> rows;
    for (int n : ns)
        rows.push_back({n, jets[n].mean(), jets[n].variance(), jets[n].mean() / n});
    return rows;
}

// ---------------------------------------------------------------------------
// Comparison tables
// ---------------------------------------------------------------------------

struct TableResult {
    int id = 0;
    bool asymptotic = false;
    std::vector<std::string> header;                       // "n", then the sizes
    std::vector<std::pair<std::string, std::vector<double>>> rows;
};

namespace detail {
inline double table_n_star(Family fam, int param, Algo a, int n, bool asymptotic) {
    if (fam == Family::Fibonacci && param == 2 && a == Algo::Greedy) {
        // no exact recurrence for this pair: always the renewal asymptotics
        return std::exp(log_n_star_asymptotic(fam, param, a, n, fib2_counts().log_at(n)));
    }
    if (asymptotic) {
        double lc = fam == Family::Fibonacci
                        ? (param == 1 ? fib1_counts().log_at(n) : fib2_counts().log_at(n))
                        : dist2_counts().log_at(n);
        return std::exp(log_n_star_asymptotic(fam, param, a, n, lc));
    }
    const BipartiteGraph g = fam == Family::Fibonacci ? BipartiteGraph::fibonacci(param, n)
                                                      : BipartiteGraph::distance(param, n);
    return moments_for(g, a, n).n_star();
}

inline double table_n_var_fib1(Algo a, int n, bool asymptotic) {
    if (asymptotic) return nv_asymptotics(a, n);
    return moments_for(BipartiteGraph::fibonacci(1, n), a, n).n_var();
}
}  // namespace detail

// Reproduces the three comparison tables. `asymptotic` switches the moment
// source from exact finite-n recurrences to the mu n + sigma sqrt(n) forms.
inline TableResult reproduce_table(int id, bool asymptotic = false) {
    TableResult t;
    t.id = id;
    t.asymptotic = asymptotic;
    auto pow7 = [](int n) { return std::pow(static_cast<double>(n), 7.0); };
    if (id == 2) {
        const std::vector<int> ns = {200, 300, 500, 1000};
        t.header = {"n", "200", "300", "500", "1000"};
        std::vector<double> nsr, nvr, nsf, nvf, nsg, nvg, n7, fn;
        for (int n : ns) {
            nsr.push_back(detail::table_n_star(Family::Fibonacci, 1, Algo::Random, n, asymptotic));
            nvr.push_back(detail::table_n_var_fib1(Algo::Random, n, asymptotic));
            nsf.push_back(detail::table_n_star(Family::Fibonacci, 1, Algo::Fixed, n, asymptotic));
            nvf.push_back(detail::table_n_var_fib1(Algo::Fixed, n, asymptotic));
            nsg.push_back(detail::table_n_star(Family::Fibonacci, 1, Algo::Greedy, n, asymptotic));
            nvg.push_back(detail::table_n_var_fib1(Algo::Greedy, n, asymptotic));
            n7.push_back(pow7(n));
            fn.push_back(std::exp(fib1_counts().log_at(n)));
        }
        t.rows = {{"N*_r", nsr}, {"N^v_r", nvr}, {"N*_f", nsf}, {"N^v_f", nvf},
                  {"N*_g", nsg}, {"N^v_g", nvg}, {"n^7", n7},  {"F_{n,1}", fn}};
    } else if (id == 3) {
        const std::vector<int> ns = {200, 300, 500, 1000};
        t.header = {"n", "200", "300", "500", "1000"};
        std::vector<double> r, f, g, n7, fn;
        for (int n : ns) {
            r.push_back(detail::table_n_star(Family::Fibonacci, 2, Algo::Random, n, asymptotic));
            f.push_back(detail::table_n_star(Family::Fibonacci, 2, Algo::Fixed, n, asymptotic));
            g.push_back(detail::table_n_star(Family::Fibonacci, 2, Algo::Greedy, n, asymptotic));
            n7.push_back(pow7(n));
            fn.push_back(std::exp(fib2_counts().log_at(n)));
        }
        t.rows = {{"N*_{r,2}", r}, {"N*_{f,2}", f}, {"N*_{g,2}", g}, {"n^7", n7}, {"F_{n,2}", fn}};
    } else if (id == 4) {
        const std::vector<int> ns = {200, 300, 400, 500};
        t.header = {"n", "200", "300", "400", "500"};
        std::vector<double> f, n7, dn;
        for (int n : ns) {
            f.push_back(detail::table_n_star(Family::Distance, 2, Algo::Fixed, n, asymptotic));
            n7.push_back(pow7(n));
            dn.push_back(std::exp(dist2_counts().log_at(n)));
        }
        t.rows = {{"N*_{f,2}", f}, {"n^7", n7}, {"D_{n,2}", dn}};
    } else {
        throw validation_error("table id must be 2, 3 or 4");
    }
    return t;
}

}  // namespace simatch
