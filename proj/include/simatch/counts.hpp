#pragma once

#include <cmath>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "simatch/graph.hpp"
#include "simatch/matching.hpp"

namespace simatch {

// Cached integer sequence with scaled-float mirrors for fast exact ratios.
class CountTable {
  public:
    explicit CountTable(std::function<void(std::vector<BigInt>&)> extend) : extend_(std::move(extend)) {}

    const BigInt& at(int n) const {
        ensure(n);
        return c_[n];
    }
    ScaledFloat scaled(int n) const {
        ensure(n);
        return s_[n];
    }
    // a*b/c as double, computed in scaled-float (exact to ~1e-15 relative).
    double ratio(int a, int n) const { return (scaled(a) / scaled(n)).to_double(); }
    double ratio2(int a, int b, int n) const { return (scaled(a) * scaled(b) / scaled(n)).to_double(); }
    double log_at(int n) const { return scaled(n).log(); }

  private:
    void ensure(int n) const {
        std::lock_guard<std::mutex> lock(mu_);
        while (static_cast<int>(c_.size()) <= n) {
            extend_(c_);
            while (s_.size() < c_.size()) s_.push_back(ScaledFloat::from_big(c_[s_.size()]));
        }
    }
    std::function<void(std::vector<BigInt>&)> extend_;
    mutable std::vector<BigInt> c_;
    mutable std::vector<ScaledFloat> s_;
    mutable std::mutex mu_;
};

// F_{n,1} = |{pi : |pi(i)-i| <= 1}| (the Fibonacci numbers, offset by one).
inline const CountTable& fib1_counts() {
    static CountTable t([](std::vector<BigInt>& c) {
        if (c.empty()) {
            c = {1, 1};
            return;
        }
        const auto k = c.size();
        c.push_back(c[k - 1] + c[k - 2]);
    });
    return t;
}

// F_{n,2}: tribonacci recurrence.
inline const CountTable& fib2_counts() {
    static CountTable t([](std::vector<BigInt>& c) {
        if (c.size() < 3) {
            c = {1, 1, 2};
            return;
        }
        const auto k = c.size();
        c.push_back(c[k - 1] + c[k - 2] + c[k - 3]);
    });
    return t;
}

// D_{n,2}: D_{n+1} = 2 D_n + 2 D_{n-2} - D_{n-4} for n >= 4.
inline const CountTable& dist2_counts() {
    static CountTable t([](std::vector<BigInt>& c) {
        if (c.size() < 5) {
            c = {1, 1, 2, 6, 14};
            return;
        }
        const auto k = c.size();
        c.push_back(2 * c[k - 1] + 2 * c[k - 3] - c[k - 5]);
    });
    return t;
}

// D'_{n,2} = #{pi in D_{n,2} : pi(1)=2} = sum_{k<=n-2} D_{k,2}.
inline BigInt count_prefix_d2(int n) {
    if (n < 0) throw validation_error("count_prefix_d2: negative n");
    BigInt s = 0;
    for (int k = 0; k + 2 <= n; ++k) s += dist2_counts().at(k);
    return s;
}

// Band-transfer DP over used-value masks in a sliding window.
// State bits cover values [i-l, i+u] when left vertex i is next.
inline BigInt count_transfer_dp(const BipartiteGraph& g, int max_state_bits = limits().dp_state_bits) {
    const int n = g.n();
    if (n == 0) return 1;
    const int l = g.lower_bandwidth(), u = g.upper_bandwidth();
    const int w = l + u + 1;
    if (w > max_state_bits)
        throw limit_error("band transfer DP: window of " + std::to_string(w) +
                          " bits exceeds the configured limit");
    const std::uint32_t full = (w >= 32) ? 0xffffffffu : ((1u << w) - 1);
    auto initial_mask = [&] {
        std::uint32_t m = 0;
        for (int k = 0; k < w; ++k) {
            const int v = 0 - l + k;
            if (v < 0 || v >= n) m |= (1u << k);
        }
        return m;
    };
    std::unordered_map<std::uint32_t, BigInt> cur;
    cur[initial_mask()] = 1;
    for (int i = 0; i < n; ++i) {
        std::unordered_map<std::uint32_t, BigInt> next;
        for (const auto& [mask, cnt] : cur) {
            for (int j : g.neighbors(i)) {
                const int k = j - (i - l);
                if (mask & (1u << k)) continue;
                std::uint32_t m2 = mask | (1u << k);
                if (!(m2 & 1u)) continue;  // value i-l leaves scope unused: dead
                m2 >>= 1;
                const int incoming = i + 1 + u;  // enters at the top bit
                if (incoming >= n) m2 |= (1u << (w - 1));
                next[m2] += cnt;
            }
        }
        cur = std::move(next);
    }
    BigInt total = 0;
    for (const auto& [mask, cnt] : cur)
        if (mask == full) total += cnt;
    return total;
}

// Ryser permanent with Gray-code subset updates. Exponential; small n only.
inline BigInt permanent_ryser(const BipartiteGraph& g) {
    const int n = g.n();
    if (n == 0) return 1;
    if (n > 30) throw limit_error("Ryser permanent limited to n <= 30");
    std::vector<BigInt> row_sum(n, 0);
    BigInt total = 0;
    std::uint64_t prev_gray = 0;
    for (std::uint64_t s = 1; s < (1ull << n); ++s) {
        const std::uint64_t gray = s ^ (s >> 1);
        const std::uint64_t diff = gray ^ prev_gray;
        const int j = __builtin_ctzll(diff);
        const bool added = gray & diff;
        for (int i = 0; i < n; ++i)
            if (g.adjacent(i, j)) row_sum[i] += added ? 1 : -1;
        prev_gray = gray;
        BigInt prod = 1;
        for (int i = 0; i < n; ++i) {
            if (row_sum[i] == 0) {
                prod = 0;
                break;
            }
            prod *= row_sum[i];
        }
        const int bits = __builtin_popcountll(gray);
        total += ((n - bits) % 2 == 0) ? prod : -prod;
    }
    return total;
}

// Exact number of perfect matchings. Closed recurrences for the analyzed
// families, band transfer DP otherwise, Ryser as a last resort.
inline BigInt count_exact(const BipartiteGraph& g, int max_state_bits = limits().dp_state_bits) {
    const int n = g.n();
    if (n == 0) return 1;
    if (g.family() == Family::Fibonacci && g.family_param() == 1) return fib1_counts().at(n);
    if (g.family() == Family::Fibonacci && g.family_param() == 2) return fib2_counts().at(n);
    if (g.family() == Family::Distance && g.family_param() == 2) return dist2_counts().at(n);
    const int w = g.lower_bandwidth() + g.upper_bandwidth() + 1;
    if (w <= max_state_bits) return count_transfer_dp(g, max_state_bits);
    if (n <= 30) return permanent_ryser(g);
    throw limit_error("count_exact: graph bandwidth exceeds the DP limit and n > 30");
}

inline double log_count_exact(const BipartiteGraph& g) {
    switch (g.family()) {
        case Family::Fibonacci:
            if (g.family_param() == 1) return fib1_counts().log_at(g.n());
            if (g.family_param() == 2) return fib2_counts().log_at(g.n());
            break;
        case Family::Distance:
            if (g.family_param() == 2) return dist2_counts().log_at(g.n());
            break;
        default: break;
    }
    return log_big(count_exact(g));
}

// Sample-size bound from the permanent inequality: log of
// (1/M_n) * prod_i d_i!^{1/d_i} with the actual left degrees.
inline double bregman_bound(const BipartiteGraph& g) {
    double s = 0.0;
    for (int i = 0; i < g.n(); ++i) {
        const double d = g.degree(i);
        s += std::lgamma(d + 1.0) / d;
    }
    return s - log_count_exact(g);
}

// The same bound with every degree replaced by the maximum degree; this is
// the form whose Fibonacci specialization is 6^{n/3}/F_{n,1}.
inline double bregman_bound_uniform(const BipartiteGraph& g) {
    int dmax = 0;
    for (int i = 0; i < g.n(); ++i) dmax = std::max(dmax, g.degree(i));
    if (dmax == 0) return 0.0;
    return g.n() * std::lgamma(dmax + 1.0) / dmax - log_count_exact(g);
}

}  // namespace simatch
