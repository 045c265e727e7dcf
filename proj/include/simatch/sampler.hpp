#pragma once

#include <iostream>
#include <map>
#include <optional>
#include <unordered_map>

#include "simatch/counts.hpp"
#include "simatch/graph.hpp"
#include "simatch/jet.hpp"
#include "simatch/matching.hpp"
#include "simatch/rng.hpp"

namespace simatch {

struct unsupported_error : validation_error {
    using validation_error::validation_error;
};
struct not_a_matching_error : validation_error {
    using validation_error::validation_error;
};

enum class PolicyKind { FixedTopDown, UniformRandom, GreedyFib1, GreedyCycleFib2, RandomCycle, Explicit };
enum class RuleKind { Uniform, FibStarFixed, FibStarGreedy, Fib2StarFixed, Dist2StarFixed };

struct OrderPolicy {
    PolicyKind kind = PolicyKind::FixedTopDown;
    std::vector<int> order;  // Explicit only; a permutation of [0, n)

    static OrderPolicy fixed() { return {PolicyKind::FixedTopDown, {}}; }
    static OrderPolicy random() { return {PolicyKind::UniformRandom, {}}; }
    static OrderPolicy greedy_fib1() { return {PolicyKind::GreedyFib1, {}}; }
    static OrderPolicy greedy_cycle_fib2() { return {PolicyKind::GreedyCycleFib2, {}}; }
    static OrderPolicy random_cycle() { return {PolicyKind::RandomCycle, {}}; }
    static OrderPolicy explicit_order(std::vector<int> o) { return {PolicyKind::Explicit, std::move(o)}; }
};

inline const char* policy_name(PolicyKind k) {
    switch (k) {
        case PolicyKind::FixedTopDown: return "fixed";
        case PolicyKind::UniformRandom: return "random";
        case PolicyKind::GreedyFib1: return "greedy";
        case PolicyKind::GreedyCycleFib2: return "greedy-cycle";
        case PolicyKind::RandomCycle: return "random-cycle";
        default: return "explicit";
    }
}

inline const char* rule_name(RuleKind k) {
    switch (k) {
        case RuleKind::Uniform: return "uniform";
        case RuleKind::FibStarFixed: return "fib-star-fixed";
        case RuleKind::FibStarGreedy: return "fib-star-greedy";
        case RuleKind::Fib2StarFixed: return "fib2-star-fixed";
        default: return "dist2-star-fixed";
    }
}

// ---------------------------------------------------------------------------
// Tuned probability tables ("almost perfect" rules)
// ---------------------------------------------------------------------------

// Real algebraic constants used by the tuned rules.
inline double golden_ratio() { return (1.0 + std::sqrt(5.0)) / 2.0; }

// Root of x^3 = x^2 + x + 1 (growth of the 2-Fibonacci counts).
inline double tribonacci_constant() {
    double x = 1.8;
    for (int it = 0; it < 64; ++it) {
        const double f = ((x - 1) * x - 1) * x - 1;
        const double df = (3 * x - 2) * x - 1;
        x -= f / df;
    }
    return x;
}

// Root of x^5 = 2x^4 + 2x^2 - 1 (growth of the distance-2 counts).
inline double dist2_growth_constant() {
    double x = 2.3;
    for (int it = 0; it < 64; ++it) {
        const double f = x * x * x * x * x - 2 * x * x * x * x - 2 * x * x + 1;
        const double df = 5 * x * x * x * x - 8 * x * x * x - 4 * x;
        x -= f / df;
    }
    return x;
}

// Limit of D'_{n,2}/D_{n,2}: (g^4+g^3+g^2-g-1)/(2 g^5).
inline double dist2_prefix_ratio_constant() {
    const double g = dist2_growth_constant();
    return (g * g * g * g + g * g * g + g * g - g - 1) / (2 * std::pow(g, 5));
}

// A tuned probability table plus its normalization bookkeeping.
struct StarTable {
    std::vector<double> p;
    double deviation = 0.0;  // |1 - sum| before renormalization
    bool renormalized = false;

    void normalize(const char* what) {
        double s = 0;
        for (double x : p) s += x;
        deviation = std::abs(1.0 - s);
        if (deviation > 1e-12) {
            std::cerr << "simatch: " << what << " table off by " << deviation << ", renormalizing\n";
            for (double& x : p) x /= s;
            renormalized = true;
        }
    }
};

struct StarTables {
    StarTable fib_fixed;     // pi(i)=i, i+1
    StarTable fib_greedy;    // pivot values i-1, i, i+1
    StarTable fib2_fixed;    // pi(i)=i, i+1, i+2
    StarTable dist2_case1;   // five block moves from an aligned state
    StarTable dist2_case2;   // three block moves from a carry state
};

inline const StarTables& star_rule_tables() {
    static const StarTables tables = [] {
        StarTables t;
        const double phi = golden_ratio();
        t.fib_fixed.p = {1 / phi, 1 / (phi * phi)};
        t.fib_greedy.p = {1 / (phi * phi), 1 / (phi * phi), 1 / (phi * phi * phi)};
        const double p2 = tribonacci_constant();
        t.fib2_fixed.p = {1 / p2, 1 / (p2 * p2), 1 / (p2 * p2 * p2)};
        const double g = dist2_growth_constant();
        const double gp = dist2_prefix_ratio_constant();
        t.dist2_case1.p = {1 / g, gp, gp / g, 1 / (g * g * g), 1 / (g * g * g * g)};
        t.dist2_case2.p = {1 / (gp * g * g), 1 / (gp * g * g * g), 1 / (g * g)};
        t.fib_fixed.normalize("fib-star-fixed");
        t.fib_greedy.normalize("fib-star-greedy");
        t.fib2_fixed.normalize("fib2-star-fixed");
        t.dist2_case1.normalize("dist2-star-fixed case 1");
        t.dist2_case2.normalize("dist2-star-fixed case 2");
        return t;
    }();
    return tables;
}

// ---------------------------------------------------------------------------
// Moves, menus and traces
// ---------------------------------------------------------------------------

// One selectable move: a handful of simultaneous assignments.
struct Move {
    int assigns[5][2];  // (left, value) pairs
    int count = 0;
    double prob = 0.0;
    long num = 0, den = 0;  // exact probability when rational (den > 0)

    void add(int i, int v) {
        assigns[count][0] = i;
        assigns[count][1] = v;
        ++count;
    }
    bool consistent_with(const Matching& pi) const {
        for (int k = 0; k < count; ++k)
            if (pi[assigns[k][0]] != assigns[k][1]) return false;
        return true;
    }
};

struct Menu {
    std::vector<Move> moves;

    void clear() { moves.clear(); }
    Move& push() {
        moves.emplace_back();
        return moves.back();
    }
    void set_uniform() {
        const int c = static_cast<int>(moves.size());
        for (auto& m : moves) {
            m.prob = 1.0 / c;
            m.num = 1;
            m.den = c;
        }
    }
    int pick(RngStream& rng) const {
        double u = rng.next_double();
        for (std::size_t k = 0; k + 1 < moves.size(); ++k) {
            u -= moves[k].prob;
            if (u < 0) return static_cast<int>(k);
        }
        return static_cast<int>(moves.size()) - 1;
    }
    int find(const Matching& pi) const {
        for (std::size_t k = 0; k < moves.size(); ++k)
            if (moves[k].consistent_with(pi)) return static_cast<int>(k);
        return -1;
    }
};

struct TraceStep {
    int location;   // index (or pivot) the step acted on
    int span_lo, span_hi;
    int menu_size;
    double prob;
    long num, den;  // 0/0 when irrational
};

// ---------------------------------------------------------------------------
// Per-family sampling processes
//
// A process walks one sampling run: pick_location() chooses where to act
// (consuming randomness only for random-order policies), build_menu() lists
// the moves with their probabilities, apply() commits one. All option sets
// are the feasibility-checked allowable options, realized through the
// structural rules of each family.
// ---------------------------------------------------------------------------

class Fib1Process {
  public:
    Fib1Process(int n, PolicyKind policy, RuleKind rule, std::vector<int> order = {})
        : n_(n), policy_(policy), rule_(rule), order_(std::move(order)) {
        det_.assign(n_, 0);
        if (policy_ == PolicyKind::UniformRandom) {
            open_.resize(n_);
            pos_.resize(n_);
            for (int i = 0; i < n_; ++i) open_[i] = pos_[i] = i;
        }
        pi_.assign(n_, kUnassigned);
    }

    bool done() const { return assigned_ == n_; }

    int pick_location(RngStream* rng) {
        switch (policy_) {
            case PolicyKind::FixedTopDown:
                while (det_[cursor_]) ++cursor_;
                return cursor_;
            case PolicyKind::Explicit:
                while (det_[order_[cursor_]]) ++cursor_;
                return order_[cursor_];
            case PolicyKind::GreedyFib1: {
                while (lowest_ < n_ && det_[lowest_]) ++lowest_;
                return greedy_pivot(lowest_);
            }
            case PolicyKind::UniformRandom:
                return open_[rng->next_below(static_cast<int>(open_.size()))];
            default:
                throw unsupported_error("policy not valid on a 1-Fibonacci graph");
        }
    }

    int greedy_pivot(int lowest) const { return std::min(lowest + 1, n_ - 1); }

    void build_menu(int i, Menu& menu) const {
        menu.clear();
        const bool lo = i - 1 >= 0 && !det_[i - 1];
        const bool hi = i + 1 < n_ && !det_[i + 1];
        // under the greedy order, choices at the pivot force the index below
        const bool force_low = policy_ == PolicyKind::GreedyFib1 && lowest_ < i;
        if (lo) {
            Move& m = menu.push();
            m.add(i, i - 1);
            m.add(i - 1, i);
        }
        {
            Move& m = menu.push();
            m.add(i, i);
            if (force_low) m.add(lowest_, lowest_);
        }
        if (hi) {
            Move& m = menu.push();
            m.add(i, i + 1);
            m.add(i + 1, i);
            if (force_low) m.add(lowest_, lowest_);
        }
        switch (rule_) {
            case RuleKind::Uniform:
                menu.set_uniform();
                break;
            case RuleKind::FibStarFixed: {
                // fixed order: the option set is {i-1} (forced), {i} or {i, i+1}
                const auto& t = star_rule_tables().fib_fixed;
                if (menu.moves.size() == 2 && !lo) {
                    menu.moves[0].prob = t.p[0];
                    menu.moves[1].prob = t.p[1];
                } else {
                    menu.set_uniform();
                }
                break;
            }
            case RuleKind::FibStarGreedy: {
                const auto& t = star_rule_tables().fib_greedy;
                if (menu.moves.size() == 3)
                    for (int k = 0; k < 3; ++k) menu.moves[k].prob = t.p[k];
                else
                    menu.set_uniform();
                break;
            }
            default:
                throw unsupported_error("rule not valid on a 1-Fibonacci graph");
        }
    }

    void apply(const Move& m) {
        for (int k = 0; k < m.count; ++k) settle(m.assigns[k][0], m.assigns[k][1]);
    }

    const Matching& matching() const { return pi_; }

  private:
    void settle(int i, int v) {
        pi_[i] = v;
        det_[i] = 1;
        ++assigned_;
        if (policy_ == PolicyKind::UniformRandom) {
            const int p = pos_[i];
            const int last = static_cast<int>(open_.size()) - 1;
            std::swap(open_[p], open_[last]);
            pos_[open_[p]] = p;
            open_.pop_back();
        }
    }

    int n_;
    PolicyKind policy_;
    RuleKind rule_;
    std::vector<int> order_;
    std::vector<char> det_;
    std::vector<int> open_, pos_;
    Matching pi_;
    int cursor_ = 0, lowest_ = 0, assigned_ = 0;
};

class Fib2FixedProcess {
  public:
    Fib2FixedProcess(int n, RuleKind rule) : n_(n), rule_(rule) {
        pi_.assign(n_, kUnassigned);
        used_.assign(n_, 0);
    }

    bool done() const { return cursor_ == n_; }
    int pick_location(RngStream*) const { return cursor_; }

    void build_menu(int i, Menu& menu) const {
        menu.clear();
        if (i - 1 >= 0 && !used_[i - 1]) {
            // last chance for value i-1
            menu.push().add(i, i - 1);
            menu.set_uniform();
            return;
        }
        for (int v = i; v <= std::min(i + 2, n_ - 1); ++v) menu.push().add(i, v);
        if (rule_ == RuleKind::Fib2StarFixed && menu.moves.size() == 3) {
            const auto& t = star_rule_tables().fib2_fixed;
            for (int k = 0; k < 3; ++k) menu.moves[k].prob = t.p[k];
        } else {
            menu.set_uniform();
        }
    }

    void apply(const Move& m) {
        pi_[m.assigns[0][0]] = m.assigns[0][1];
        used_[m.assigns[0][1]] = 1;
        ++cursor_;
    }

    const Matching& matching() const { return pi_; }

  private:
    int n_;
    RuleKind rule_;
    Matching pi_;
    std::vector<char> used_;
    int cursor_ = 0;
};

// The six cycle configurations a 2-Fibonacci matching can take around an
// index: spans of length 1..3, anchored left, centered or right.
inline void fib2_cycle_moves(int i, int n, const std::vector<char>& det, Menu& menu) {
    auto open = [&](int k) { return k >= 0 && k < n && !det[k]; };
    // left 3-cycle: pi(i-2, i-1, i) = i, i-2, i-1
    if (open(i - 2) && open(i - 1)) {
        Move& m = menu.push();
        m.add(i - 2, i);
        m.add(i - 1, i - 2);
        m.add(i, i - 1);
    }
    // left transposition
    if (open(i - 1)) {
        Move& m = menu.push();
        m.add(i - 1, i);
        m.add(i, i - 1);
    }
    // centered 3-cycle: pi(i-1, i, i+1) = i+1, i-1, i
    if (open(i - 1) && open(i + 1)) {
        Move& m = menu.push();
        m.add(i - 1, i + 1);
        m.add(i, i - 1);
        m.add(i + 1, i);
    }
    // fixed point
    menu.push().add(i, i);
    // right transposition
    if (open(i + 1)) {
        Move& m = menu.push();
        m.add(i, i + 1);
        m.add(i + 1, i);
    }
    // right 3-cycle: pi(i, i+1, i+2) = i+2, i, i+1
    if (open(i + 1) && open(i + 2)) {
        Move& m = menu.push();
        m.add(i, i + 2);
        m.add(i + 1, i);
        m.add(i + 2, i + 1);
    }
}

// Prefix patterns for the block greedy sampler on 2-Fibonacci graphs:
// all matchings of a fresh window whose first closed prefix has size >= 3.
// Derived by classification of the size-5 window; 4/3/2 patterns of spans
// 3/4/5.
inline const std::vector<std::vector<int>>& fib2_greedy_menu() {
    static const std::vector<std::vector<int>> menu = [] {
        std::vector<std::vector<int>> out;
        const auto g = BipartiteGraph::fibonacci(2, 5);
        for (const auto& pi : enumerate_matchings(g)) {
            // first prefix closed at index >= 3: the structure chosen at pivot 3
            int span = 0;
            int hi = -1;
            for (int k = 0; k < 5; ++k) {
                hi = std::max(hi, pi[k]);
                if (hi == k && k + 1 >= 3) {
                    span = k + 1;
                    break;
                }
            }
            if (span == 0) continue;
            std::vector<int> pat(pi.begin(), pi.begin() + span);
            if (std::find(out.begin(), out.end(), pat) == out.end()) out.push_back(pat);
        }
        int c3 = 0, c4 = 0, c5 = 0;
        for (const auto& p : out) (p.size() == 3 ? c3 : p.size() == 4 ? c4 : c5)++;
        if (out.size() != 9 || c3 != 4 || c4 != 3 || c5 != 2)
            throw std::logic_error("block menu classification produced an unexpected structure set");
        return out;
    }();
    return menu;
}

// Complete matchings of a fresh 2-Fibonacci window of size 1..4; the block
// greedy sampler finishes with one uniform draw over these.
inline const std::vector<std::vector<Matching>>& fib2_small_completions() {
    static const std::vector<std::vector<Matching>> table = [] {
        std::vector<std::vector<Matching>> t(5);
        for (int l = 1; l <= 4; ++l) t[l] = enumerate_matchings(BipartiteGraph::fibonacci(2, l));
        return t;
    }();
    return table;
}

class Fib2CycleProcess {
  public:
    Fib2CycleProcess(int n, PolicyKind policy) : n_(n), policy_(policy) {
        pi_.assign(n_, kUnassigned);
        det_.assign(n_, 0);
        if (policy_ == PolicyKind::RandomCycle) {
            open_.resize(n_);
            pos_.resize(n_);
            for (int i = 0; i < n_; ++i) open_[i] = pos_[i] = i;
        }
    }

    bool done() const { return assigned_ == n_; }

    int pick_location(RngStream* rng) {
        if (policy_ == PolicyKind::RandomCycle)
            return open_[rng->next_below(static_cast<int>(open_.size()))];
        while (lowest_ < n_ && det_[lowest_]) ++lowest_;
        return lowest_;  // block greedy acts on the suffix starting here
    }

    void build_menu(int loc, Menu& menu) const {
        menu.clear();
        if (policy_ == PolicyKind::RandomCycle) {
            fib2_cycle_moves(loc, n_, det_, menu);
            menu.set_uniform();
            return;
        }
        const int left = n_ - loc;
        if (left <= 4) {
            for (const auto& pat : fib2_small_completions()[left]) {
                Move& m = menu.push();
                for (int k = 0; k < left; ++k) m.add(loc + k, loc + pat[k]);
            }
        } else {
            for (const auto& pat : fib2_greedy_menu()) {
                Move& m = menu.push();
                for (std::size_t k = 0; k < pat.size(); ++k)
                    m.add(loc + static_cast<int>(k), loc + pat[k]);
            }
        }
        menu.set_uniform();
    }

    void apply(const Move& m) {
        for (int k = 0; k < m.count; ++k) {
            const int i = m.assigns[k][0];
            pi_[i] = m.assigns[k][1];
            det_[i] = 1;
            ++assigned_;
            if (policy_ == PolicyKind::RandomCycle) {
                const int p = pos_[i];
                const int last = static_cast<int>(open_.size()) - 1;
                std::swap(open_[p], open_[last]);
                pos_[open_[p]] = p;
                open_.pop_back();
            }
        }
    }

    const Matching& matching() const { return pi_; }

  private:
    int n_;
    PolicyKind policy_;
    Matching pi_;
    std::vector<char> det_;
    std::vector<int> open_, pos_;
    int lowest_ = 0, assigned_ = 0;
};

// Feasible single-value options for the fixed-order distance-2 sampler as a
// function of local state: pending = unused values below i (within {i-2,i-1}),
// ahead = used values at or above i (within {i,i+1}), dtop = n-i capped.
// Derived once by brute-force residual matching and cached.
inline std::vector<int> dist2_fixed_option_offsets(int pmask, int amask, int dtop) {
    static std::map<std::tuple<int, int, int>, std::vector<int>> cache;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    const auto key = std::make_tuple(pmask, amask, dtop);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;

    // Build the residual problem explicitly: lefts 0..dtop-1 stand for
    // indices i..i+dtop-1; values are pending ones plus the unused window.
    std::vector<int> values;  // offsets relative to i
    if (pmask & 1) values.push_back(-2);
    if (pmask & 2) values.push_back(-1);
    for (int v = 0; v < dtop; ++v) {
        if (v == 0 && (amask & 1)) continue;
        if (v == 1 && (amask & 2)) continue;
        values.push_back(v);
    }
    const int m = dtop;
    std::vector<std::vector<int>> adj(m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < static_cast<int>(values.size()); ++b)
            if (std::abs(values[b] - a) <= 2) adj[a].push_back(b);

    auto feasible = [&](int banned_left, int banned_val) {
        std::vector<int> match_r(values.size(), kUnassigned);
        std::vector<char> seen(values.size());
        auto aug = [&](auto&& self, int a) -> bool {
            for (int b : adj[a]) {
                if (b == banned_val || seen[b]) continue;
                seen[b] = 1;
                if (match_r[b] == kUnassigned || self(self, match_r[b])) {
                    match_r[b] = a;
                    return true;
                }
            }
            return false;
        };
        for (int a = 0; a < m; ++a) {
            if (a == banned_left) continue;
            std::fill(seen.begin(), seen.end(), 0);
            if (!aug(aug, a)) return false;
        }
        return true;
    };

    std::vector<int> opts;
    for (int b = 0; b < static_cast<int>(values.size()); ++b) {
        if (std::abs(values[b] - 0) > 2) continue;
        if (feasible(0, b)) opts.push_back(values[b]);
    }
    cache[key] = opts;
    return opts;
}

class Dist2FixedProcess {
  public:
    Dist2FixedProcess(int n, RuleKind rule) : n_(n), rule_(rule) {
        pi_.assign(n_, kUnassigned);
        used_.assign(n_, 0);
    }

    bool done() const { return cursor_ == n_; }
    int pick_location(RngStream*) const { return cursor_; }

    void build_menu(int i, Menu& menu) const {
        menu.clear();
        const int pmask = (i - 2 >= 0 && !used_[i - 2] ? 1 : 0) | (i - 1 >= 0 && !used_[i - 1] ? 2 : 0);
        const int amask = (i < n_ && used_[i] ? 1 : 0) | (i + 1 < n_ && used_[i + 1] ? 2 : 0);

        if (rule_ == RuleKind::Dist2StarFixed) {
            if (pmask == 0 && amask == 0 && n_ - i >= 4) {
                const auto& t = star_rule_tables().dist2_case1;
                Move* m = &menu.push();  // pi(i) = i
                m->add(i, i);
                m->prob = t.p[0];
                m = &menu.push();  // pi(i) = i+1
                m->add(i, i + 1);
                m->prob = t.p[1];
                m = &menu.push();  // pi(i, i+1) = i+2, i
                m->add(i, i + 2);
                m->add(i + 1, i);
                m->prob = t.p[2];
                m = &menu.push();  // reversal block of three
                m->add(i, i + 2);
                m->add(i + 1, i + 1);
                m->add(i + 2, i);
                m->prob = t.p[3];
                m = &menu.push();  // interleaved block of four
                m->add(i, i + 2);
                m->add(i + 1, i + 3);
                m->add(i + 2, i);
                m->add(i + 3, i + 1);
                m->prob = t.p[4];
                return;
            }
            // carry state: value i-1 pending; its residual spans one more slot
            if (pmask == 2 && amask == 1 && n_ - i >= 3) {
                const auto& t = star_rule_tables().dist2_case2;
                Move* m = &menu.push();
                m->add(i, i - 1);
                m->prob = t.p[0];
                m = &menu.push();
                m->add(i, i + 1);
                m->add(i + 1, i - 1);
                m->prob = t.p[1];
                m = &menu.push();
                m->add(i, i + 2);
                m->add(i + 1, i - 1);
                m->prob = t.p[2];
                return;
            }
            // other states are unreachable under this rule in the bulk
        }

        const int dtop = std::min(n_ - i, 8);
        for (int off : dist2_fixed_option_offsets(pmask, amask, dtop)) menu.push().add(i, i + off);
        menu.set_uniform();
    }

    void apply(const Move& m) {
        for (int k = 0; k < m.count; ++k) {
            pi_[m.assigns[k][0]] = m.assigns[k][1];
            used_[m.assigns[k][1]] = 1;
            cursor_ = std::max(cursor_, m.assigns[k][0] + 1);
        }
    }

    const Matching& matching() const { return pi_; }

  private:
    int n_;
    RuleKind rule_;
    Matching pi_;
    std::vector<char> used_;
    int cursor_ = 0;
};

// Fallback for arbitrary graphs: all orders, uniform rule, generic
// feasibility-checked options with no multi-index moves.
class GenericProcess {
  public:
    GenericProcess(const BipartiteGraph& g, PolicyKind policy, std::vector<int> order = {})
        : g_(g), policy_(policy), order_(std::move(order)), p_(g.n()), probe_(g) {
        if (policy_ == PolicyKind::UniformRandom) {
            open_.resize(g.n());
            pos_.resize(g.n());
            for (int i = 0; i < g.n(); ++i) open_[i] = pos_[i] = i;
        }
    }

    bool done() const { return p_.open_count == 0; }

    int pick_location(RngStream* rng) {
        switch (policy_) {
            case PolicyKind::FixedTopDown:
                while (p_.assigned(cursor_)) ++cursor_;
                return cursor_;
            case PolicyKind::Explicit:
                while (p_.assigned(order_[cursor_])) ++cursor_;
                return order_[cursor_];
            case PolicyKind::UniformRandom:
                return open_[rng->next_below(static_cast<int>(open_.size()))];
            default:
                throw unsupported_error("policy requires a structured family");
        }
    }

    void build_menu(int i, Menu& menu) {
        menu.clear();
        std::vector<int> opts = (g_.family() == Family::Fibonacci && g_.family_param() == 1)
                                    ? allowable_options_fib1(g_, p_, i)
                                    : probe_.options(p_, i);
        for (int v : opts) menu.push().add(i, v);
        menu.set_uniform();
    }

    void apply(const Move& m) {
        const int i = m.assigns[0][0];
        p_.assign(i, m.assigns[0][1]);
        if (policy_ == PolicyKind::UniformRandom) {
            const int pp = pos_[i];
            const int last = static_cast<int>(open_.size()) - 1;
            std::swap(open_[pp], open_[last]);
            pos_[open_[pp]] = pp;
            open_.pop_back();
        }
    }

    const Matching& matching() const { return p_.pi; }

  private:
    const BipartiteGraph& g_;
    PolicyKind policy_;
    std::vector<int> order_;
    Partial p_;
    OptionProbe probe_;
    std::vector<int> open_, pos_;
    int cursor_ = 0;
};

// A sampled matching together with the full record of random choices and
// the accumulated log-weight log T = -sum log(step probability).
struct DecisionTrace {
    Matching pi;
    std::vector<TraceStep> steps;
    double logT = 0.0;
    std::optional<BigRat> weight_exact;  // T as an exact rational (uniform rules)

    std::string to_line() const {
        std::ostringstream s;
        s << matching_to_string(pi);
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", logT);
        s << "\t" << buf << "\t";
        for (std::size_t k = 0; k < steps.size(); ++k) {
            const auto& st = steps[k];
            if (k) s << ";";
            s << "i=" << st.location + 1 << ",span=" << st.span_lo + 1 << "-" << st.span_hi + 1
              << ",opts=" << st.menu_size << ",p=";
            if (st.den > 0)
                s << st.num << "/" << st.den;
            else {
                std::snprintf(buf, sizeof(buf), "%.17g", st.prob);
                s << buf;
            }
        }
        return s.str();
    }
};

// ---------------------------------------------------------------------------
// Sampler facade: validated (graph, policy, rule) combinations
// ---------------------------------------------------------------------------

struct Sampler {
    const BipartiteGraph* g = nullptr;
    OrderPolicy policy;
    RuleKind rule = RuleKind::Uniform;

    bool fib(int t) const { return g->family() == Family::Fibonacci && g->family_param() == t; }
    bool dist(int d) const { return g->family() == Family::Distance && g->family_param() == d; }
};

inline Sampler make_sampler(const BipartiteGraph& g, OrderPolicy policy, RuleKind rule) {
    Sampler s{&g, std::move(policy), rule};
    const PolicyKind pk = s.policy.kind;
    if (pk == PolicyKind::Explicit) {
        std::vector<int> sorted = s.policy.order;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < g.n(); ++i)
            if (i >= static_cast<int>(sorted.size()) || sorted[i] != i)
                throw validation_error("explicit order must be a permutation of the left vertices");
    }
    if (pk == PolicyKind::GreedyFib1 && !s.fib(1))
        throw unsupported_error("greedy order is defined on the 1-Fibonacci family");
    if ((pk == PolicyKind::RandomCycle || pk == PolicyKind::GreedyCycleFib2) && !s.fib(2))
        throw unsupported_error("cycle policies are defined on the 2-Fibonacci family");
    switch (rule) {
        case RuleKind::Uniform: break;
        case RuleKind::FibStarFixed:
            if (!(s.fib(1) && pk == PolicyKind::FixedTopDown))
                throw unsupported_error("fib-star-fixed requires fixed order on the 1-Fibonacci family");
            break;
        case RuleKind::FibStarGreedy:
            if (!(s.fib(1) && pk == PolicyKind::GreedyFib1))
                throw unsupported_error("fib-star-greedy requires greedy order on the 1-Fibonacci family");
            break;
        case RuleKind::Fib2StarFixed:
            if (!(s.fib(2) && pk == PolicyKind::FixedTopDown))
                throw unsupported_error("fib2-star-fixed requires fixed order on the 2-Fibonacci family");
            break;
        case RuleKind::Dist2StarFixed:
            if (!(s.dist(2) && pk == PolicyKind::FixedTopDown))
                throw unsupported_error("dist2-star-fixed requires fixed order on the distance-2 family");
            break;
    }
    return s;
}

namespace detail {

template <class Proc>
DecisionTrace run_process(Proc& proc, RngStream& rng, bool record_steps, bool exact) {
    DecisionTrace tr;
    if (exact) tr.weight_exact = BigRat(1);
    Menu menu;
    while (!proc.done()) {
        const int loc = proc.pick_location(&rng);
        proc.build_menu(loc, menu);
        if (menu.moves.empty()) throw std::logic_error("sampler reached an empty option set");
        const int k = menu.moves.size() == 1 ? 0 : menu.pick(rng);
        const Move& mv = menu.moves[k];
        tr.logT -= std::log(mv.prob);
        if (record_steps) {
            int lo = mv.assigns[0][0], hi = lo;
            for (int a = 1; a < mv.count; ++a) {
                lo = std::min(lo, mv.assigns[a][0]);
                hi = std::max(hi, mv.assigns[a][0]);
            }
            tr.steps.push_back({loc, lo, hi, static_cast<int>(menu.moves.size()), mv.prob, mv.num, mv.den});
        }
        if (tr.weight_exact) {
            if (mv.den > 0)
                *tr.weight_exact *= BigRat(mv.den, mv.num);
            else
                tr.weight_exact.reset();  // tuned rules have irrational weights
        }
        proc.apply(mv);
    }
    tr.pi = proc.matching();
    return tr;
}

// Deterministic-order replay: returns log P(pi) and, when every step is
// rational, the exact probability.
template <class Proc>
double replay_process(Proc& proc, const Matching& pi, BigRat* exact) {
    double logp = 0.0;
    if (exact) *exact = 1;
    Menu menu;
    RngStream unused(0, 0);
    while (!proc.done()) {
        const int loc = proc.pick_location(nullptr);
        proc.build_menu(loc, menu);
        const int k = menu.find(pi);
        if (k < 0) throw not_a_matching_error("matching unreachable by this sampler");
        const Move& mv = menu.moves[k];
        logp += std::log(mv.prob);
        if (exact) {
            if (mv.den > 0)
                *exact *= BigRat(mv.num, mv.den);
            else
                exact = nullptr;
        }
        proc.apply(mv);
    }
    if (proc.matching() != pi) throw not_a_matching_error("replay diverged from the target matching");
    return logp;
}

// Option count for an index inside a fresh 1-Fibonacci interval [a, b].
inline int fib1_interval_choices(int i, int a, int b) { return 1 + (i > a) + (i < b); }

// Block of i in pi for the 1-Fibonacci family: fixed point or transposition.
inline std::pair<int, int> fib1_block(const Matching& pi, int i) {
    if (pi[i] == i) return {i, i};
    return {std::min(i, pi[i]), std::max(i, pi[i])};
}

// Cycle span of i for the 2-Fibonacci family (length 1..3, contiguous).
inline std::pair<int, int> fib2_cycle_span(const Matching& pi, int i) {
    int lo = i, hi = i, j = pi[i];
    while (j != i) {
        lo = std::min(lo, j);
        hi = std::max(hi, j);
        j = pi[j];
    }
    return {lo, hi};
}

// Cycle options of i inside a fresh 2-Fibonacci interval [a, b].
inline int fib2_interval_choices(int i, int a, int b) {
    const int l = i - a, r = b - i;
    return 1 + (l >= 1) + (l >= 2) + (r >= 1) + (r >= 2) + (l >= 1 && r >= 1);
}

// Interval-averaged recursion shared by the marginal probability and the
// order-averaged weight moments of the random-order samplers:
//   R[a,b] = (1/L) sum_i lift(c_i) * R[a,s-1] * R[e+1,b]
// with [s,e] the block or cycle of i in pi. lift(c) = 1/c gives P(pi);
// lift(c) = c^t (as a jet) gives E over orders of the weight moments.
template <class Num, class Lift, class Span, class Choices>
Num interval_average(const Matching& pi, int n, const Lift& lift, const Span& span,
                     const Choices& choices) {
    std::map<std::pair<int, int>, Num> memo;
    auto rec = [&](auto&& self, int a, int b) -> Num {
        if (a > b) return Num(1);
        const auto key = std::make_pair(a, b);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        Num total(0);
        for (int i = a; i <= b; ++i) {
            const auto [s, e] = span(pi, i);
            if (s < a || e > b) throw not_a_matching_error("block leaves the interval");
            Num term = lift(choices(i, a, b));
            term = term * self(self, a, s - 1);
            term = term * self(self, e + 1, b);
            total += term;
        }
        total = total / (b - a + 1);
        memo[key] = total;
        return total;
    };
    return rec(rec, 0, n - 1);
}

// Subset-averaged recursion for the generic uniform random-order sampler.
template <class Num, class Lift>
Num subset_average(const BipartiteGraph& g, const Matching& pi, const Lift& lift) {
    const int n = g.n();
    if (n > 25) throw limit_error("order-averaged recursion limited to n <= 25");
    std::unordered_map<std::uint32_t, Num> memo;
    Partial partial(n);
    OptionProbe probe(g);
    const bool fib1 = g.family() == Family::Fibonacci && g.family_param() == 1;
    auto rec = [&](auto&& self, std::uint32_t open) -> Num {
        if (open == 0) return Num(1);
        auto it = memo.find(open);
        if (it != memo.end()) return it->second;
        Num total(0);
        int count = 0;
        for (int i = 0; i < n; ++i) {
            if (!(open & (1u << i))) continue;
            ++count;
            const auto opts = fib1 ? allowable_options_fib1(g, partial, i) : probe.options(partial, i);
            if (opts.empty() || std::find(opts.begin(), opts.end(), pi[i]) == opts.end())
                throw not_a_matching_error("target assignment infeasible");
            partial.assign(i, pi[i]);
            Num term = lift(static_cast<int>(opts.size())) * self(self, open & ~(1u << i));
            partial.unassign(i);
            total += term;
        }
        total = total / count;
        memo[open] = total;
        return total;
    };
    return rec(rec, n == 32 ? 0xffffffffu : ((1u << n) - 1));
}

struct RatLift {
    BigRat operator()(int c) const { return BigRat(1, c); }
};
struct InvLift {
    double operator()(int c) const { return 1.0 / c; }
};

}  // namespace detail

// Draws one matching with its decision record. Every matching of the graph
// is reachable with positive probability.
inline DecisionTrace sample(const Sampler& s, RngStream& rng, bool record_steps = true,
                            bool exact = false) {
    const int n = s.g->n();
    if (n == 0) {
        DecisionTrace tr;
        if (exact) tr.weight_exact = BigRat(1);
        return tr;
    }
    if (s.fib(1)) {
        Fib1Process p(n, s.policy.kind, s.rule, s.policy.order);
        return detail::run_process(p, rng, record_steps, exact);
    }
    if (s.fib(2) &&
        (s.policy.kind == PolicyKind::RandomCycle || s.policy.kind == PolicyKind::GreedyCycleFib2)) {
        Fib2CycleProcess p(n, s.policy.kind);
        return detail::run_process(p, rng, record_steps, exact);
    }
    if (s.fib(2) && s.policy.kind == PolicyKind::FixedTopDown) {
        Fib2FixedProcess p(n, s.rule);
        return detail::run_process(p, rng, record_steps, exact);
    }
    if (s.dist(2) && s.policy.kind == PolicyKind::FixedTopDown) {
        Dist2FixedProcess p(n, s.rule);
        return detail::run_process(p, rng, record_steps, exact);
    }
    GenericProcess p(*s.g, s.policy.kind, s.policy.order);
    return detail::run_process(p, rng, record_steps, exact);
}

struct PathProb {
    double log_p = 0.0;
    std::optional<BigRat> exact;
};

// Exact probability that the sampler outputs `pi`. Deterministic orders are
// replayed; random orders use the memoized interval/subset recursions.
inline PathProb path_probability(const Sampler& s, const Matching& pi, bool want_exact = false) {
    if (!s.g->is_perfect_matching(pi)) throw not_a_matching_error("not a perfect matching");
    const int n = s.g->n();
    PathProb out;
    if (n == 0) {
        if (want_exact) out.exact = BigRat(1);
        return out;
    }
    const PolicyKind pk = s.policy.kind;
    if (pk == PolicyKind::UniformRandom) {
        const bool fib1 = s.fib(1);
        if (want_exact) {
            out.exact = fib1 ? detail::interval_average<BigRat>(
                                   pi, n, detail::RatLift{}, detail::fib1_block,
                                   detail::fib1_interval_choices)
                             : detail::subset_average<BigRat>(*s.g, pi, detail::RatLift{});
            out.log_p = std::log(out.exact->convert_to<double>());
        } else {
            out.log_p = std::log(
                fib1 ? detail::interval_average<double>(pi, n, detail::InvLift{}, detail::fib1_block,
                                                        detail::fib1_interval_choices)
                     : detail::subset_average<double>(*s.g, pi, detail::InvLift{}));
        }
        return out;
    }
    if (pk == PolicyKind::RandomCycle) {
        if (want_exact) {
            out.exact = detail::interval_average<BigRat>(pi, n, detail::RatLift{},
                                                         detail::fib2_cycle_span,
                                                         detail::fib2_interval_choices);
            out.log_p = std::log(out.exact->convert_to<double>());
        } else {
            out.log_p = std::log(detail::interval_average<double>(pi, n, detail::InvLift{},
                                                                  detail::fib2_cycle_span,
                                                                  detail::fib2_interval_choices));
        }
        return out;
    }
    // deterministic orders: replay
    BigRat exact;
    BigRat* pe = want_exact ? &exact : nullptr;
    if (s.fib(1)) {
        Fib1Process p(n, pk, s.rule, s.policy.order);
        out.log_p = detail::replay_process(p, pi, pe);
    } else if (s.fib(2) && pk == PolicyKind::GreedyCycleFib2) {
        Fib2CycleProcess p(n, pk);
        out.log_p = detail::replay_process(p, pi, pe);
    } else if (s.fib(2) && pk == PolicyKind::FixedTopDown) {
        Fib2FixedProcess p(n, s.rule);
        out.log_p = detail::replay_process(p, pi, pe);
    } else if (s.dist(2) && pk == PolicyKind::FixedTopDown) {
        Dist2FixedProcess p(n, s.rule);
        out.log_p = detail::replay_process(p, pi, pe);
    } else {
        GenericProcess p(*s.g, pk, s.policy.order);
        out.log_p = detail::replay_process(p, pi, pe);
    }
    if (want_exact && s.rule == RuleKind::Uniform) out.exact = exact;
    return out;
}

// Next index matched by the greedy order on the 1-Fibonacci family, given
// the lowest still-undetermined index.
inline int greedy_next_index(int lowest_open, int n) { return std::min(lowest_open + 1, n - 1); }

// D'_{n,2} as a cached table (prefix-transposition counts).
inline const CountTable& dist2_prefix_counts() {
    static CountTable t([](std::vector<BigInt>& c) {
        if (c.size() < 2) {
            c = {0, 0};
            return;
        }
        const auto k = c.size();
        c.push_back(c[k - 1] + dist2_counts().at(k - 2));  // D'_n = D'_{n-1}+D_{n-2}... cumulative
    });
    return t;
}

// Exactly uniform matching of a structured family, by block decomposition
// with exact count ratios. The log-weight diagnostics under the uniform
// measure are built on this.
inline Matching sample_uniform_matching(const BipartiteGraph& g, RngStream& rng) {
    const int n = g.n();
    Matching pi(n);
    if (g.family() == Family::Fibonacci && g.family_param() == 1) {
        const CountTable& F = fib1_counts();
        int i = 0;
        while (i < n) {
            const int L = n - i;
            if (L >= 2 && rng.next_double() >= F.ratio(L - 1, L)) {
                pi[i] = i + 1;
                pi[i + 1] = i;
                i += 2;
            } else {
                pi[i] = i;
                i += 1;
            }
        }
        return pi;
    }
    if (g.family() == Family::Fibonacci && g.family_param() == 2) {
        const CountTable& F = fib2_counts();
        int i = 0;
        while (i < n) {
            const int L = n - i;
            double u = rng.next_double();
            if (L >= 1 && (u -= F.ratio(L - 1, L)) < 0) {
                pi[i] = i;
                i += 1;
            } else if (L >= 2 && (u -= F.ratio(L - 2, L)) < 0) {
                pi[i] = i + 1;
                pi[i + 1] = i;
                i += 2;
            } else {
                pi[i] = i + 2;
                pi[i + 1] = i;
                pi[i + 2] = i + 1;
                i += 3;
            }
        }
        return pi;
    }
    if (g.family() == Family::Distance && g.family_param() == 2) {
        const CountTable& D = dist2_counts();
        const CountTable& Dp = dist2_prefix_counts();
        int i = 0;
        bool carry = false;  // value i-1 still unused, value i taken
        while (i < n) {
            const int L = n - i;
            double u = rng.next_double();
            if (!carry) {
                // D_L = D_{L-1} + D'_L + D'_{L-1} + D_{L-3} + D_{L-4}
                if (L >= 1 && (u -= D.ratio(L - 1, L)) < 0) {
                    pi[i] = i;
                    i += 1;
                } else if ((u -= (Dp.scaled(L) / D.scaled(L)).to_double()) < 0) {
                    pi[i] = i + 1;  // value i stays pending
                    i += 1;
                    carry = true;
                } else if (L >= 1 && (u -= (Dp.scaled(L - 1) / D.scaled(L)).to_double()) < 0) {
                    pi[i] = i + 2;
                    pi[i + 1] = i;
                    i += 2;
                    carry = true;  // value i+1 pending
                } else if (L >= 3 && (u -= D.ratio(L - 3, L)) < 0) {
                    pi[i] = i + 2;
                    pi[i + 1] = i + 1;
                    pi[i + 2] = i;
                    i += 3;
                } else {
                    pi[i] = i + 2;
                    pi[i + 1] = i + 3;
                    pi[i + 2] = i;
                    pi[i + 3] = i + 1;
                    i += 4;
                }
            } else {
                // D'_{L+1} = D_{L-1} + D_{L-2} + D'_{L-1}
                if (L >= 1 && (u -= (D.scaled(L - 1) / Dp.scaled(L + 1)).to_double()) < 0) {
                    pi[i] = i - 1;
                    i += 1;
                    carry = false;
                } else if (L >= 2 && (u -= (D.scaled(L - 2) / Dp.scaled(L + 1)).to_double()) < 0) {
                    pi[i] = i + 1;
                    pi[i + 1] = i - 1;
                    i += 2;
                    carry = false;
                } else {
                    pi[i] = i + 2;
                    pi[i + 1] = i - 1;
                    i += 2;
                    carry = true;
                }
            }
        }
        return pi;
    }
    throw unsupported_error("uniform sampling is implemented for the structured families");
}

// The realized log-weight of a sampler run conditioned to produce `pi`: the
// order policy consumes its own randomness, the choices are dictated by pi.
// Under a uniform pi this realizes the log-weight variable of the moment
// recurrences.
template <class Proc>
double conditioned_log_weight_impl(Proc& proc, const Matching& pi, RngStream& rng) {
    double logT = 0;
    Menu menu;
    while (!proc.done()) {
        const int loc = proc.pick_location(&rng);
        proc.build_menu(loc, menu);
        const int k = menu.find(pi);
        if (k < 0) throw not_a_matching_error("matching unreachable by this sampler");
        logT -= std::log(menu.moves[k].prob);
        proc.apply(menu.moves[k]);
    }
    return logT;
}

inline double conditioned_log_weight(const Sampler& s, const Matching& pi, RngStream& rng) {
    const int n = s.g->n();
    if (n == 0) return 0.0;
    const PolicyKind pk = s.policy.kind;
    if (s.fib(1)) {
        Fib1Process p(n, pk, s.rule, s.policy.order);
        return conditioned_log_weight_impl(p, pi, rng);
    }
    if (s.fib(2) && (pk == PolicyKind::RandomCycle || pk == PolicyKind::GreedyCycleFib2)) {
        Fib2CycleProcess p(n, pk);
        return conditioned_log_weight_impl(p, pi, rng);
    }
    if (s.fib(2) && pk == PolicyKind::FixedTopDown) {
        Fib2FixedProcess p(n, s.rule);
        return conditioned_log_weight_impl(p, pi, rng);
    }
    if (s.dist(2) && pk == PolicyKind::FixedTopDown) {
        Dist2FixedProcess p(n, s.rule);
        return conditioned_log_weight_impl(p, pi, rng);
    }
    GenericProcess p(*s.g, pk, s.policy.order);
    return conditioned_log_weight_impl(p, pi, rng);
}

// Cycle configurations available around i given which indices are still
// open; the RandomCycle sampler draws uniformly from these.
inline std::vector<Matching> cycle_options_fib2(const BipartiteGraph& g, const std::vector<char>& det,
                                                int i) {
    if (!(g.family() == Family::Fibonacci && g.family_param() == 2))
        throw unsupported_error("cycle options are defined on the 2-Fibonacci family");
    Menu menu;
    fib2_cycle_moves(i, g.n(), det, menu);
    std::vector<Matching> out;
    for (const auto& mv : menu.moves) {
        Matching part(g.n(), kUnassigned);
        for (int k = 0; k < mv.count; ++k) part[mv.assigns[k][0]] = mv.assigns[k][1];
        out.push_back(std::move(part));
    }
    return out;
}

}  // namespace simatch
