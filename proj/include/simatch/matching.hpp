#pragma once

#include <functional>
#include <queue>
#include <vector>

#include "simatch/graph.hpp"

namespace simatch {

// A partially built matching: pi[i] = kUnassigned while left i is open.
struct Partial {
    Matching pi;
    std::vector<char> used;  // right-value usage flags
    int open_count = 0;

    explicit Partial(int n) : pi(n, kUnassigned), used(n, 0), open_count(n) {}

    void assign(int i, int j) {
        pi[i] = j;
        used[j] = 1;
        --open_count;
    }
    void unassign(int i) {
        used[pi[i]] = 0;
        pi[i] = kUnassigned;
        ++open_count;
    }
    bool assigned(int i) const { return pi[i] != kUnassigned; }
};

// Hopcroft-Karp maximum matching restricted to open lefts / unused rights.
class HopcroftKarp {
  public:
    explicit HopcroftKarp(const BipartiteGraph& g) : g_(g) {}

    // Size of a maximum matching of the residual of `p`.
    int max_residual_matching(const Partial& p) {
        init(p);
        int matched = 0;
        while (bfs()) {
            for (int i : lefts_)
                if (match_l_[i] == kUnassigned && dfs(i)) ++matched;
        }
        return matched;
    }

    const std::vector<int>& left_match() const { return match_l_; }

  private:
    static constexpr int kInf = 1 << 30;

    void init(const Partial& p) {
        const int n = g_.n();
        match_l_.assign(n, kUnassigned);
        match_r_.assign(n, kUnassigned);
        dist_.assign(n, kInf);
        lefts_.clear();
        for (int i = 0; i < n; ++i)
            if (!p.assigned(i)) lefts_.push_back(i);
        blocked_right_.assign(n, 0);
        for (int j = 0; j < n; ++j) blocked_right_[j] = p.used[j];
    }

    bool bfs() {
        std::queue<int> q;
        for (int i : lefts_) {
            if (match_l_[i] == kUnassigned) {
                dist_[i] = 0;
                q.push(i);
            } else {
                dist_[i] = kInf;
            }
        }
        bool found = false;
        while (!q.empty()) {
            int i = q.front();
            q.pop();
            for (int j : g_.neighbors(i)) {
                if (blocked_right_[j]) continue;
                int k = match_r_[j];
                if (k == kUnassigned) {
                    found = true;
                } else if (dist_[k] == kInf) {
                    dist_[k] = dist_[i] + 1;
                    q.push(k);
                }
            }
        }
        return found;
    }

    bool dfs(int i) {
        for (int j : g_.neighbors(i)) {
            if (blocked_right_[j]) continue;
            int k = match_r_[j];
            if (k == kUnassigned || (dist_[k] == dist_[i] + 1 && dfs(k))) {
                match_l_[i] = j;
                match_r_[j] = i;
                return true;
            }
        }
        dist_[i] = kInf;
        return false;
    }

    const BipartiteGraph& g_;
    std::vector<int> match_l_, match_r_, dist_, lefts_;
    std::vector<char> blocked_right_;
};

// True iff the open left vertices can still be perfectly matched to the
// unused right vertices.
inline bool has_completion(const BipartiteGraph& g, const Partial& p) {
    HopcroftKarp hk(g);
    return hk.max_residual_matching(p) == p.open_count;
}

// Full-recomputation option probe: re-solves the residual matching for each
// candidate. Slow but obviously correct; the equivalence oracle in tests.
inline std::vector<int> allowable_options_recompute(const BipartiteGraph& g, Partial& p, int i) {
    std::vector<int> options;
    for (int j : g.neighbors(i)) {
        if (p.used[j]) continue;
        p.assign(i, j);
        if (has_completion(g, p)) options.push_back(j);
        p.unassign(i);
    }
    return options;
}

// Incremental option probe: one residual matching, then a single augmenting
// path per candidate with an undo log. Equivalent to the recompute path.
class OptionProbe {
  public:
    explicit OptionProbe(const BipartiteGraph& g) : g_(g) {}

    // Options for open vertex i given partial p; empty if p has no completion.
    std::vector<int> options(const Partial& p, int i) {
        const int n = g_.n();
        match_l_.assign(n, kUnassigned);
        match_r_.assign(n, kUnassigned);
        seen_.assign(n, 0);
        stamp_ = 0;
        int matched = 0;
        for (int a = 0; a < n; ++a) {
            if (p.assigned(a)) continue;
            ++stamp_;
            if (base_augment(p, a)) ++matched;
        }
        std::vector<int> opts;
        if (matched != p.open_count) return opts;

        for (int j : g_.neighbors(i)) {
            if (p.used[j]) continue;
            if (match_l_[i] == j) {
                opts.push_back(j);
                continue;
            }
            const int k = match_r_[j];  // residual is square, so j has an owner
            undo_.clear();
            ++stamp_;
            excluded_right_ = j;
            removed_left_ = i;
            const bool ok = probe_augment(p, k);
            for (auto it = undo_.rbegin(); it != undo_.rend(); ++it) {
                match_l_[it->left] = it->old_left_match;
                match_r_[it->right] = it->old_right_owner;
            }
            if (ok) opts.push_back(j);
        }
        return opts;
    }

  private:
    struct UndoEntry {
        int left, old_left_match, right, old_right_owner;
    };

    bool base_augment(const Partial& p, int a) {
        for (int j : g_.neighbors(a)) {
            if (p.used[j] || seen_[j] == stamp_) continue;
            seen_[j] = stamp_;
            int owner = match_r_[j];
            if (owner == kUnassigned || base_augment(p, owner)) {
                match_l_[a] = j;
                match_r_[j] = a;
                return true;
            }
        }
        return false;
    }

    // Augment from a displaced vertex while left `removed_left_` (and its
    // freed right) are out of play and right `excluded_right_` is taken.
    bool probe_augment(const Partial& p, int a) {
        for (int j : g_.neighbors(a)) {
            if (p.used[j] || j == excluded_right_ || seen_[j] == stamp_) continue;
            seen_[j] = stamp_;
            int owner = match_r_[j];
            if (owner == kUnassigned || owner == removed_left_ || probe_augment(p, owner)) {
                undo_.push_back({a, match_l_[a], j, match_r_[j]});
                match_l_[a] = j;
                match_r_[j] = a;
                return true;
            }
        }
        return false;
    }

    const BipartiteGraph& g_;
    std::vector<int> match_l_, match_r_;
    std::vector<int> seen_;
    int stamp_ = 0;
    int excluded_right_ = kUnassigned;
    int removed_left_ = kUnassigned;
    std::vector<UndoEntry> undo_;
};

// Structural option rule for Fibonacci(1), valid for any feasible partial:
// matchings of this family are fixed points plus adjacent transpositions.
inline std::vector<int> allowable_options_fib1(const BipartiteGraph& g, const Partial& p, int i) {
    const int n = g.n();
    std::vector<int> opts;
    if (i - 1 >= 0 && !p.used[i - 1] &&
        (p.pi[i - 1] == i || (!p.assigned(i - 1) && !p.used[i])))
        opts.push_back(i - 1);
    if (!p.used[i]) opts.push_back(i);
    if (i + 1 < n && !p.used[i + 1] &&
        (p.pi[i + 1] == i || (!p.assigned(i + 1) && !p.used[i])))
        opts.push_back(i + 1);
    return opts;
}

// Public entry point: structural fast path where one exists, generic
// matching-feasibility otherwise. Sorted ascending.
inline std::vector<int> allowable_options(const BipartiteGraph& g, const Partial& p, int i) {
    if (g.family() == Family::Fibonacci && g.family_param() == 1)
        return allowable_options_fib1(g, p, i);
    OptionProbe probe(g);
    return probe.options(p, i);
}

// Lexicographic enumeration of all perfect matchings. Throws limit_error when
// more than `limit` matchings exist. `fn` may return false to stop early.
inline void for_each_matching(const BipartiteGraph& g,
                              const std::function<bool(const Matching&)>& fn,
                              std::size_t limit = limits().enumeration) {
    const int n = g.n();
    // last_index[j]: the largest left vertex adjacent to value j.
    std::vector<int> last_index(n, -1);
    for (int i = 0; i < n; ++i)
        for (int j : g.neighbors(i)) last_index[j] = std::max(last_index[j], i);
    for (int j = 0; j < n; ++j)
        if (last_index[j] < 0) return;  // some value unreachable: no matchings

    Partial p(n);
    std::size_t produced = 0;
    bool stopped = false;
    auto rec = [&](auto&& self, int i) -> void {
        if (stopped) return;
        if (i == n) {
            if (++produced > limit) throw limit_error("enumeration limit exceeded");
            if (!fn(p.pi)) stopped = true;
            return;
        }
        // Values whose last chance is now must be taken now.
        int forced = kUnassigned, forced_count = 0;
        for (int j : g.neighbors(i))
            if (!p.used[j] && last_index[j] == i) {
                forced = j;
                ++forced_count;
            }
        if (forced_count > 1) return;
        for (int j : g.neighbors(i)) {
            if (p.used[j]) continue;
            if (forced_count == 1 && j != forced) continue;
            p.assign(i, j);
            self(self, i + 1);
            p.unassign(i);
            if (stopped) return;
        }
    };
    if (n == 0) {
        fn(p.pi);  // the empty matching
        return;
    }
    rec(rec, 0);
}

inline std::vector<Matching> enumerate_matchings(const BipartiteGraph& g,
                                                 std::size_t limit = limits().enumeration) {
    std::vector<Matching> out;
    for_each_matching(
        g,
        [&](const Matching& m) {
            out.push_back(m);
            return true;
        },
        limit);
    return out;
}

}  // namespace simatch
