#pragma once

#include <algorithm>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "simatch/big.hpp"

namespace simatch {

enum class Family { Fibonacci, Distance, Custom };

inline const char* family_name(Family f) {
    switch (f) {
        case Family::Fibonacci: return "fibonacci";
        case Family::Distance: return "distance";
        default: return "custom";
    }
}

// A perfect matching as a permutation: pi[i] = right index matched to left i.
// Indices are 0-based internally; text I/O is 1-based.
using Matching = std::vector<int>;

constexpr int kUnassigned = -1;

// Square bipartite graph on n left and n right vertices.
// Immutable after construction; safe to share across threads.
class BipartiteGraph {
  public:
    // Fibonacci(t): j - i in [-1, t].  Distance(d): |j - i| <= d.
    static BipartiteGraph fibonacci(int t, int n) {
        if (t < 1) throw validation_error("fibonacci family requires t >= 1");
        if (n < 0) throw validation_error("graph size must be nonnegative");
        BipartiteGraph g;
        g.n_ = n;
        g.family_ = Family::Fibonacci;
        g.param_ = t;
        g.nbr_.resize(n);
        for (int i = 0; i < n; ++i)
            for (int j = std::max(0, i - 1); j < std::min(n, i + t + 1); ++j)
                g.nbr_[i].push_back(j);
        g.finish(false);
        return g;
    }

    static BipartiteGraph distance(int d, int n) {
        if (d < 1) throw validation_error("distance family requires d >= 1");
        if (n < 0) throw validation_error("graph size must be nonnegative");
        BipartiteGraph g;
        g.n_ = n;
        g.family_ = Family::Distance;
        g.param_ = d;
        g.nbr_.resize(n);
        for (int i = 0; i < n; ++i)
            for (int j = std::max(0, i - d); j < std::min(n, i + d + 1); ++j)
                g.nbr_[i].push_back(j);
        g.finish(false);
        return g;
    }

    // adjacency[i] holds 0-based right indices.
    static BipartiteGraph custom(std::vector<std::vector<int>> adjacency) {
        BipartiteGraph g;
        g.n_ = static_cast<int>(adjacency.size());
        g.family_ = Family::Custom;
        g.param_ = 0;
        g.nbr_ = std::move(adjacency);
        for (auto& row : g.nbr_) {
            std::sort(row.begin(), row.end());
            row.erase(std::unique(row.begin(), row.end()), row.end());
        }
        g.finish(true);
        return g;
    }

    // Text format: first line n, then one line per left vertex with its
    // 1-based neighbor indices, space separated.
    static BipartiteGraph load(std::istream& in) {
        int n = 0;
        std::string line;
        if (!std::getline(in, line)) throw validation_error("graph file: missing size line");
        try {
            n = std::stoi(line);
        } catch (...) {
            throw validation_error("graph file: bad size line");
        }
        if (n < 0) throw validation_error("graph file: negative size");
        std::vector<std::vector<int>> adj(n);
        for (int i = 0; i < n; ++i) {
            if (!std::getline(in, line))
                throw validation_error("graph file: expected " + std::to_string(n) + " adjacency lines");
            std::istringstream ss(line);
            int j;
            while (ss >> j) {
                if (j < 1 || j > n)
                    throw validation_error("graph file: neighbor index out of range on line " +
                                           std::to_string(i + 2));
                adj[i].push_back(j - 1);
            }
        }
        return custom(std::move(adj));
    }

    void save(std::ostream& out) const {
        out << n_ << "\n";
        for (const auto& row : nbr_) {
            for (std::size_t k = 0; k < row.size(); ++k) out << (k ? " " : "") << row[k] + 1;
            out << "\n";
        }
    }

    int n() const { return n_; }
    Family family() const { return family_; }
    int family_param() const { return param_; }
    const std::vector<int>& neighbors(int i) const { return nbr_[i]; }
    int degree(int i) const { return static_cast<int>(nbr_[i].size()); }

    bool adjacent(int i, int j) const {
        switch (family_) {
            case Family::Fibonacci: return j - i >= -1 && j - i <= param_;
            case Family::Distance: return std::abs(j - i) <= param_;
            default: return std::binary_search(nbr_[i].begin(), nbr_[i].end(), j);
        }
    }

    // Max over edges of j-i and i-j; 0 for the empty graph.
    int lower_bandwidth() const { return lo_band_; }
    int upper_bandwidth() const { return up_band_; }

    bool is_perfect_matching(const Matching& pi) const {
        if (static_cast<int>(pi.size()) != n_) return false;
        std::vector<char> used(n_, 0);
        for (int i = 0; i < n_; ++i) {
            int j = pi[i];
            if (j < 0 || j >= n_ || used[j] || !adjacent(i, j)) return false;
            used[j] = 1;
        }
        return true;
    }

    std::string describe() const {
        std::ostringstream s;
        switch (family_) {
            case Family::Fibonacci: s << "fib(t=" << param_ << ")"; break;
            case Family::Distance: s << "dist(d=" << param_ << ")"; break;
            default: s << "custom"; break;
        }
        s << " n=" << n_;
        return s.str();
    }

  private:
    BipartiteGraph() = default;

    // Validates ranges, computes bandwidths, checks a perfect matching exists.
    void finish(bool custom) {
        for (int i = 0; i < n_; ++i) {
            for (int j : nbr_[i]) {
                if (j < 0 || j >= n_) throw validation_error("neighbor index out of range");
                lo_band_ = std::max(lo_band_, i - j);
                up_band_ = std::max(up_band_, j - i);
            }
        }
        // Built-in families always admit the identity matching.
        if (custom && !has_any_perfect_matching())
            throw validation_error("graph has no perfect matching");
    }

    bool has_any_perfect_matching() const {
        std::vector<int> match_r(n_, kUnassigned);
        std::vector<char> seen(n_);
        auto augment = [&](auto&& self, int i) -> bool {
            for (int j : nbr_[i]) {
                if (seen[j]) continue;
                seen[j] = 1;
                if (match_r[j] == kUnassigned || self(self, match_r[j])) {
                    match_r[j] = i;
                    return true;
                }
            }
            return false;
        };
        for (int i = 0; i < n_; ++i) {
            std::fill(seen.begin(), seen.end(), 0);
            if (!augment(augment, i)) return false;
        }
        return true;
    }

    int n_ = 0;
    Family family_ = Family::Custom;
    int param_ = 0;
    int lo_band_ = 0, up_band_ = 0;
    std::vector<std::vector<int>> nbr_;
};

// One-line permutation text: 1-based values, space separated.
inline std::string matching_to_string(const Matching& pi) {
    std::ostringstream s;
    for (std::size_t i = 0; i < pi.size(); ++i) s << (i ? " " : "") << pi[i] + 1;
    return s.str();
}

// Parses "2 1 3 4" or compact digits "2134" (only unambiguous for n <= 9).
inline Matching matching_from_string(const std::string& text) {
    Matching pi;
    if (text.find(' ') == std::string::npos) {
        for (char c : text)
            if (c >= '1' && c <= '9') pi.push_back(c - '1');
    } else {
        std::istringstream ss(text);
        int v;
        while (ss >> v) pi.push_back(v - 1);
    }
    return pi;
}

}  // namespace simatch
