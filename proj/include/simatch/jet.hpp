#pragma once

#include <cmath>

namespace simatch {

// Second-order truncated Taylor value in the moment parameter t at t = 0:
// v0 = f(0), v1 = f'(0), v2 = f''(0). The ring of these jets turns the
// T^t moment recurrences into exact mean/second-moment recurrences.
struct Jet2 {
    double v0 = 0.0, v1 = 0.0, v2 = 0.0;

    Jet2() = default;
    Jet2(double c) : v0(c) {}  // constants embed with zero derivatives
    Jet2(double a, double b, double c) : v0(a), v1(b), v2(c) {}

    // c^t = exp(t log c) as a jet: (1, log c, log^2 c).
    static Jet2 pow_t(double c) {
        const double l = std::log(c);
        return Jet2(1.0, l, l * l);
    }

    Jet2 operator+(const Jet2& o) const { return Jet2(v0 + o.v0, v1 + o.v1, v2 + o.v2); }
    Jet2 operator-(const Jet2& o) const { return Jet2(v0 - o.v0, v1 - o.v1, v2 - o.v2); }
    Jet2 operator*(const Jet2& o) const {
        return Jet2(v0 * o.v0, v0 * o.v1 + v1 * o.v0, v0 * o.v2 + 2.0 * v1 * o.v1 + v2 * o.v0);
    }
    Jet2 operator*(double s) const { return Jet2(v0 * s, v1 * s, v2 * s); }
    Jet2 operator/(double s) const { return Jet2(v0 / s, v1 / s, v2 / s); }
    Jet2& operator+=(const Jet2& o) {
        v0 += o.v0;
        v1 += o.v1;
        v2 += o.v2;
        return *this;
    }
    Jet2& operator-=(const Jet2& o) {
        v0 -= o.v0;
        v1 -= o.v1;
        v2 -= o.v2;
        return *this;
    }

    // Moments of log T when the jet represents E[T^t].
    double mean() const { return v1 / v0; }
    double second_moment() const { return v2 / v0; }
    double variance() const {
        const double m = mean();
        return second_moment() - m * m;
    }
};

inline Jet2 operator*(double s, const Jet2& j) { return j * s; }

}  // namespace simatch
