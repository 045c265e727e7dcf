#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace simatch {

using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;

// Thrown when an input fails validation (CLI exit code 2).
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Computation limits; SIMATCH_LIMITS="enum=2000000,dp_bits=22,exhaustive=200000"
// overrides the defaults.
struct Limits {
    std::size_t enumeration = 1000000;
    int dp_state_bits = 21;
    std::size_t exhaustive = 100000;
};

inline const Limits& limits() {
    static const Limits l = [] {
        Limits out;
        if (const char* env = std::getenv("SIMATCH_LIMITS")) {
            std::string s(env);
            std::size_t pos = 0;
            while (pos < s.size()) {
                std::size_t end = s.find(',', pos);
                if (end == std::string::npos) end = s.size();
                const std::string kv = s.substr(pos, end - pos);
                const std::size_t eq = kv.find('=');
                if (eq != std::string::npos) {
                    const std::string key = kv.substr(0, eq);
                    const long long val = std::atoll(kv.c_str() + eq + 1);
                    if (key == "enum" && val > 0) out.enumeration = static_cast<std::size_t>(val);
                    if (key == "dp_bits" && val > 0 && val <= 26) out.dp_state_bits = static_cast<int>(val);
                    if (key == "exhaustive" && val > 0) out.exhaustive = static_cast<std::size_t>(val);
                }
                pos = end + 1;
            }
        }
        return out;
    }();
    return l;
}

// Thrown when a configured computation limit is exceeded (CLI exit code 3).
struct limit_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Natural log of a positive big integer, accurate to ~1 ulp of double.
inline double log_big(const BigInt& x) {
    if (x <= 0) throw validation_error("log_big: nonpositive argument");
    const std::size_t bits = boost::multiprecision::msb(x) + 1;
    if (bits <= 62) return std::log(x.convert_to<double>());
    BigInt top = x >> (bits - 62);
    return std::log(top.convert_to<double>()) + static_cast<double>(bits - 62) * std::log(2.0);
}

inline double log10_big(const BigInt& x) { return log_big(x) / std::log(10.0); }

// double mantissa with a wide exponent; enough for ratios of huge counts.
struct ScaledFloat {
    double m = 0.0;  // 0 or in [1, 2)
    long e = 0;      // value = m * 2^e

    static ScaledFloat from_big(const BigInt& x) {
        if (x == 0) return {};
        const std::size_t bits = boost::multiprecision::msb(x) + 1;
        ScaledFloat r;
        if (bits <= 53) {
            int ex = 0;
            r.m = std::frexp(x.convert_to<double>(), &ex);
            r.m *= 2.0;
            r.e = ex - 1;
        } else {
            BigInt top = x >> (bits - 53);
            r.m = top.convert_to<double>() / 9007199254740992.0 * 2.0;  // / 2^53 * 2
            r.e = static_cast<long>(bits) - 1;
        }
        return r;
    }

    friend ScaledFloat operator*(ScaledFloat a, ScaledFloat b) {
        ScaledFloat r{a.m * b.m, a.e + b.e};
        r.normalize();
        return r;
    }
    friend ScaledFloat operator/(ScaledFloat a, ScaledFloat b) {
        ScaledFloat r{a.m / b.m, a.e - b.e};
        r.normalize();
        return r;
    }
    void normalize() {
        if (m == 0.0) { e = 0; return; }
        int ex = 0;
        m = std::frexp(m, &ex) * 2.0;
        e += ex - 1;
    }
    double to_double() const { return std::ldexp(m, static_cast<int>(e)); }
    double log() const { return std::log(m) + static_cast<double>(e) * std::log(2.0); }
};

inline std::string to_string(const BigInt& x) { return x.str(); }

// 4-significant-digit scientific form, e.g. 4.540e+41.
inline std::string sci4(double log_value_nats) {
    const double l10 = log_value_nats / std::log(10.0);
    double ex = std::floor(l10);
    double mant = std::pow(10.0, l10 - ex);
    if (mant >= 9.9995) { mant /= 10.0; ex += 1.0; }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3fe%+03d", mant, static_cast<int>(ex));
    return buf;
}

inline std::string sci4_big(const BigInt& x) { return sci4(log_big(x)); }

}  // namespace simatch
