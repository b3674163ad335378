#pragma once

#include <cmath>
#include <string>

#include "rssmlp/error.hpp"

namespace rssmlp {

namespace detail {

// Continued fraction for the regularized incomplete beta, evaluated with
// Lentz's algorithm. Converges quickly only for x < (a+1)/(a+b+2); the
// caller flips to the complement outside that region.
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr double eps = 3e-16;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) return h;
    }
    throw NumericError("incomplete beta: continued fraction did not converge");
}

}  // namespace detail

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) {
        throw DomainError("incomplete_beta: a and b must be positive");
    }
    if (x < 0.0 || x > 1.0) throw DomainError("incomplete_beta: x outside [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * detail::beta_continued_fraction(a, b, x) / a;
    }
    return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

inline double student_t_cdf(double t, double dof) {
    if (!(dof > 0.0)) throw DomainError("student_t_cdf: dof must be positive");
    if (t == 0.0) return 0.5;
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
    return t > 0.0 ? 1.0 - tail : tail;
}

inline double f_cdf(double x, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) {
        throw DomainError("f_cdf: degrees of freedom must be positive");
    }
    if (x <= 0.0) return 0.0;
    return incomplete_beta(0.5 * d1, 0.5 * d2, d1 * x / (d1 * x + d2));
}

namespace detail {

// Bisection on a monotone CDF; brackets are expanded first so the routine
// works for any requested probability.
template <typename Cdf>
double invert_cdf(const Cdf& cdf, double p, double lo, double hi) {
    while (cdf(hi) < p) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e300) throw NumericError("quantile: bracket expansion failed");
    }
    while (cdf(lo) > p) {
        hi = lo;
        lo *= 2.0;
        if (lo < -1e300) throw NumericError("quantile: bracket expansion failed");
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (cdf(mid) < p) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

inline double student_t_quantile(double p, double dof) {
    if (!(dof > 0.0)) throw DomainError("student_t_quantile: dof must be positive");
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("student_t_quantile: p must lie in (0, 1)");
    }
    return detail::invert_cdf([dof](double t) { return student_t_cdf(t, dof); }, p,
                              -1.0, 1.0);
}

inline double f_quantile(double p, double d1, double d2) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) {
        throw DomainError("f_quantile: degrees of freedom must be positive");
    }
    if (!(p > 0.0 && p < 1.0)) throw DomainError("f_quantile: p must lie in (0, 1)");
    return detail::invert_cdf([d1, d2](double x) { return f_cdf(x, d1, d2); }, p,
                              0.0, 1.0);
}

}  // namespace rssmlp
