#pragma once

// Independent reference implementations used to check the production code.
// Everything here is deliberately written the slow, obvious way.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracles {

/// Textbook B-spline recursion with 0/0 := 0. Order-1 bases live on
/// half-open spans, except that the interval ending at `upper` is closed so
/// the basis still sums to one at the right endpoint.
inline double naive_basis(const std::vector<double>& t, double upper, int m, int k, double s) {
    if (k == 1) {
        if (s >= t[m] && s < t[m + 1]) return 1.0;
        if (s == upper && t[m + 1] == upper && t[m] < t[m + 1]) return 1.0;
        return 0.0;
    }
    double left = 0.0, right = 0.0;
    const double dl = t[m + k - 1] - t[m];
    if (dl > 0.0) left = (s - t[m]) / dl * naive_basis(t, upper, m, k - 1, s);
    const double dr = t[m + k] - t[m + 1];
    if (dr > 0.0) right = (t[m + k] - s) / dr * naive_basis(t, upper, m + 1, k - 1, s);
    return left + right;
}

/// Central finite difference.
inline double fd_derivative(const std::function<double(double)>& f, double s, double h = 1e-6) {
    return (f(s + h) - f(s - h)) / (2.0 * h);
}

/// Kolmogorov-Smirnov statistic of a sample against a CDF.
inline double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double f = cdf(x[i]);
        d = std::max(d, f - static_cast<double>(i) / n);
        d = std::max(d, static_cast<double>(i + 1) / n - f);
    }
    return d;
}

/// Asymptotic KS p-value with the small-sample correction.
inline double ks_pvalue(double d, std::size_t n) {
    const double sn = std::sqrt(static_cast<double>(n));
    const double lam = (sn + 0.12 + 0.11 / sn) * d;
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = 2.0 * std::exp(-2.0 * j * j * lam * lam);
        sum += (j % 2 == 1 ? term : -term);
    }
    return std::clamp(sum, 0.0, 1.0);
}

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
    return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

/// Regularized lower incomplete gamma P(a, x): series for small x,
/// continued fraction otherwise.
inline double gammp(double a, double x) {
    if (a <= 0.0) throw std::invalid_argument("gammp: a must be positive");
    if (x <= 0.0) return 0.0;
    const double lg = std::lgamma(a);
    if (x < a + 1.0) {
        double ap = a;
        double sum = 1.0 / a;
        double del = sum;
        for (int i = 0; i < 1000; ++i) {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
        }
        return sum * std::exp(-x + a * std::log(x) - lg);
    }
    double b = x + 1.0 - a;
    double c = 1e300;
    double dd = 1.0 / b;
    double h = dd;
    for (int i = 1; i <= 1000; ++i) {
        const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
        b += 2.0;
        dd = an * dd + b;
        if (std::fabs(dd) < 1e-300) dd = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        dd = 1.0 / dd;
        const double del = dd * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
}

/// CDF of a Gamma(shape, rate) variate.
inline double gamma_cdf(double x, double shape, double rate) { return gammp(shape, x * rate); }

/// psi(x) via the recurrence and the asymptotic tail.
inline double digamma(double x) {
    double acc = 0.0;
    while (x < 6.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // ln x - 1/(2x) - 1/(12x^2) + 1/(120x^4) - 1/(252x^6)
    return acc + std::log(x) - 0.5 * inv -
           inv2 * (1.0 / 12.0 + inv2 * (-1.0 / 120.0 + inv2 / 252.0));
}

/// psi'(x) via the recurrence and the asymptotic tail.
inline double trigamma(double x) {
    double acc = 0.0;
    while (x < 6.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // 1/x + 1/(2x^2) + 1/(6x^3) - 1/(30x^5) + 1/(42x^7) - 1/(30x^9)
    return acc + inv + 0.5 * inv2 +
           inv * inv2 * (1.0 / 6.0 + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 - inv2 / 30.0)));
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace oracles
