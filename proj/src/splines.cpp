#include "serveadv/splines.hpp"

#include <algorithm>
#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace serveadv {

namespace {

constexpr int kMaxOrder = 32;

// Index i of the knot span [t_i, t_{i+1}) containing s, restricted to the
// nonempty domain spans i in [order - 1, basis_dim - 1]. s == upper maps to
// the last nonempty span, which makes bases right-continuous on
// [lower, upper) and left-continuous at upper.
int find_span(const SplineSpec& spec, double s) {
    const auto& t = spec.knots;
    const int m = spec.basis_dim;
    const int k = spec.order;
    if (s >= spec.upper) return m - 1;
    auto it = std::upper_bound(t.begin() + (k - 1), t.begin() + m + 1, s);
    return static_cast<int>(it - t.begin()) - 1;
}

}  // namespace

SplineSpec make_spec(double lower, double upper, int order,
                     std::span<const double> interior_knots, double mono_from) {
    if (order < 2) throw std::invalid_argument("spline order must be at least 2");
    if (order > kMaxOrder) throw std::invalid_argument("spline order too large");
    if (!(lower < upper)) throw std::invalid_argument("lower bound must be below upper bound");
    if (!(lower <= mono_from && mono_from <= upper))
        throw std::invalid_argument("monotonicity onset must lie in [lower, upper]");

    double prev = lower;
    for (double v : interior_knots) {
        if (!(v > prev)) throw std::invalid_argument("interior knots must be strictly increasing inside the domain");
        prev = v;
    }
    if (!interior_knots.empty() && !(interior_knots.back() < upper))
        throw std::invalid_argument("interior knots must lie strictly below the upper bound");

    SplineSpec spec;
    spec.order = order;
    spec.basis_dim = order + static_cast<int>(interior_knots.size());
    spec.lower = lower;
    spec.upper = upper;
    spec.mono_from = mono_from;
    spec.knots.reserve(spec.basis_dim + order);
    spec.knots.insert(spec.knots.end(), order, lower);
    spec.knots.insert(spec.knots.end(), interior_knots.begin(), interior_knots.end());
    spec.knots.insert(spec.knots.end(), order, upper);
    return spec;
}

int basis_window(const SplineSpec& spec, int ord, double s, std::span<double> out) {
    const auto& t = spec.knots;
    const int span = find_span(spec, s);

    // Triangular Cox-de Boor pass over the `ord` bases alive on this span.
    // Every denominator contains the nonempty span [t_span, t_span+1], so no
    // division needs a 0/0 guard here.
    std::array<double, kMaxOrder> left{};
    std::array<double, kMaxOrder> right{};
    out[0] = 1.0;
    for (int j = 1; j < ord; ++j) {
        left[j] = s - t[span + 1 - j];
        right[j] = t[span + j] - s;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double temp = out[r] / (right[r + 1] + left[j - r]);
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
    return span - ord + 1;
}

std::vector<double> basis_all(const SplineSpec& spec, double s) {
    if (!(s >= spec.lower && s <= spec.upper))
        throw std::domain_error("evaluation point outside the spline domain");
    std::vector<double> values(spec.basis_dim, 0.0);
    std::array<double, kMaxOrder> window{};
    const int first = basis_window(spec, spec.order, s, {window.data(), static_cast<std::size_t>(spec.order)});
    for (int r = 0; r < spec.order; ++r) values[first + r] = window[r];
    return values;
}

double spline_eval(const SplineSpec& spec, std::span<const double> coeffs, double s) {
    if (static_cast<int>(coeffs.size()) != spec.basis_dim)
        throw std::invalid_argument("coefficient count must equal the basis dimension");
    if (!(s >= spec.lower && s <= spec.upper))
        throw std::domain_error("evaluation point outside the spline domain");
    std::array<double, kMaxOrder> window{};
    const int first = basis_window(spec, spec.order, s, {window.data(), static_cast<std::size_t>(spec.order)});
    double acc = 0.0;
    for (int r = 0; r < spec.order; ++r) acc += coeffs[first + r] * window[r];
    return acc;
}

double spline_derivative(const SplineSpec& spec, std::span<const double> coeffs, double s) {
    if (static_cast<int>(coeffs.size()) != spec.basis_dim)
        throw std::invalid_argument("coefficient count must equal the basis dimension");
    if (!(s >= spec.lower && s <= spec.upper))
        throw std::domain_error("evaluation point outside the spline domain");

    // f'(s) = (k-1) sum_m (c_m - c_{m-1}) / (t_{m+k-1} - t_m) * b_{m,k-1}(s).
    // With clamped ends the boundary terms vanish, and every window index m
    // here satisfies 1 <= m <= basis_dim - 1, so both c_m and c_{m-1} exist.
    const int k = spec.order;
    const auto& t = spec.knots;
    std::array<double, kMaxOrder> window{};
    const int first = basis_window(spec, k - 1, s, {window.data(), static_cast<std::size_t>(k - 1)});
    double acc = 0.0;
    for (int r = 0; r < k - 1; ++r) {
        const int m = first + r;
        acc += (coeffs[m] - coeffs[m - 1]) / (t[m + k - 1] - t[m]) * window[r];
    }
    return (k - 1) * acc;
}

std::vector<double> knot_averages(const SplineSpec& spec) {
    const int k = spec.order;
    std::vector<double> avgs(spec.basis_dim);
    for (int m = 0; m < spec.basis_dim; ++m) {
        double acc = 0.0;
        for (int j = 1; j < k; ++j) acc += spec.knots[m + j];
        avgs[m] = acc / (k - 1);
    }
    return avgs;
}

ControlPolygon control_polygon(const SplineSpec& spec, std::span<const double> coeffs) {
    if (static_cast<int>(coeffs.size()) != spec.basis_dim)
        throw std::invalid_argument("coefficient count must equal the basis dimension");
    const std::vector<double> avgs = knot_averages(spec);
    ControlPolygon poly;
    poly.vertices.resize(spec.basis_dim);
    for (int m = 0; m < spec.basis_dim; ++m) poly.vertices[m] = {avgs[m], coeffs[m]};
    return poly;
}

int first_constrained_index(const SplineSpec& spec) {
    const auto& t = spec.knots;
    const int m = spec.basis_dim;
    const int k = spec.order;
    // 1-based position of the smallest knot strictly above mono_from; when
    // mono_from sits past the last pre-boundary knot that position is m + 1.
    int pos;
    if (spec.mono_from > t[m - 1]) {
        pos = m + 1;
    } else {
        pos = static_cast<int>(std::upper_bound(t.begin(), t.end(), spec.mono_from) - t.begin()) + 1;
    }
    return pos - k;  // 0-based first constrained coefficient
}

bool is_nonincreasing_on(const SplineSpec& spec, std::span<const double> coeffs) {
    if (static_cast<int>(coeffs.size()) != spec.basis_dim)
        throw std::invalid_argument("coefficient count must equal the basis dimension");
    const int from = std::max(first_constrained_index(spec), 1);
    for (int m = from; m < spec.basis_dim; ++m) {
        if (coeffs[m] > coeffs[m - 1]) return false;
    }
    return true;
}

}  // namespace serveadv
