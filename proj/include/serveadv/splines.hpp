#pragma once

#include <span>
#include <vector>

namespace serveadv {

/// Clamped B-spline setup on [lower, upper]: `order` copies of each endpoint
/// knot around a strictly increasing interior, basis_dim = order + #interior.
/// `mono_from` marks where the non-increasing shape requirement starts.
struct SplineSpec {
    int order = 0;              // k >= 2
    int basis_dim = 0;          // M, number of basis functions
    double lower = 0.0;
    double upper = 0.0;
    double mono_from = 0.0;     // in [lower, upper]
    std::vector<double> knots;  // size basis_dim + order, non-decreasing
};

/// Validates and assembles the knot vector. Throws std::invalid_argument on
/// a bad order, an unordered domain, interior knots outside (lower, upper)
/// or not strictly increasing, or mono_from outside [lower, upper].
SplineSpec make_spec(double lower, double upper, int order,
                     std::span<const double> interior_knots, double mono_from);

/// All basis_dim basis values at s in [lower, upper] (throws
/// std::domain_error outside). Bases are right-continuous at interior knots;
/// at s == upper the last basis evaluates to 1. At most `order` entries are
/// nonzero and they always sum to 1.
std::vector<double> basis_all(const SplineSpec& spec, double s);

/// The nonzero order-`ord` basis values at s on the spec knot vector,
/// 2 <= ord <= spec.order. Writes `ord` values to out and returns the index
/// of the first one. Used for evaluation and derivatives.
int basis_window(const SplineSpec& spec, int ord, double s, std::span<double> out);

/// f(s) = sum_m coeffs[m] * b_m(s). coeffs.size() must equal basis_dim.
double spline_eval(const SplineSpec& spec, std::span<const double> coeffs, double s);

/// One-sided (right) derivative of the spline at s; left derivative at upper.
double spline_derivative(const SplineSpec& spec, std::span<const double> coeffs, double s);

/// Knot averages: mean of the order-1 knots following each basis index.
/// These are the control polygon abscissas; first is lower, last is upper.
std::vector<double> knot_averages(const SplineSpec& spec);

struct ControlVertex {
    double abscissa;  // knot average
    double ordinate;  // coefficient
};

struct ControlPolygon {
    std::vector<ControlVertex> vertices;
};

/// Control polygon of the coefficient vector: (knot average, coefficient)
/// pairs in index order.
ControlPolygon control_polygon(const SplineSpec& spec, std::span<const double> coeffs);

/// 0-based index of the first coefficient subject to the non-increasing
/// constraint: each coefficient from here on must not exceed its
/// predecessor. Coefficients below this index are unconstrained.
int first_constrained_index(const SplineSpec& spec);

/// True iff coeffs[m] <= coeffs[m - 1] for every m from
/// first_constrained_index(spec) through basis_dim - 1. When it holds, the
/// spline is non-increasing on [mono_from, upper].
bool is_nonincreasing_on(const SplineSpec& spec, std::span<const double> coeffs);

}  // namespace serveadv
