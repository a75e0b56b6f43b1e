#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <tuple>

#include "serveadv/data.hpp"
#include "serveadv/metrics.hpp"
#include "serveadv/model.hpp"
#include "serveadv/report.hpp"
#include "serveadv/sampler.hpp"
#include "serveadv/splines.hpp"

namespace py = pybind11;
using namespace serveadv;

namespace {

ModelConfig make_model(const SplineSpec& spec, const std::string& variant, bool court_effect) {
    ModelConfig m;
    m.spec = spec;
    m.variant = variant_from_string(variant);
    m.court_effect = court_effect;
    return m;
}

// Compact fit entry point: aggregated points in, posterior summary out.
// points rows are (server, receiver, x, y, court) with court in 1..3.
py::dict fit_points(const std::vector<std::tuple<int, int, int, int, int>>& points,
                    const std::vector<std::string>& server_names,
                    const std::vector<std::string>& player_names,
                    const std::vector<int>& server_player, const SplineSpec& spec,
                    const std::string& variant, bool court_effect, std::int64_t n_iter,
                    std::int64_t burn_in, std::int64_t thin, int n_chains, std::uint64_t seed) {
    Dataset ds;
    ds.server_names = server_names;
    ds.player_names = player_names;
    ds.server_player.assign(server_player.begin(), server_player.end());
    ds.points.reserve(points.size());
    for (const auto& [server, receiver, x, y, court] : points) {
        AggregatedPoint p;
        p.server = server;
        p.receiver = receiver;
        p.x = static_cast<std::int16_t>(x);
        p.y = static_cast<std::int16_t>(y);
        p.court = static_cast<Court>(court);
        ds.points.push_back(p);
    }

    const ModelConfig model = make_model(spec, variant, court_effect);
    ChainConfig chain;
    chain.n_iter = n_iter;
    chain.burn_in = burn_in;
    chain.thin = thin;
    chain.n_chains = n_chains;
    chain.seed = seed;

    PosteriorDraws draws;
    {
        py::gil_scoped_release release;
        draws = run_chain(chain, ds, model);
    }
    const MetricSet metrics = evaluate_fit(draws);
    const Diagnostics diag = diagnostics(draws);

    py::dict out;
    out["param_names"] = draws.param_names;
    out["n_draws"] = draws.n_draws();
    out["n_params"] = draws.n_params();
    out["states"] = draws.states;  // row-major [draw][param]
    out["loglik_total"] = draws.loglik_total;
    py::dict acc;
    for (const auto& [name, st] : draws.acceptance.blocks) acc[name.c_str()] = st.rate();
    out["acceptance"] = acc;
    out["lpml"] = metrics.lpml;
    out["waic"] = metrics.waic;
    out["dic"] = metrics.dic;
    out["rmse"] = metrics.rmse;
    out["min_ess"] = diag.min_ess;
    out["max_rhat"] = diag.max_rhat;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Shape-constrained serve-advantage curves and rally abilities";

    py::class_<SplineSpec>(m, "SplineSpec")
        .def_readonly("order", &SplineSpec::order)
        .def_readonly("basis_dim", &SplineSpec::basis_dim)
        .def_readonly("lower", &SplineSpec::lower)
        .def_readonly("upper", &SplineSpec::upper)
        .def_readonly("mono_from", &SplineSpec::mono_from)
        .def_readonly("knots", &SplineSpec::knots);

    m.def(
        "make_spec",
        [](double lower, double upper, int order, const std::vector<double>& interior,
           double mono_from) { return make_spec(lower, upper, order, interior, mono_from); },
        py::arg("lower"), py::arg("upper"), py::arg("order"), py::arg("interior_knots"),
        py::arg("mono_from"));
    m.def("basis_all", &basis_all, py::arg("spec"), py::arg("s"));
    m.def(
        "spline_eval",
        [](const SplineSpec& spec, const std::vector<double>& coeffs, double s) {
            return spline_eval(spec, coeffs, s);
        },
        py::arg("spec"), py::arg("coeffs"), py::arg("s"));
    m.def(
        "spline_derivative",
        [](const SplineSpec& spec, const std::vector<double>& coeffs, double s) {
            return spline_derivative(spec, coeffs, s);
        },
        py::arg("spec"), py::arg("coeffs"), py::arg("s"));
    m.def("knot_averages", &knot_averages, py::arg("spec"));
    m.def("first_constrained_index", &first_constrained_index, py::arg("spec"));
    m.def(
        "is_nonincreasing_on",
        [](const SplineSpec& spec, const std::vector<double>& coeffs) {
            return is_nonincreasing_on(spec, coeffs);
        },
        py::arg("spec"), py::arg("coeffs"));
    m.def(
        "reconstruct_coeffs",
        [](const std::vector<double>& free_beta, const std::vector<double>& eps) {
            return reconstruct_coeffs(free_beta, eps);
        },
        py::arg("free_beta"), py::arg("eps"));
    m.def("gamma_mean_var", &gamma_mean_var, py::arg("mean"), py::arg("variance"));
    m.def(
        "apply_sum_to_zero",
        [](std::vector<double> alphas) {
            apply_sum_to_zero(alphas);
            return alphas;
        },
        py::arg("alphas"));
    m.def("aggregate_rally", &aggregate_rally, py::arg("raw"));

    m.def(
        "lpml",
        [](const std::vector<double>& values, std::size_t n_draws, std::size_t n_obs) {
            return lpml(LogLikMatrix{n_draws, n_obs, values});
        },
        py::arg("loglik"), py::arg("n_draws"), py::arg("n_obs"),
        "LPML from a row-major draws-by-observations log-likelihood matrix");
    m.def(
        "waic",
        [](const std::vector<double>& values, std::size_t n_draws, std::size_t n_obs) {
            return waic(LogLikMatrix{n_draws, n_obs, values});
        },
        py::arg("loglik"), py::arg("n_draws"), py::arg("n_obs"));
    m.def(
        "dic",
        [](const std::vector<double>& totals, double loglik_at_mean) {
            return dic(totals, loglik_at_mean);
        },
        py::arg("loglik_totals"), py::arg("loglik_at_mean"));
    m.def(
        "ess", [](const std::vector<double>& x, int n_chains) { return ess(x, n_chains); },
        py::arg("trace"), py::arg("n_chains") = 1);
    m.def(
        "split_rhat",
        [](const std::vector<double>& x, int n_chains) { return split_rhat(x, n_chains); },
        py::arg("trace"), py::arg("n_chains") = 1);
    m.def(
        "quantile", [](std::vector<double> v, double q) { return quantile(std::move(v), q); },
        py::arg("values"), py::arg("q"));

    m.def("fit", &fit_points, py::arg("points"), py::arg("server_names"), py::arg("player_names"),
          py::arg("server_player"), py::arg("spec"), py::arg("variant") = "partial",
          py::arg("court_effect") = false, py::arg("n_iter") = 2000, py::arg("burn_in") = 500,
          py::arg("thin") = 5, py::arg("n_chains") = 1, py::arg("seed") = 1,
          "Fit the model to aggregated points and return a posterior summary dict");
}
