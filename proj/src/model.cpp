#include "serveadv/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace serveadv {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double log_normal_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return -0.5 * (kLog2Pi + std::log(variance) + d * d / variance);
}

double log_gamma_pdf(double x, double shape, double rate) {
    if (x <= 0.0) return kNegInf;
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace

const char* to_string(Variant v) {
    switch (v) {
        case Variant::Unconstrained: return "unconstrained";
        case Variant::Partial: return "partial";
        case Variant::Full: return "full";
    }
    return "?";
}

Variant variant_from_string(const std::string& s) {
    if (s == "unconstrained") return Variant::Unconstrained;
    if (s == "partial") return Variant::Partial;
    if (s == "full") return Variant::Full;
    throw std::invalid_argument("unknown variant '" + s + "'");
}

int ModelConfig::n_free() const {
    switch (variant) {
        case Variant::Unconstrained: return spec.basis_dim;
        case Variant::Partial: return first_constrained_index(spec);
        case Variant::Full: return 1;
    }
    return spec.basis_dim;
}

std::pair<double, double> gamma_mean_var(double mean, double variance) {
    if (!(mean > 0.0) || !(variance > 0.0))
        throw std::invalid_argument("gamma mean and variance must be positive");
    return {mean * mean / variance, mean / variance};
}

std::vector<double> reconstruct_coeffs(std::span<const double> free_beta,
                                       std::span<const double> eps) {
    if (free_beta.empty()) throw std::invalid_argument("at least one free coefficient required");
    std::vector<double> coeffs(free_beta.size() + eps.size());
    std::size_t m = 0;
    for (double b : free_beta) coeffs[m++] = b;
    for (double e : eps) {
        if (!(e > 0.0)) throw std::invalid_argument("decrements must be positive");
        coeffs[m] = coeffs[m - 1] - e;
        ++m;
    }
    return coeffs;
}

void apply_sum_to_zero(std::vector<double>& alphas) {
    if (alphas.size() < 2) throw std::invalid_argument("sum-to-zero needs at least two entries");
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < alphas.size(); ++i) acc += alphas[i];
    alphas.back() = -acc;
}

double logit_p(const SplineSpec& spec, std::span<const double> server_coeffs,
               double server_alpha, double receiver_alpha, double x) {
    return spline_eval(spec, server_coeffs, x) + (server_alpha - receiver_alpha);
}

double alpha_at(const ModelConfig& config, std::span<const double> alpha, int player, Court court) {
    if (config.court_effect) return alpha[player * 3 + (static_cast<int>(court) - 1)];
    return alpha[player];
}

int derived_alpha_index(const ModelConfig& config, int n_players) {
    return n_players * config.alpha_per_player() - 1;
}

double softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double log_sigmoid(double x) { return -softplus(-x); }

LogLikResult log_likelihood(const ModelConfig& config, const Dataset& ds, const PlayerParams& p) {
    LogLikResult out;
    out.per_obs.reserve(ds.points.size());

    std::vector<std::vector<double>> coeffs(ds.n_servers());
    for (int i = 0; i < ds.n_servers(); ++i)
        coeffs[i] = reconstruct_coeffs(p.free_beta[i], p.eps[i]);

    for (const auto& pt : ds.points) {
        const double a_s = alpha_at(config, p.alpha, ds.server_player[pt.server], pt.court);
        const double a_r = alpha_at(config, p.alpha, pt.receiver, pt.court);
        const double z = logit_p(config.spec, coeffs[pt.server], a_s, a_r, pt.x);
        const double ll = pt.y != 0 ? log_sigmoid(z) : log_sigmoid(-z);
        out.per_obs.push_back(ll);
        out.total += ll;
    }
    return out;
}

double log_prior(const ModelConfig& config, const ParamState& state, int n_servers, int n_players) {
    const auto& p = state.players;
    const auto& h = state.hyp;
    const int nf = config.n_free();
    const int ne = config.n_eps();

    // Support checks first; anything outside gets density zero.
    if (!(h.sigma2_beta0 > 0.0) || !(h.sigma2_alpha > 0.0)) return kNegInf;
    for (double t : h.tau2)
        if (!(t > 0.0)) return kNegInf;
    for (double v : {h.r_tau, h.s_tau, h.r_eps, h.s_eps})
        if (!(v > 0.0 && v < 10.0)) return kNegInf;
    for (int i = 0; i < n_servers; ++i)
        for (double e : p.eps[i])
            if (!(e > 0.0)) return kNegInf;

    double lp = 0.0;
    const auto [eps_shape, eps_rate] = gamma_mean_var(h.r_eps, h.s_eps);
    for (int i = 0; i < n_servers; ++i) {
        for (int m = 0; m < nf; ++m)
            lp += log_normal_pdf(p.free_beta[i][m], h.beta_mean[m], 1.0 / h.tau2[m]);
        for (int e = 0; e < ne; ++e) lp += log_gamma_pdf(p.eps[i][e], eps_shape, eps_rate);
    }

    const auto [tau_shape, tau_rate] = gamma_mean_var(h.r_tau, h.s_tau);
    for (int m = 0; m < nf; ++m) {
        lp += log_normal_pdf(h.beta_mean[m], h.beta0, h.sigma2_beta0);
        lp += log_gamma_pdf(h.tau2[m], tau_shape, tau_rate);
    }

    lp += log_normal_pdf(h.beta0, 0.0, 100.0);
    lp += log_gamma_pdf(1.0 / h.sigma2_beta0, 0.1, 0.1);
    lp += 4.0 * -std::log(10.0);  // uniform (r, s) pairs on (0, 10)

    // Free rally abilities: every entry except the derived last one.
    const int n_alpha = n_players * config.alpha_per_player();
    if (n_alpha > 0) {
        for (int a = 0; a + 1 < n_alpha; ++a)
            lp += log_normal_pdf(p.alpha[a], h.alpha0, h.sigma2_alpha);
    }
    lp += log_normal_pdf(h.alpha0, 0.0, 100.0);
    lp += log_gamma_pdf(1.0 / h.sigma2_alpha, 0.1, 0.1);
    return lp;
}

std::string state_to_json(const ModelConfig& config, const ParamState& state) {
    (void)config;
    nlohmann::json j;
    j["free_beta"] = state.players.free_beta;
    j["eps"] = state.players.eps;
    j["alpha"] = state.players.alpha;
    j["beta_mean"] = state.hyp.beta_mean;
    j["tau2"] = state.hyp.tau2;
    j["beta0"] = state.hyp.beta0;
    j["sigma2_beta0"] = state.hyp.sigma2_beta0;
    j["r_tau"] = state.hyp.r_tau;
    j["s_tau"] = state.hyp.s_tau;
    j["r_eps"] = state.hyp.r_eps;
    j["s_eps"] = state.hyp.s_eps;
    j["alpha0"] = state.hyp.alpha0;
    j["sigma2_alpha"] = state.hyp.sigma2_alpha;
    return j.dump();
}

ParamState state_from_json(const ModelConfig& config, const std::string& text) {
    (void)config;
    const nlohmann::json j = nlohmann::json::parse(text);
    ParamState st;
    st.players.free_beta = j.at("free_beta").get<std::vector<std::vector<double>>>();
    st.players.eps = j.at("eps").get<std::vector<std::vector<double>>>();
    st.players.alpha = j.at("alpha").get<std::vector<double>>();
    st.hyp.beta_mean = j.at("beta_mean").get<std::vector<double>>();
    st.hyp.tau2 = j.at("tau2").get<std::vector<double>>();
    st.hyp.beta0 = j.at("beta0").get<double>();
    st.hyp.sigma2_beta0 = j.at("sigma2_beta0").get<double>();
    st.hyp.r_tau = j.at("r_tau").get<double>();
    st.hyp.s_tau = j.at("s_tau").get<double>();
    st.hyp.r_eps = j.at("r_eps").get<double>();
    st.hyp.s_eps = j.at("s_eps").get<double>();
    st.hyp.alpha0 = j.at("alpha0").get<double>();
    st.hyp.sigma2_alpha = j.at("sigma2_alpha").get<double>();
    return st;
}

}  // namespace serveadv
