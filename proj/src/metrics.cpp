#include "serveadv/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace serveadv {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void log_sigmoid_pair(double z, double& pos, double& neg) {
    if (z >= 0.0) {
        const double t = std::log1p(std::exp(-z));
        pos = -t;
        neg = -z - t;
    } else {
        const double t = std::log1p(std::exp(z));
        pos = z - t;
        neg = -t;
    }
}

// logsumexp over a strided column of length n.
double logsumexp(const double* first, std::size_t n, std::size_t stride, double scale) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t d = 0; d < n; ++d) mx = std::max(mx, scale * first[d * stride]);
    if (!std::isfinite(mx)) return mx;
    double acc = 0.0;
    for (std::size_t d = 0; d < n; ++d) acc += std::exp(scale * first[d * stride] - mx);
    return mx + std::log(acc);
}

double sample_variance(const double* first, std::size_t n, std::size_t stride) {
    if (n < 2) return 0.0;
    double mean = 0.0;
    for (std::size_t d = 0; d < n; ++d) mean += first[d * stride];
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
        const double dev = first[d * stride] - mean;
        acc += dev * dev;
    }
    return acc / static_cast<double>(n - 1);
}

}  // namespace

double lpml(const LogLikMatrix& ll) {
    const double log_s = std::log(static_cast<double>(ll.n_draws));
    double acc = 0.0;
    for (std::size_t o = 0; o < ll.n_obs; ++o)
        acc += log_s - logsumexp(ll.values.data() + o, ll.n_draws, ll.n_obs, -1.0);
    return acc;
}

double waic(const LogLikMatrix& ll) {
    const double log_s = std::log(static_cast<double>(ll.n_draws));
    double acc = 0.0;
    for (std::size_t o = 0; o < ll.n_obs; ++o) {
        const double lppd = logsumexp(ll.values.data() + o, ll.n_draws, ll.n_obs, 1.0) - log_s;
        const double pwaic = sample_variance(ll.values.data() + o, ll.n_draws, ll.n_obs);
        acc += lppd - pwaic;
    }
    return -2.0 * acc;
}

double dic(std::span<const double> loglik_totals, double loglik_at_mean) {
    double mean_ll = 0.0;
    for (double v : loglik_totals) mean_ll += v;
    mean_ll /= static_cast<double>(loglik_totals.size());
    return -4.0 * mean_ll + 2.0 * loglik_at_mean;
}

namespace {

// Applies fn(weight, column pointer, scale) for both sides of every cell:
// success observations see +logit log-likelihoods, failures the -logit side.
// The per-draw log-likelihood columns are built once per cell.
template <typename Fn>
void for_each_cell_side(const std::vector<CellObs>& cells, std::span<const double> cell_logits,
                        std::size_t n_draws, Fn&& fn) {
    const std::size_t n_cells = cells.size();
    std::vector<double> ll_win(n_draws), ll_loss(n_draws);
    for (std::size_t c = 0; c < n_cells; ++c) {
        const int wins = cells[c].wins;
        const int losses = cells[c].total - cells[c].wins;
        if (wins == 0 && losses == 0) continue;
        for (std::size_t d = 0; d < n_draws; ++d) {
            double lsp, lsn;
            log_sigmoid_pair(cell_logits[d * n_cells + c], lsp, lsn);
            ll_win[d] = lsp;
            ll_loss[d] = lsn;
        }
        if (wins > 0) fn(static_cast<double>(wins), ll_win.data());
        if (losses > 0) fn(static_cast<double>(losses), ll_loss.data());
    }
}

}  // namespace

double lpml_cells(const std::vector<CellObs>& cells, std::span<const double> cell_logits,
                  std::size_t n_draws) {
    const double log_s = std::log(static_cast<double>(n_draws));
    double acc = 0.0;
    for_each_cell_side(cells, cell_logits, n_draws, [&](double weight, const double* col) {
        acc += weight * (log_s - logsumexp(col, n_draws, 1, -1.0));
    });
    return acc;
}

double waic_cells(const std::vector<CellObs>& cells, std::span<const double> cell_logits,
                  std::size_t n_draws) {
    const double log_s = std::log(static_cast<double>(n_draws));
    double acc = 0.0;
    for_each_cell_side(cells, cell_logits, n_draws, [&](double weight, const double* col) {
        const double lppd = logsumexp(col, n_draws, 1, 1.0) - log_s;
        acc += weight * (lppd - sample_variance(col, n_draws, 1));
    });
    return -2.0 * acc;
}

std::vector<double> loglik_totals_cells(const std::vector<CellObs>& cells,
                                        std::span<const double> cell_logits, std::size_t n_draws) {
    const std::size_t n_cells = cells.size();
    std::vector<double> totals(n_draws, 0.0);
    for (std::size_t d = 0; d < n_draws; ++d) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n_cells; ++c) {
            double lsp, lsn;
            log_sigmoid_pair(cell_logits[d * n_cells + c], lsp, lsn);
            acc += cells[c].wins * lsp + (cells[c].total - cells[c].wins) * lsn;
        }
        totals[d] = acc;
    }
    return totals;
}

double rmse_cells(const std::vector<CellObs>& cells, std::span<const double> cell_logits,
                  std::size_t n_draws) {
    const std::size_t n_cells = cells.size();
    // observed and posterior-mean expected win counts per (server, bucket)
    std::map<std::pair<int, int>, std::pair<double, double>> groups;
    for (std::size_t c = 0; c < n_cells; ++c) {
        double p_mean = 0.0;
        for (std::size_t d = 0; d < n_draws; ++d) p_mean += sigmoid(cell_logits[d * n_cells + c]);
        p_mean /= static_cast<double>(n_draws);
        auto& g = groups[{cells[c].server, cells[c].x}];
        g.first += cells[c].wins;
        g.second += cells[c].total * p_mean;
    }
    if (groups.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& [key, g] : groups) {
        const double err = g.first - g.second;
        acc += err * err;
    }
    return std::sqrt(acc / static_cast<double>(groups.size()));
}

ParamState posterior_mean_state(const PosteriorDraws& draws) {
    const std::size_t n = draws.n_draws();
    if (n == 0) throw std::invalid_argument("no draws to average");
    const int nf = draws.model.n_free();
    const int ne = draws.model.n_eps();
    const int n_alpha = draws.n_players * draws.model.alpha_per_player();

    auto column_mean = [&](std::size_t j) {
        double acc = 0.0;
        for (std::size_t d = 0; d < n; ++d) acc += draws.value(d, j);
        return acc / static_cast<double>(n);
    };
    auto column_log_mean = [&](std::size_t j) {
        double acc = 0.0;
        for (std::size_t d = 0; d < n; ++d) acc += std::log(draws.value(d, j));
        return std::exp(acc / static_cast<double>(n));
    };

    ParamState st;
    st.players.free_beta.assign(draws.n_servers, std::vector<double>(nf));
    st.players.eps.assign(draws.n_servers, std::vector<double>(ne));
    st.players.alpha.assign(n_alpha, 0.0);
    for (int i = 0; i < draws.n_servers; ++i) {
        for (int m = 0; m < nf; ++m) st.players.free_beta[i][m] = column_mean(draws.beta_offset(i) + m);
        for (int e = 0; e < ne; ++e) st.players.eps[i][e] = column_log_mean(draws.eps_offset(i) + e);
    }
    for (int a = 0; a < n_alpha; ++a) st.players.alpha[a] = column_mean(draws.alpha_offset() + a);
    if (n_alpha >= 2) apply_sum_to_zero(st.players.alpha);

    std::size_t h = draws.hyper_offset();
    st.hyp.beta_mean.resize(nf);
    st.hyp.tau2.resize(nf);
    for (int m = 0; m < nf; ++m) st.hyp.beta_mean[m] = column_mean(h + m);
    for (int m = 0; m < nf; ++m) st.hyp.tau2[m] = column_mean(h + nf + m);
    h += 2 * static_cast<std::size_t>(nf);
    st.hyp.beta0 = column_mean(h + 0);
    st.hyp.sigma2_beta0 = column_mean(h + 1);
    st.hyp.r_tau = column_mean(h + 2);
    st.hyp.s_tau = column_mean(h + 3);
    st.hyp.r_eps = column_mean(h + 4);
    st.hyp.s_eps = column_mean(h + 5);
    st.hyp.alpha0 = column_mean(h + 6);
    st.hyp.sigma2_alpha = column_mean(h + 7);
    return st;
}

namespace {

// Lag-t autocovariance of x about its mean (1/n normalization).
double autocov(std::span<const double> x, double mean, std::size_t t) {
    const std::size_t n = x.size();
    double acc = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) acc += (x[i] - mean) * (x[i + t] - mean);
    return acc / static_cast<double>(n);
}

double ess_one_chain(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 4) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    const double c0 = autocov(x, mean, 0);
    if (c0 <= 0.0) return static_cast<double>(n);

    // Geyer initial positive sequence: sum paired autocorrelations while
    // the pair sums stay positive.
    double sum_gamma = 0.0;
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        const double gamma =
            (autocov(x, mean, 2 * k) + autocov(x, mean, 2 * k + 1)) / c0;
        if (gamma <= 0.0) break;
        sum_gamma += gamma;
    }
    const double tau = std::max(-1.0 + 2.0 * sum_gamma, 1e-10);
    return static_cast<double>(n) / tau;
}

}  // namespace

double ess(std::span<const double> x, int n_chains) {
    if (n_chains < 1 || x.empty()) return 0.0;
    const std::size_t per = x.size() / static_cast<std::size_t>(n_chains);
    double acc = 0.0;
    for (int c = 0; c < n_chains; ++c) acc += ess_one_chain(x.subspan(c * per, per));
    return acc;
}

double split_rhat(std::span<const double> x, int n_chains) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (n_chains < 1 || x.empty()) return nan;
    const std::size_t per = x.size() / static_cast<std::size_t>(n_chains);
    const std::size_t half = per / 2;
    if (half < 2) return nan;

    std::vector<std::span<const double>> splits;
    for (int c = 0; c < n_chains; ++c) {
        const auto chain = x.subspan(c * per, per);
        splits.push_back(chain.subspan(0, half));
        splits.push_back(chain.subspan(half, half));
    }
    const std::size_t m = splits.size();
    std::vector<double> means(m), vars(m);
    for (std::size_t j = 0; j < m; ++j) {
        double mu = 0.0;
        for (double v : splits[j]) mu += v;
        mu /= static_cast<double>(half);
        double ss = 0.0;
        for (double v : splits[j]) ss += (v - mu) * (v - mu);
        means[j] = mu;
        vars[j] = ss / static_cast<double>(half - 1);
    }
    double w = 0.0;
    for (double v : vars) w += v;
    w /= static_cast<double>(m);
    double grand = 0.0;
    for (double mu : means) grand += mu;
    grand /= static_cast<double>(m);
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= static_cast<double>(half) / static_cast<double>(m - 1);
    if (w <= 0.0) return nan;
    const double var_plus =
        (static_cast<double>(half - 1) / static_cast<double>(half)) * w + b / static_cast<double>(half);
    return std::sqrt(var_plus / w);
}

Diagnostics diagnostics(const PosteriorDraws& draws) {
    const std::size_t n = draws.n_draws();
    const std::size_t p = draws.n_params();
    Diagnostics out;
    out.ess.resize(p);
    out.rhat.resize(p);
    out.min_ess = std::numeric_limits<double>::infinity();
    out.max_rhat = 0.0;
    std::vector<double> col(n);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t d = 0; d < n; ++d) col[d] = draws.value(d, j);
        out.ess[j] = ess(col, draws.chain.n_chains);
        out.rhat[j] = split_rhat(col, draws.chain.n_chains);
        if (std::isfinite(out.ess[j])) out.min_ess = std::min(out.min_ess, out.ess[j]);
        if (std::isfinite(out.rhat[j])) out.max_rhat = std::max(out.max_rhat, out.rhat[j]);
    }
    if (!std::isfinite(out.min_ess)) out.min_ess = 0.0;
    return out;
}

MetricSet evaluate_fit(const PosteriorDraws& draws) {
    if (draws.cells.empty())
        throw std::invalid_argument("draws carry no observation cells to score");
    const std::size_t n = draws.n_draws();
    MetricSet m;
    m.lpml = lpml_cells(draws.cells, draws.cell_logits, n);
    m.waic = waic_cells(draws.cells, draws.cell_logits, n);
    const ParamState mean_state = posterior_mean_state(draws);
    const auto mean_logits = cell_logits_for(draws.model, draws.cells, draws.n_servers, mean_state);
    m.dic = dic(draws.loglik_total, total_loglik(draws.cells, mean_logits));
    m.rmse = rmse_cells(draws.cells, draws.cell_logits, n);
    return m;
}

std::string fit_report_to_json(const FitReport& report) {
    nlohmann::json j;
    j["variant"] = report.variant;
    j["court_effect"] = report.court_effect;
    j["dataset_hash"] = report.dataset_hash;
    j["n_draws"] = report.n_draws;
    j["chain"] = {{"n_chains", report.n_chains},
                  {"n_iter", report.n_iter},
                  {"burn_in", report.burn_in},
                  {"thin", report.thin},
                  {"seed", report.seed}};
    j["metrics"] = {{"lpml", report.metrics.lpml},
                    {"waic", report.metrics.waic},
                    {"dic", report.metrics.dic},
                    {"rmse", report.metrics.rmse}};
    j["acceptance"] = report.acceptance;
    j["diagnostics"] = {{"min_ess", report.min_ess}, {"max_rhat", report.max_rhat}};
    j["runtime_seconds"] = report.runtime_seconds;
    return j.dump(2) + "\n";
}

FitReport fit_report_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    FitReport r;
    r.variant = j.at("variant").get<std::string>();
    r.court_effect = j.at("court_effect").get<bool>();
    r.dataset_hash = j.at("dataset_hash").get<std::string>();
    r.n_draws = j.at("n_draws").get<std::int64_t>();
    const auto& c = j.at("chain");
    r.n_chains = c.at("n_chains").get<int>();
    r.n_iter = c.at("n_iter").get<std::int64_t>();
    r.burn_in = c.at("burn_in").get<std::int64_t>();
    r.thin = c.at("thin").get<std::int64_t>();
    r.seed = c.at("seed").get<std::uint64_t>();
    const auto& m = j.at("metrics");
    r.metrics.lpml = m.at("lpml").get<double>();
    r.metrics.waic = m.at("waic").get<double>();
    r.metrics.dic = m.at("dic").get<double>();
    r.metrics.rmse = m.at("rmse").get<double>();
    if (j.contains("acceptance"))
        r.acceptance = j.at("acceptance").get<std::map<std::string, double>>();
    const auto& d = j.at("diagnostics");
    r.min_ess = d.at("min_ess").get<double>();
    r.max_rhat = d.at("max_rhat").get<double>();
    r.runtime_seconds = j.value("runtime_seconds", 0.0);
    return r;
}

}  // namespace serveadv
