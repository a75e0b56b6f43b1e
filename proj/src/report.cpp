#include "serveadv/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

#include "serveadv/rng.hpp"
#include "serveadv/splines.hpp"

namespace serveadv {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// Basis rows for every grid point, row-major [point][basis].
std::vector<double> grid_basis(const SplineSpec& spec, std::span<const double> grid) {
    std::vector<double> rows(grid.size() * static_cast<std::size_t>(spec.basis_dim));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto row = basis_all(spec, grid[g]);
        std::copy(row.begin(), row.end(), rows.begin() + g * spec.basis_dim);
    }
    return rows;
}

// Rally ability of player p on the given court, for one draw.
double alpha_entry(const PosteriorDraws& draws, std::size_t draw, int player, Court court) {
    const int app = draws.model.alpha_per_player();
    const std::size_t idx = draws.alpha_offset() +
                            static_cast<std::size_t>(player) * app +
                            (app == 3 ? static_cast<int>(court) - 1 : 0);
    return draws.value(draw, idx);
}

// alpha_i minus the mean ability of the other players, for one draw.
double alpha_vs_field(const PosteriorDraws& draws, std::size_t draw, int player, Court court) {
    const int n = draws.n_players;
    double sum = 0.0;
    for (int j = 0; j < n; ++j) sum += alpha_entry(draws, draw, j, court);
    const double own = player >= 0 ? alpha_entry(draws, draw, player, court) : 0.0;
    const int others = player >= 0 ? n - 1 : n;
    if (others <= 0) return own;
    return own - (sum - own) / static_cast<double>(others);
}

std::vector<double> coeffs_of_draw(const PosteriorDraws& draws, std::size_t draw, int server) {
    const int nf = draws.model.n_free();
    const int ne = draws.model.n_eps();
    std::vector<double> free(nf), eps(ne);
    for (int m = 0; m < nf; ++m) free[m] = draws.value(draw, draws.beta_offset(server) + m);
    for (int e = 0; e < ne; ++e) eps[e] = draws.value(draw, draws.eps_offset(server) + e);
    return reconstruct_coeffs(free, eps);
}

CurveSummary summarize_prob_rows(std::span<const double> grid, const std::vector<double>& probs,
                                 std::size_t n_draws) {
    // probs is row-major [draw][grid point]
    CurveSummary out;
    out.grid.assign(grid.begin(), grid.end());
    out.mean.resize(grid.size());
    out.lo.resize(grid.size());
    out.hi.resize(grid.size());
    std::vector<double> col(n_draws);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (std::size_t d = 0; d < n_draws; ++d) {
            col[d] = probs[d * grid.size() + g];
            acc += col[d];
        }
        out.mean[g] = acc / static_cast<double>(n_draws);
        out.lo[g] = quantile(col, 0.025);
        out.hi[g] = quantile(col, 0.975);
    }
    return out;
}

}  // namespace

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::sort(values.begin(), values.end());
    if (q <= 0.0) return values.front();
    if (q >= 1.0) return values.back();
    const double h = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

std::vector<double> default_grid(const SplineSpec& spec) {
    std::vector<double> grid;
    for (double s = spec.lower; s < spec.upper - 1e-9; s += 0.1) grid.push_back(s);
    grid.push_back(spec.upper);
    return grid;
}

CurveSummary curve_summary(const PosteriorDraws& draws, int server, std::span<const double> grid,
                           Court court) {
    if (server < 0 || server >= draws.n_servers) throw std::invalid_argument("server out of range");
    const std::size_t n = draws.n_draws();
    const int M = draws.model.spec.basis_dim;
    const auto rows = grid_basis(draws.model.spec, grid);
    const int player = draws.server_player.empty() ? server : draws.server_player[server];

    std::vector<double> probs(n * grid.size());
    for (std::size_t d = 0; d < n; ++d) {
        const auto coeffs = coeffs_of_draw(draws, d, server);
        const double shift = alpha_vs_field(draws, d, player, court);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            double f = 0.0;
            for (int m = 0; m < M; ++m) f += coeffs[m] * rows[g * M + m];
            probs[d * grid.size() + g] = sigmoid(f + shift);
        }
    }
    return summarize_prob_rows(grid, probs, n);
}

ScalarSummary serve_advantage(const PosteriorDraws& draws, int server) {
    if (server < 0 || server >= draws.n_servers) throw std::invalid_argument("server out of range");
    const auto& spec = draws.model.spec;
    const auto row_lo = basis_all(spec, spec.lower);
    const auto row_hi = basis_all(spec, spec.upper);
    const std::size_t n = draws.n_draws();
    std::vector<double> adv(n);
    for (std::size_t d = 0; d < n; ++d) {
        const auto coeffs = coeffs_of_draw(draws, d, server);
        double f_lo = 0.0, f_hi = 0.0;
        for (int m = 0; m < spec.basis_dim; ++m) {
            f_lo += coeffs[m] * row_lo[m];
            f_hi += coeffs[m] * row_hi[m];
        }
        adv[d] = f_lo - f_hi;
    }
    ScalarSummary out;
    out.median = quantile(adv, 0.5);
    out.lo = quantile(adv, 0.025);
    out.hi = quantile(std::move(adv), 0.975);
    return out;
}

std::vector<RankedPlayer> rank_rally_ability(const PosteriorDraws& draws, Court court) {
    const std::size_t n = draws.n_draws();
    std::vector<RankedPlayer> out;
    out.reserve(draws.n_players);
    std::vector<double> col(n);
    for (int p = 0; p < draws.n_players; ++p) {
        for (std::size_t d = 0; d < n; ++d) col[d] = alpha_entry(draws, d, p, court);
        RankedPlayer r;
        r.player = draws.player_names[p];
        r.median = quantile(col, 0.5);
        r.lo = quantile(col, 0.025);
        r.hi = quantile(col, 0.975);
        out.push_back(std::move(r));
    }
    std::sort(out.begin(), out.end(), [](const RankedPlayer& a, const RankedPlayer& b) {
        if (a.median != b.median) return a.median > b.median;
        return a.player < b.player;
    });
    return out;
}

std::vector<FitPoint> observed_vs_fitted(const PosteriorDraws& draws) {
    if (draws.cells.empty()) throw std::invalid_argument("draws carry no observation cells");
    const std::size_t n = draws.n_draws();
    const std::size_t n_cells = draws.cells.size();
    std::map<std::pair<int, int>, FitPoint> groups;
    for (std::size_t c = 0; c < n_cells; ++c) {
        const CellObs& cell = draws.cells[c];
        double p_mean = 0.0;
        for (std::size_t d = 0; d < n; ++d)
            p_mean += sigmoid(draws.cell_logits[d * n_cells + c]);
        p_mean /= static_cast<double>(n);
        auto& g = groups[{cell.server, cell.x}];
        g.server = cell.server;
        g.x = cell.x;
        g.total += cell.total;
        g.wins += cell.wins;
        g.fitted += cell.total * p_mean;  // weighted sum for now
    }
    std::vector<FitPoint> out;
    out.reserve(groups.size());
    for (auto& [key, g] : groups) {
        g.observed = static_cast<double>(g.wins) / static_cast<double>(g.total);
        g.fitted /= static_cast<double>(g.total);
        out.push_back(g);
    }
    return out;
}

std::vector<PlayerScatter> scatter_data(const PosteriorDraws& draws, Court court) {
    const std::size_t n = draws.n_draws();
    std::vector<PlayerScatter> out;
    out.reserve(draws.n_servers);
    std::vector<double> col(n);
    for (int i = 0; i < draws.n_servers; ++i) {
        const int player = draws.server_player.empty() ? i : draws.server_player[i];
        for (std::size_t d = 0; d < n; ++d) col[d] = alpha_entry(draws, d, player, court);
        PlayerScatter p;
        p.player = draws.server_names[i];
        p.alpha.median = quantile(col, 0.5);
        p.alpha.lo = quantile(col, 0.025);
        p.alpha.hi = quantile(col, 0.975);
        p.advantage = serve_advantage(draws, i);
        const bool alpha_zero = p.alpha.lo <= 0.0 && 0.0 <= p.alpha.hi;
        const bool adv_zero = p.advantage.lo <= 0.0 && 0.0 <= p.advantage.hi;
        p.zero_excluded = !alpha_zero && !adv_zero;
        out.push_back(std::move(p));
    }
    return out;
}

PredictionSummary predict_new_server(const PosteriorDraws& draws, const std::string& player_name,
                                     std::span<const double> grid, Court court,
                                     std::uint64_t seed) {
    const std::size_t n = draws.n_draws();
    const auto& spec = draws.model.spec;
    const int M = spec.basis_dim;
    const int nf = draws.model.n_free();
    const int ne = draws.model.n_eps();
    const auto rows = grid_basis(spec, grid);
    const auto row_lo = basis_all(spec, spec.lower);
    const auto row_hi = basis_all(spec, spec.upper);

    int player = -1;
    for (int p = 0; p < draws.n_players; ++p) {
        if (draws.player_names[p] == player_name) {
            player = p;
            break;
        }
    }

    const std::size_t h = draws.hyper_offset();
    Rng rng(seed);
    std::vector<double> free(nf), eps(ne), probs(n * grid.size()), adv(n);
    for (std::size_t d = 0; d < n; ++d) {
        // Population draw of a new decay curve, conditional on this draw's
        // hyperparameters.
        for (int m = 0; m < nf; ++m) {
            const double mean = draws.value(d, h + m);
            const double tau2 = draws.value(d, h + nf + m);
            free[m] = rng.normal(mean, std::sqrt(1.0 / tau2));
        }
        if (ne > 0) {
            const double r = draws.value(d, h + 2 * nf + 4);
            const double s = draws.value(d, h + 2 * nf + 5);
            const auto [shape, rate] = gamma_mean_var(r, s);
            for (int e = 0; e < ne; ++e) eps[e] = rng.gamma(shape, rate);
        }
        const auto coeffs = reconstruct_coeffs(free, eps);

        double shift;
        if (player >= 0) {
            shift = alpha_vs_field(draws, d, player, court);
        } else {
            const double alpha0 = draws.value(d, h + 2 * nf + 6);
            const double sigma2 = draws.value(d, h + 2 * nf + 7);
            const double own = rng.normal(alpha0, std::sqrt(sigma2));
            double field = 0.0;
            for (int j = 0; j < draws.n_players; ++j) field += alpha_entry(draws, d, j, court);
            if (draws.n_players > 0) field /= static_cast<double>(draws.n_players);
            shift = own - field;
        }

        for (std::size_t g = 0; g < grid.size(); ++g) {
            double f = 0.0;
            for (int m = 0; m < M; ++m) f += coeffs[m] * rows[g * M + m];
            probs[d * grid.size() + g] = sigmoid(f + shift);
        }
        double f_lo = 0.0, f_hi = 0.0;
        for (int m = 0; m < M; ++m) {
            f_lo += coeffs[m] * row_lo[m];
            f_hi += coeffs[m] * row_hi[m];
        }
        adv[d] = f_lo - f_hi;
    }

    PredictionSummary out;
    out.known_player = player >= 0;
    out.curve = summarize_prob_rows(grid, probs, n);
    out.advantage.median = quantile(adv, 0.5);
    out.advantage.lo = quantile(adv, 0.025);
    out.advantage.hi = quantile(std::move(adv), 0.975);
    return out;
}

}  // namespace serveadv
