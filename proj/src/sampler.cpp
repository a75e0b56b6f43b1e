#include "serveadv/sampler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

#include "serveadv/errors.hpp"
#include "serveadv/rng.hpp"

namespace serveadv {

namespace {

constexpr int kMaxBucket = 15;

// log sigma(z) and log sigma(-z) with a single exponential.
inline void log_sigmoid_pair(double z, double& pos, double& neg) {
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

// Gamma draws for a precision can underflow to exactly zero when the shape
// itself underflows (the hyper pair near the edge of its support); a zero
// precision turns every later density into log(0) and wedges the chain.
// Flooring at a tiny positive value keeps all the logs finite.
constexpr double kMinPrecision = 1e-290;

// Robbins-Monro step-size tuner targeting a fixed acceptance probability.
struct StepTuner {
    double log_step = 0.0;
    long updates = 0;

    void adapt(double acc_prob, double target) {
        ++updates;
        log_step += (acc_prob - target) / std::pow(static_cast<double>(updates), 0.6);
        log_step = std::clamp(log_step, std::log(1e-5), std::log(20.0));
    }
    double step() const { return std::exp(log_step); }
};

struct Layout {
    int n_servers = 0;
    int n_players = 0;
    int n_free = 0;
    int n_eps = 0;
    int n_alpha = 0;

    Layout(const ModelConfig& config, int servers, int players)
        : n_servers(servers),
          n_players(players),
          n_free(config.n_free()),
          n_eps(config.n_eps()),
          n_alpha(players * config.alpha_per_player()) {}

    std::size_t beta_off(int i) const { return static_cast<std::size_t>(i) * n_free; }
    std::size_t eps_off(int i) const {
        return static_cast<std::size_t>(n_servers) * n_free + static_cast<std::size_t>(i) * n_eps;
    }
    std::size_t alpha_off() const { return static_cast<std::size_t>(n_servers) * (n_free + n_eps); }
    std::size_t hyper_off() const { return alpha_off() + n_alpha; }
    std::size_t total() const { return hyper_off() + 2 * static_cast<std::size_t>(n_free) + 8; }
};

}  // namespace

std::int64_t draws_per_chain(const ChainConfig& config) {
    if (config.thin <= 0 || config.burn_in < 0 || config.n_iter <= config.burn_in) return 0;
    return (config.n_iter - config.burn_in) / config.thin;
}

namespace detail {

std::pair<double, double> normal_posterior(double m0, double p0, double tau, double n, double sum) {
    const double prec = p0 + n * tau;
    const double mean = (p0 * m0 + tau * sum) / prec;
    return {mean, prec};
}

std::pair<double, double> gamma_posterior(double shape0, double rate0, double n, double sumsq) {
    return {shape0 + 0.5 * n, rate0 + 0.5 * sumsq};
}

}  // namespace detail

std::vector<std::string> param_names(const ModelConfig& config, const Dataset& ds) {
    const Layout lay(config, ds.n_servers(), ds.n_players());
    std::vector<std::string> names;
    names.reserve(lay.total());
    for (int i = 0; i < lay.n_servers; ++i)
        for (int m = 0; m < lay.n_free; ++m)
            names.push_back("beta[" + std::to_string(i) + "][" + std::to_string(m) + "]");
    for (int i = 0; i < lay.n_servers; ++i)
        for (int e = 0; e < lay.n_eps; ++e)
            names.push_back("eps[" + std::to_string(i) + "][" + std::to_string(e) + "]");
    static const char* court_tag[3] = {"clay", "grass", "hard"};
    for (int p = 0; p < lay.n_players; ++p) {
        if (config.court_effect) {
            for (int c = 0; c < 3; ++c)
                names.push_back("alpha[" + std::to_string(p) + "][" + court_tag[c] + "]");
        } else {
            names.push_back("alpha[" + std::to_string(p) + "]");
        }
    }
    for (int m = 0; m < lay.n_free; ++m) names.push_back("beta_mean[" + std::to_string(m) + "]");
    for (int m = 0; m < lay.n_free; ++m) names.push_back("tau2[" + std::to_string(m) + "]");
    for (const char* n : {"beta0", "sigma2_beta0", "r_tau", "s_tau", "r_eps", "s_eps", "alpha0", "sigma2_alpha"})
        names.push_back(n);
    return names;
}

std::vector<double> flatten_state(const ModelConfig& config, int n_servers, int n_players,
                                  const ParamState& state) {
    const Layout lay(config, n_servers, n_players);
    std::vector<double> flat(lay.total());
    for (int i = 0; i < n_servers; ++i)
        for (int m = 0; m < lay.n_free; ++m) flat[lay.beta_off(i) + m] = state.players.free_beta[i][m];
    for (int i = 0; i < n_servers; ++i)
        for (int e = 0; e < lay.n_eps; ++e) flat[lay.eps_off(i) + e] = state.players.eps[i][e];
    for (int a = 0; a < lay.n_alpha; ++a) flat[lay.alpha_off() + a] = state.players.alpha[a];
    std::size_t h = lay.hyper_off();
    for (int m = 0; m < lay.n_free; ++m) flat[h++] = state.hyp.beta_mean[m];
    for (int m = 0; m < lay.n_free; ++m) flat[h++] = state.hyp.tau2[m];
    flat[h++] = state.hyp.beta0;
    flat[h++] = state.hyp.sigma2_beta0;
    flat[h++] = state.hyp.r_tau;
    flat[h++] = state.hyp.s_tau;
    flat[h++] = state.hyp.r_eps;
    flat[h++] = state.hyp.s_eps;
    flat[h++] = state.hyp.alpha0;
    flat[h++] = state.hyp.sigma2_alpha;
    return flat;
}

ParamState unflatten_state(const ModelConfig& config, int n_servers, int n_players,
                           std::span<const double> flat) {
    const Layout lay(config, n_servers, n_players);
    if (flat.size() != lay.total()) throw std::invalid_argument("flattened state has the wrong length");
    ParamState st;
    st.players.free_beta.assign(n_servers, std::vector<double>(lay.n_free));
    st.players.eps.assign(n_servers, std::vector<double>(lay.n_eps));
    st.players.alpha.assign(lay.n_alpha, 0.0);
    for (int i = 0; i < n_servers; ++i)
        for (int m = 0; m < lay.n_free; ++m) st.players.free_beta[i][m] = flat[lay.beta_off(i) + m];
    for (int i = 0; i < n_servers; ++i)
        for (int e = 0; e < lay.n_eps; ++e) st.players.eps[i][e] = flat[lay.eps_off(i) + e];
    for (int a = 0; a < lay.n_alpha; ++a) st.players.alpha[a] = flat[lay.alpha_off() + a];
    std::size_t h = lay.hyper_off();
    st.hyp.beta_mean.resize(lay.n_free);
    st.hyp.tau2.resize(lay.n_free);
    for (int m = 0; m < lay.n_free; ++m) st.hyp.beta_mean[m] = flat[h++];
    for (int m = 0; m < lay.n_free; ++m) st.hyp.tau2[m] = flat[h++];
    st.hyp.beta0 = flat[h++];
    st.hyp.sigma2_beta0 = flat[h++];
    st.hyp.r_tau = flat[h++];
    st.hyp.s_tau = flat[h++];
    st.hyp.r_eps = flat[h++];
    st.hyp.s_eps = flat[h++];
    st.hyp.alpha0 = flat[h++];
    st.hyp.sigma2_alpha = flat[h++];
    return st;
}

ParamState PosteriorDraws::state_at(std::size_t draw) const {
    return unflatten_state(model, n_servers, n_players,
                           std::span<const double>(states.data() + draw * n_params(), n_params()));
}

std::size_t PosteriorDraws::beta_offset(int server) const {
    return Layout(model, n_servers, n_players).beta_off(server);
}
std::size_t PosteriorDraws::eps_offset(int server) const {
    return Layout(model, n_servers, n_players).eps_off(server);
}
std::size_t PosteriorDraws::alpha_offset() const {
    return Layout(model, n_servers, n_players).alpha_off();
}
std::size_t PosteriorDraws::hyper_offset() const {
    return Layout(model, n_servers, n_players).hyper_off();
}

std::vector<CellObs> build_cells(const ModelConfig& config, const Dataset& ds) {
    // Key: (server, receiver, bucket, court-if-modeled). Cell order follows
    // the sorted key order, which fixes the scoring order of cell_logits.
    std::map<std::tuple<int, int, int, int>, std::pair<int, int>> grouped;
    for (const auto& p : ds.points) {
        const int court_key = config.court_effect ? static_cast<int>(p.court) : 0;
        auto& g = grouped[{p.server, p.receiver, p.x, court_key}];
        g.first += p.y;
        g.second += 1;
    }
    std::vector<CellObs> cells;
    cells.reserve(grouped.size());
    for (const auto& [key, wt] : grouped) {
        const auto [server, receiver, x, court_key] = key;
        CellObs c;
        c.server = server;
        c.x = static_cast<std::int16_t>(x);
        c.court = static_cast<std::int16_t>(court_key == 0 ? 3 : court_key);
        const int sp = ds.server_player[server];
        if (config.court_effect) {
            c.alpha_server = sp * 3 + (court_key - 1);
            c.alpha_receiver = receiver * 3 + (court_key - 1);
        } else {
            c.alpha_server = sp;
            c.alpha_receiver = receiver;
        }
        c.wins = wt.first;
        c.total = wt.second;
        cells.push_back(c);
    }
    return cells;
}

namespace {

ParamState draw_initial(const ModelConfig& config, int n_servers, int n_players, Rng& rng) {
    const Layout lay(config, n_servers, n_players);
    ParamState st;
    st.players.free_beta.assign(n_servers, std::vector<double>(lay.n_free));
    st.players.eps.assign(n_servers, std::vector<double>(lay.n_eps));
    for (int i = 0; i < n_servers; ++i) {
        for (int m = 0; m < lay.n_free; ++m) st.players.free_beta[i][m] = rng.normal(0.0, 0.5);
        for (int e = 0; e < lay.n_eps; ++e) st.players.eps[i][e] = rng.gamma(1.0, 1.0);
    }
    st.players.alpha.assign(lay.n_alpha, 0.0);
    if (lay.n_alpha >= 2) apply_sum_to_zero(st.players.alpha);
    st.hyp.beta_mean.assign(lay.n_free, 0.0);
    st.hyp.tau2.assign(lay.n_free, 5.0);
    st.hyp.beta0 = 0.0;
    st.hyp.sigma2_beta0 = 1.0;
    st.hyp.r_tau = 5.0;
    st.hyp.s_tau = 5.0;
    st.hyp.r_eps = 1.0;
    st.hyp.s_eps = 1.0;
    st.hyp.alpha0 = 0.0;
    st.hyp.sigma2_alpha = 1.0;
    return st;
}

}  // namespace

ParamState init_state(const ModelConfig& config, const Dataset& ds, std::uint64_t seed) {
    Rng rng(seed);
    for (int attempt = 0; attempt < 100; ++attempt) {
        ParamState st = draw_initial(config, ds.n_servers(), ds.n_players(), rng);
        const double lp = log_prior(config, st, ds.n_servers(), ds.n_players());
        if (!std::isfinite(lp)) continue;
        const double ll = log_likelihood(config, ds, st.players).total;
        if (std::isfinite(lp + ll)) return st;
    }
    throw SamplerInitError("no finite starting point found in 100 attempts");
}

std::vector<double> cell_logits_for(const ModelConfig& config, const std::vector<CellObs>& cells,
                                    int n_servers, const ParamState& state) {
    std::vector<std::vector<double>> coeffs(n_servers);
    for (int i = 0; i < n_servers; ++i)
        coeffs[i] = reconstruct_coeffs(state.players.free_beta[i], state.players.eps[i]);
    std::vector<double> logits(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const CellObs& cell = cells[c];
        logits[c] = spline_eval(config.spec, coeffs[cell.server], cell.x) +
                    state.players.alpha[cell.alpha_server] - state.players.alpha[cell.alpha_receiver];
    }
    return logits;
}

double total_loglik(const std::vector<CellObs>& cells, std::span<const double> logits) {
    double acc = 0.0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        double lsp, lsn;
        log_sigmoid_pair(logits[c], lsp, lsn);
        acc += cells[c].wins * lsp + (cells[c].total - cells[c].wins) * lsn;
    }
    return acc;
}

namespace {

// Single-chain Metropolis-within-Gibbs runner. Holds the mutable state and
// exact caches (per-server coefficient vectors and bucket curves); caches
// are rebuilt from the state on every acceptance, never updated in place.
class ChainRunner {
public:
    ChainRunner(const ModelConfig& model, const Dataset& ds, const std::vector<CellObs>& cells,
                const ChainConfig& cfg, std::uint64_t seed)
        : model_(model),
          lay_(model, ds.n_servers(), ds.n_players()),
          cells_(cells),
          cfg_(cfg),
          rng_(seed) {
        const auto& spec = model_.spec;
        for (const auto& c : cells_) {
            if (c.x < spec.lower || c.x > spec.upper)
                throw SamplerInitError("observed bucket outside the spline domain");
        }

        // Basis rows for the 15 possible buckets; rows outside the domain
        // stay zero and are never referenced by a cell.
        basis_.assign(static_cast<std::size_t>(spec.basis_dim) * kMaxBucket, 0.0);
        for (int x = 1; x <= kMaxBucket; ++x) {
            if (x < spec.lower || x > spec.upper) continue;
            const auto row = basis_all(spec, x);
            for (int m = 0; m < spec.basis_dim; ++m) basis_[m * kMaxBucket + (x - 1)] = row[m];
        }

        // Curve change per unit change of each updated coordinate: a free
        // coefficient moves its own column, the last free one drags the
        // whole constrained tail, and a decrement shifts a column suffix.
        const int nf = lay_.n_free;
        const int ne = lay_.n_eps;
        const int M = spec.basis_dim;
        suffix_.assign(static_cast<std::size_t>(M) * kMaxBucket, 0.0);
        for (int m = M - 1; m >= 0; --m) {
            for (int x = 0; x < kMaxBucket; ++x) {
                suffix_[m * kMaxBucket + x] =
                    basis_[m * kMaxBucket + x] + (m + 1 < M ? suffix_[(m + 1) * kMaxBucket + x] : 0.0);
            }
        }
        beta_effect_.assign(static_cast<std::size_t>(nf) * kMaxBucket, 0.0);
        for (int m = 0; m < nf; ++m) {
            const bool drags_tail = (m == nf - 1 && ne > 0);
            for (int x = 0; x < kMaxBucket; ++x) {
                beta_effect_[m * kMaxBucket + x] =
                    drags_tail ? suffix_[m * kMaxBucket + x] : basis_[m * kMaxBucket + x];
            }
        }

        cells_of_server_.assign(lay_.n_servers, {});
        touch_.assign(std::max(lay_.n_alpha, 1), {});
        for (std::size_t id = 0; id < cells_.size(); ++id) {
            cells_of_server_[cells_[id].server].push_back(static_cast<std::int32_t>(id));
            if (lay_.n_alpha > 0) {
                touch_[cells_[id].alpha_server].push_back(static_cast<std::int32_t>(id));
                touch_[cells_[id].alpha_receiver].push_back(static_cast<std::int32_t>(id));
            }
        }

        const int n_free_alpha = std::max(lay_.n_alpha - 1, 0);
        tuners_beta_.assign(static_cast<std::size_t>(lay_.n_servers) * nf, StepTuner{std::log(0.3), 0});
        tuners_eps_.assign(static_cast<std::size_t>(lay_.n_servers) * ne, StepTuner{std::log(0.5), 0});
        tuners_alpha_.assign(n_free_alpha, StepTuner{std::log(0.3), 0});
        tuners_rs_.assign(4, StepTuner{std::log(0.8), 0});
        tuner_rs_joint_ = StepTuner{std::log(1.0), 0};

        state_ = draw_initial_valid(seed);
        rebuild_all_curves();
    }

    void run(PosteriorDraws& sink, std::int64_t first_draw, AcceptanceReport& accept) {
        const std::int64_t adapt_end =
            cfg_.adapt_window > 0 ? std::min(cfg_.adapt_window, cfg_.burn_in) : cfg_.burn_in;
        std::int64_t stored = 0;
        for (std::int64_t sweep = 1; sweep <= cfg_.n_iter; ++sweep) {
            adapting_ = sweep <= adapt_end;
            counting_ = sweep > cfg_.burn_in;
            run_sweep();
            if (sweep > cfg_.burn_in && (sweep - cfg_.burn_in) % cfg_.thin == 0) {
                store_draw(sink, first_draw + stored);
                ++stored;
            }
        }
        accept = accept_;
    }

private:
    ParamState draw_initial_valid(std::uint64_t seed) {
        (void)seed;  // rng_ already carries the stream
        for (int attempt = 0; attempt < 100; ++attempt) {
            ParamState st = draw_initial(model_, lay_.n_servers, lay_.n_players, rng_);
            if (std::isfinite(log_prior(model_, st, lay_.n_servers, lay_.n_players))) return st;
        }
        throw SamplerInitError("no finite starting point found in 100 attempts");
    }

    void rebuild_curve(int i) {
        coeffs_[i] = reconstruct_coeffs(state_.players.free_beta[i], state_.players.eps[i]);
        double* curve = curves_.data() + static_cast<std::size_t>(i) * kMaxBucket;
        const int M = model_.spec.basis_dim;
        for (int x = 0; x < kMaxBucket; ++x) {
            double acc = 0.0;
            for (int m = 0; m < M; ++m) acc += coeffs_[i][m] * basis_[m * kMaxBucket + x];
            curve[x] = acc;
        }
    }

    void rebuild_all_curves() {
        coeffs_.assign(lay_.n_servers, {});
        curves_.assign(static_cast<std::size_t>(lay_.n_servers) * kMaxBucket, 0.0);
        for (int i = 0; i < lay_.n_servers; ++i) rebuild_curve(i);
    }

    double cell_logit(const CellObs& c) const {
        return curves_[static_cast<std::size_t>(c.server) * kMaxBucket + (c.x - 1)] +
               state_.players.alpha[c.alpha_server] - state_.players.alpha[c.alpha_receiver];
    }

    // Log-likelihood change for server i when its bucket curve moves by
    // delta * effect[x].
    double delta_ll_curve(int i, double delta, const double* effect) const {
        double acc = 0.0;
        for (std::int32_t id : cells_of_server_[i]) {
            const CellObs& c = cells_[id];
            const double z = cell_logit(c);
            const double zn = z + delta * effect[c.x - 1];
            double lsp_old, lsn_old, lsp_new, lsn_new;
            log_sigmoid_pair(z, lsp_old, lsn_old);
            log_sigmoid_pair(zn, lsp_new, lsn_new);
            acc += c.wins * (lsp_new - lsp_old) + (c.total - c.wins) * (lsn_new - lsn_old);
        }
        return acc;
    }

    bool mh_accept(double log_ratio, StepTuner& tuner) {
        double acc_prob = log_ratio >= 0.0 ? 1.0 : std::exp(log_ratio);
        if (!(acc_prob >= 0.0)) acc_prob = 0.0;  // a NaN ratio must not poison the tuner
        bool accepted;
        if (log_ratio >= 0.0) {
            accepted = true;
            rng_.uniform();  // keep the stream length independent of the ratio
        } else {
            accepted = std::log(rng_.uniform() + 1e-300) < log_ratio;
        }
        if (adapting_) tuner.adapt(acc_prob, cfg_.target_accept);
        return accepted;
    }

    void count(const char* block, bool accepted) {
        if (!counting_) return;
        auto& st = accept_.blocks[block];
        st.proposed += 1;
        st.accepted += accepted ? 1 : 0;
    }

    void mh_beta(int i, int m) {
        StepTuner& tu = tuners_beta_[static_cast<std::size_t>(i) * lay_.n_free + m];
        double& v = state_.players.free_beta[i][m];
        const double vp = v + tu.step() * rng_.normal();
        const double mu = state_.hyp.beta_mean[m];
        const double tau = state_.hyp.tau2[m];
        const double dprior = -0.5 * tau * ((vp - mu) * (vp - mu) - (v - mu) * (v - mu));
        const double dll = delta_ll_curve(i, vp - v, beta_effect_.data() + static_cast<std::size_t>(m) * kMaxBucket);
        const bool ok = mh_accept(dll + dprior, tu);
        count("beta", ok);
        if (ok) {
            v = vp;
            rebuild_curve(i);
        }
    }

    void mh_eps(int i, int e) {
        StepTuner& tu = tuners_eps_[static_cast<std::size_t>(i) * lay_.n_eps + e];
        double& v = state_.players.eps[i][e];
        const double w = std::log(v);
        const double wp = w + tu.step() * rng_.normal();
        const double vp = std::exp(wp);
        if (!(vp > 0.0 && std::isfinite(vp))) {
            // exp saturated; the decrement must stay strictly positive
            if (adapting_) tu.adapt(0.0, cfg_.target_accept);
            count("eps", false);
            return;
        }
        // Gamma prior on the decrement plus the log-scale Jacobian.
        const double dprior = eps_shape_ * (wp - w) - eps_rate_ * (vp - v);
        const int col = lay_.n_free + e;
        const double dll =
            delta_ll_curve(i, -(vp - v), suffix_.data() + static_cast<std::size_t>(col) * kMaxBucket);
        const bool ok = mh_accept(dll + dprior, tu);
        count("eps", ok);
        if (ok) {
            v = vp;
            rebuild_curve(i);
        }
    }

    void mh_alpha(int a) {
        const int last = lay_.n_alpha - 1;
        StepTuner& tu = tuners_alpha_[a];
        double& v = state_.players.alpha[a];
        const double vp = v + tu.step() * rng_.normal();
        const double delta = vp - v;
        const double a0 = state_.hyp.alpha0;
        const double dprior =
            -0.5 / state_.hyp.sigma2_alpha * ((vp - a0) * (vp - a0) - (v - a0) * (v - a0));

        // The paired move: alpha[a] += delta, derived alpha[last] -= delta.
        // Walk the union of both players' cells, each cell once.
        double dll = 0.0;
        const auto& la = touch_[a];
        const auto& lb = touch_[last];
        std::size_t ia = 0, ib = 0;
        while (ia < la.size() || ib < lb.size()) {
            std::int32_t id;
            if (ib >= lb.size() || (ia < la.size() && la[ia] <= lb[ib])) {
                id = la[ia];
                if (ib < lb.size() && lb[ib] == id) ++ib;
                ++ia;
            } else {
                id = lb[ib];
                ++ib;
            }
            const CellObs& c = cells_[id];
            const int sign = (c.alpha_server == a) - (c.alpha_receiver == a) -
                             (c.alpha_server == last) + (c.alpha_receiver == last);
            if (sign == 0) continue;
            const double z = cell_logit(c);
            const double zn = z + delta * sign;
            double lsp_old, lsn_old, lsp_new, lsn_new;
            log_sigmoid_pair(z, lsp_old, lsn_old);
            log_sigmoid_pair(zn, lsp_new, lsn_new);
            dll += c.wins * (lsp_new - lsp_old) + (c.total - c.wins) * (lsn_new - lsn_old);
        }

        const bool ok = mh_accept(dll + dprior, tu);
        count("alpha", ok);
        if (ok) {
            v = vp;
            state_.players.alpha[last] -= delta;
        }
    }

    double rs_loglik_tau(double r, double s) const {
        const auto [shape, rate] = gamma_mean_var(r, s);
        double acc = lay_.n_free * (shape * std::log(rate) - std::lgamma(shape));
        for (double t : state_.hyp.tau2) acc += (shape - 1.0) * std::log(t) - rate * t;
        return acc;
    }

    double rs_loglik_eps(double r, double s) const {
        const auto [shape, rate] = gamma_mean_var(r, s);
        const double n = static_cast<double>(lay_.n_servers) * lay_.n_eps;
        return n * (shape * std::log(rate) - std::lgamma(shape)) + (shape - 1.0) * sum_log_eps_ -
               rate * sum_eps_;
    }

    // Random-walk on log(x / (10 - x)); the prior is uniform so only the
    // Gamma likelihood of the governed parameters and the Jacobian remain.
    void mh_rs(int which) {
        double* slot[4] = {&state_.hyp.r_tau, &state_.hyp.s_tau, &state_.hyp.r_eps, &state_.hyp.s_eps};
        static const char* names[4] = {"r_tau", "s_tau", "r_eps", "s_eps"};
        const bool is_eps = which >= 2;

        if (is_eps && static_cast<double>(lay_.n_servers) * lay_.n_eps == 0) {
            // No decrements anywhere: the full conditional is the uniform prior.
            *slot[which] = rng_.uniform(0.0, 10.0);
            return;
        }

        StepTuner& tu = tuners_rs_[which];
        const double x = *slot[which];
        const double u = std::log(x / (10.0 - x));
        const double up = u + tu.step() * rng_.normal();
        const double xp = 10.0 / (1.0 + std::exp(-up));
        if (!(xp > 0.0 && xp < 10.0)) {
            // The logistic map saturated in floating point; the target mass
            // out there is far below representable, so treat as a rejection.
            if (adapting_) tu.adapt(0.0, cfg_.target_accept);
            count(names[which], false);
            return;
        }

        double r = is_eps ? state_.hyp.r_eps : state_.hyp.r_tau;
        double s = is_eps ? state_.hyp.s_eps : state_.hyp.s_tau;
        double rp = r, sp = s;
        (which % 2 == 0 ? rp : sp) = xp;
        const double lik_old = is_eps ? rs_loglik_eps(r, s) : rs_loglik_tau(r, s);
        const double lik_new = is_eps ? rs_loglik_eps(rp, sp) : rs_loglik_tau(rp, sp);
        const double jac = std::log(xp) + std::log(10.0 - xp) - std::log(x) - std::log(10.0 - x);
        const bool ok = mh_accept(lik_new - lik_old + jac, tu);
        count(names[which], ok);
        if (ok) {
            *slot[which] = xp;
            if (is_eps) {
                const auto [shape, rate] = gamma_mean_var(state_.hyp.r_eps, state_.hyp.s_eps);
                eps_shape_ = shape;
                eps_rate_ = rate;
            }
        }
    }

    // Joint move on (r_tau, s_tau, tau2): proposing the precisions from
    // their Gamma prior under the proposed pair cancels those terms in the
    // ratio, leaving only the coefficient likelihood and the transform
    // Jacobians. A coordinate-at-a-time walk mixes this block very slowly
    // because the pair and the precisions pin each other down — with only a
    // handful of precision components the pair can also drift into a
    // near-degenerate corner (tiny variance, precisions glued to the mean)
    // that takes a long time to leave. The grouped proposal steps out of
    // that corner in one accepted move.
    void mh_rs_tau_joint() {
        StepTuner& tu = tuner_rs_joint_;
        auto& h = state_.hyp;
        const double ur = std::log(h.r_tau / (10.0 - h.r_tau));
        const double us = std::log(h.s_tau / (10.0 - h.s_tau));
        const double urp = ur + tu.step() * rng_.normal();
        const double usp = us + tu.step() * rng_.normal();
        const double rp = 10.0 / (1.0 + std::exp(-urp));
        const double sp = 10.0 / (1.0 + std::exp(-usp));
        if (!(rp > 0.0 && rp < 10.0 && sp > 0.0 && sp < 10.0)) {
            if (adapting_) tu.adapt(0.0, cfg_.target_accept);
            count("rs_tau_joint", false);
            return;
        }

        const auto [shape, rate] = gamma_mean_var(rp, sp);
        if (!(std::isfinite(shape) && shape > 0.0 && std::isfinite(rate) && rate > 0.0)) {
            if (adapting_) tu.adapt(0.0, cfg_.target_accept);
            count("rs_tau_joint", false);
            return;
        }
        std::vector<double> tau2p(lay_.n_free);
        for (double& t : tau2p) {
            const double draw = rng_.gamma(shape, rate);
            t = draw > kMinPrecision ? draw : kMinPrecision;
        }

        double d = std::log(rp) + std::log(10.0 - rp) - std::log(h.r_tau) -
                   std::log(10.0 - h.r_tau) + std::log(sp) + std::log(10.0 - sp) -
                   std::log(h.s_tau) - std::log(10.0 - h.s_tau);
        for (int m = 0; m < lay_.n_free; ++m) {
            double sse = 0.0;
            for (int i = 0; i < lay_.n_servers; ++i) {
                const double dv = state_.players.free_beta[i][m] - h.beta_mean[m];
                sse += dv * dv;
            }
            d += 0.5 * lay_.n_servers * (std::log(tau2p[m]) - std::log(h.tau2[m])) -
                 0.5 * (tau2p[m] - h.tau2[m]) * sse;
        }
        const bool ok = mh_accept(d, tu);
        count("rs_tau_joint", ok);
        if (ok) {
            h.r_tau = rp;
            h.s_tau = sp;
            h.tau2 = tau2p;
        }
    }

    void update_conjugate_hypers() {
        auto& h = state_.hyp;
        const int nf = lay_.n_free;
        const double n_s = lay_.n_servers;

        for (int m = 0; m < nf; ++m) {
            double sum = 0.0;
            for (int i = 0; i < lay_.n_servers; ++i) sum += state_.players.free_beta[i][m];
            const auto [mean, prec] =
                detail::normal_posterior(h.beta0, 1.0 / h.sigma2_beta0, h.tau2[m], n_s, sum);
            h.beta_mean[m] = rng_.normal(mean, std::sqrt(1.0 / prec));
        }
        {
            const auto [a0, b0] = gamma_mean_var(h.r_tau, h.s_tau);
            for (int m = 0; m < nf; ++m) {
                double sumsq = 0.0;
                for (int i = 0; i < lay_.n_servers; ++i) {
                    const double d = state_.players.free_beta[i][m] - h.beta_mean[m];
                    sumsq += d * d;
                }
                const auto [a, b] = detail::gamma_posterior(a0, b0, n_s, sumsq);
                const double draw = rng_.gamma(a, b);
                h.tau2[m] = draw > kMinPrecision ? draw : kMinPrecision;
            }
        }
        {
            double sum = 0.0;
            for (int m = 0; m < nf; ++m) sum += h.beta_mean[m];
            const auto [mean, prec] =
                detail::normal_posterior(0.0, 0.01, 1.0 / h.sigma2_beta0, nf, sum);
            h.beta0 = rng_.normal(mean, std::sqrt(1.0 / prec));
        }
        {
            double sumsq = 0.0;
            for (int m = 0; m < nf; ++m) {
                const double d = h.beta_mean[m] - h.beta0;
                sumsq += d * d;
            }
            const auto [a, b] = detail::gamma_posterior(0.1, 0.1, nf, sumsq);
            h.sigma2_beta0 = 1.0 / rng_.gamma(a, b);
        }

        const int n_free_alpha = std::max(lay_.n_alpha - 1, 0);
        {
            double sum = 0.0;
            for (int a = 0; a < n_free_alpha; ++a) sum += state_.players.alpha[a];
            const auto [mean, prec] =
                detail::normal_posterior(0.0, 0.01, 1.0 / h.sigma2_alpha, n_free_alpha, sum);
            h.alpha0 = rng_.normal(mean, std::sqrt(1.0 / prec));
        }
        {
            double sumsq = 0.0;
            for (int a = 0; a < n_free_alpha; ++a) {
                const double d = state_.players.alpha[a] - h.alpha0;
                sumsq += d * d;
            }
            const auto [a, b] = detail::gamma_posterior(0.1, 0.1, n_free_alpha, sumsq);
            h.sigma2_alpha = 1.0 / rng_.gamma(a, b);
        }
    }

    void run_sweep() {
        // Exact prior sums for the decrement hyperparameter likelihood.
        sum_eps_ = 0.0;
        sum_log_eps_ = 0.0;
        for (int i = 0; i < lay_.n_servers; ++i) {
            for (double e : state_.players.eps[i]) {
                sum_eps_ += e;
                sum_log_eps_ += std::log(e);
            }
        }
        update_conjugate_hypers();
        {
            const auto [shape, rate] = gamma_mean_var(state_.hyp.r_eps, state_.hyp.s_eps);
            eps_shape_ = shape;
            eps_rate_ = rate;
        }

        for (int i = 0; i < lay_.n_servers; ++i)
            for (int m = 0; m < lay_.n_free; ++m) mh_beta(i, m);
        for (int i = 0; i < lay_.n_servers; ++i)
            for (int e = 0; e < lay_.n_eps; ++e) mh_eps(i, e);
        if (lay_.n_alpha >= 2) {
            for (int a = 0; a < lay_.n_alpha - 1; ++a) mh_alpha(a);
            apply_sum_to_zero(state_.players.alpha);
        }
        for (int which = 0; which < 4; ++which) mh_rs(which);
        mh_rs_tau_joint();
    }

    void store_draw(PosteriorDraws& sink, std::int64_t draw) {
        const auto flat = flatten_state(model_, lay_.n_servers, lay_.n_players, state_);
        std::copy(flat.begin(), flat.end(), sink.states.begin() + draw * static_cast<std::int64_t>(flat.size()));
        double total = 0.0;
        double* out = sink.cell_logits.data() + draw * static_cast<std::int64_t>(cells_.size());
        for (std::size_t c = 0; c < cells_.size(); ++c) {
            const double z = cell_logit(cells_[c]);
            out[c] = z;
            double lsp, lsn;
            log_sigmoid_pair(z, lsp, lsn);
            total += cells_[c].wins * lsp + (cells_[c].total - cells_[c].wins) * lsn;
        }
        sink.loglik_total[draw] = total;
    }

    const ModelConfig& model_;
    Layout lay_;
    const std::vector<CellObs>& cells_;
    ChainConfig cfg_;
    Rng rng_;
    ParamState state_;

    std::vector<double> basis_;        // [m][bucket]
    std::vector<double> suffix_;       // suffix column sums of basis_
    std::vector<double> beta_effect_;  // [free m][bucket]
    std::vector<std::vector<double>> coeffs_;
    std::vector<double> curves_;  // [server][bucket]
    std::vector<std::vector<std::int32_t>> cells_of_server_;
    std::vector<std::vector<std::int32_t>> touch_;  // alpha entry -> cell ids

    std::vector<StepTuner> tuners_beta_, tuners_eps_, tuners_alpha_, tuners_rs_;
    StepTuner tuner_rs_joint_;
    AcceptanceReport accept_;
    bool adapting_ = false;
    bool counting_ = false;
    double eps_shape_ = 1.0, eps_rate_ = 1.0;
    double sum_eps_ = 0.0, sum_log_eps_ = 0.0;
};

}  // namespace

PosteriorDraws run_chain(const ChainConfig& chain, const Dataset& ds, const ModelConfig& model) {
    if (chain.thin <= 0) throw std::invalid_argument("thinning interval must be positive");
    if (chain.burn_in < 0) throw std::invalid_argument("burn-in must be non-negative");
    if (chain.burn_in >= chain.n_iter)
        throw std::invalid_argument("burn-in must be below the iteration count");
    if (chain.n_chains < 1) throw std::invalid_argument("at least one chain required");
    if (!(chain.target_accept > 0.0 && chain.target_accept < 1.0))
        throw std::invalid_argument("target acceptance must lie in (0, 1)");
    const std::int64_t kept = draws_per_chain(chain);
    if (kept < 1) throw std::invalid_argument("settings keep no draws");

    PosteriorDraws out;
    out.model = model;
    out.chain = chain;
    out.kept_per_chain = kept;
    out.n_servers = ds.n_servers();
    out.n_players = ds.n_players();
    out.server_names = ds.server_names;
    out.player_names = ds.player_names;
    out.server_player.assign(ds.server_player.begin(), ds.server_player.end());
    out.param_names = param_names(model, ds);
    out.cells = build_cells(model, ds);

    const std::int64_t total_draws = kept * chain.n_chains;
    out.states.assign(static_cast<std::size_t>(total_draws) * out.param_names.size(), 0.0);
    out.loglik_total.assign(total_draws, 0.0);
    out.cell_logits.assign(static_cast<std::size_t>(total_draws) * out.cells.size(), 0.0);

    std::vector<AcceptanceReport> reports(chain.n_chains);
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(chain.n_chains);
    for (int c = 0; c < chain.n_chains; ++c) {
        workers.emplace_back([&, c] {
            try {
                ChainRunner runner(model, ds, out.cells, chain, chain.seed + static_cast<std::uint64_t>(c));
                runner.run(out, static_cast<std::int64_t>(c) * kept, reports[c]);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    for (const auto& rep : reports) {
        for (const auto& [name, st] : rep.blocks) {
            auto& agg = out.acceptance.blocks[name];
            agg.proposed += st.proposed;
            agg.accepted += st.accepted;
        }
    }
    return out;
}

}  // namespace serveadv
