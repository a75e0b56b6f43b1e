#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "serveadv/data.hpp"
#include "serveadv/model.hpp"

namespace serveadv {

/// Chain settings. adapt_window 0 means proposal step sizes adapt through
/// the whole burn-in; adaptation never runs past burn-in, so the kept part
/// of every chain comes from a fixed transition kernel.
struct ChainConfig {
    std::int64_t n_iter = 20000;
    std::int64_t burn_in = 1000;
    std::int64_t thin = 20;
    int n_chains = 1;
    std::uint64_t seed = 1;
    std::int64_t adapt_window = 0;
    double target_accept = 0.44;
};

/// Kept draws per chain under these settings.
std::int64_t draws_per_chain(const ChainConfig& config);

struct BlockStat {
    std::int64_t proposed = 0;
    std::int64_t accepted = 0;
    double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed); }
};

/// Post-burn-in Metropolis acceptance counts by block type.
struct AcceptanceReport {
    std::map<std::string, BlockStat> blocks;
};

/// One observation group: all points sharing server, receiver, bucket and
/// (under court effects) court have identical success probability, so they
/// carry a single logit. wins + losses = group size.
struct CellObs {
    std::int32_t server = 0;        // server-space index
    std::int32_t alpha_server = 0;  // index into the alpha vector
    std::int32_t alpha_receiver = 0;
    std::int16_t x = 0;
    std::int16_t court = 0;  // 1..3
    std::int32_t wins = 0;
    std::int32_t total = 0;
};

/// Thinned posterior sample plus everything needed to score it: flattened
/// parameter states, per-draw total log-likelihood, and per-draw logits for
/// every observation cell. cells/cell_logits are empty on draws read back
/// from disk (fit-time metrics are already in the fit report by then).
struct PosteriorDraws {
    ModelConfig model;
    ChainConfig chain;
    std::int64_t kept_per_chain = 0;
    int n_servers = 0;
    int n_players = 0;
    std::vector<std::string> server_names;
    std::vector<std::string> player_names;
    std::vector<int> server_player;  // server-space -> player-space index
    std::vector<std::string> param_names;
    std::vector<double> states;        // row-major [draw][param], chains concatenated
    std::vector<double> loglik_total;  // [draw]
    std::vector<CellObs> cells;
    std::vector<double> cell_logits;  // row-major [draw][cell]
    AcceptanceReport acceptance;

    std::size_t n_draws() const { return param_names.empty() ? 0 : states.size() / param_names.size(); }
    std::size_t n_params() const { return param_names.size(); }
    double value(std::size_t draw, std::size_t param) const { return states[draw * n_params() + param]; }

    /// Decoded parameter state of one draw.
    ParamState state_at(std::size_t draw) const;

    // Offsets into a flattened state vector.
    std::size_t beta_offset(int server) const;
    std::size_t eps_offset(int server) const;
    std::size_t alpha_offset() const;
    std::size_t hyper_offset() const;
};

/// Flattened layout used by PosteriorDraws: per-server free coefficients,
/// per-server decrements, the alpha vector (derived entry included), then
/// beta_mean, tau2, beta0, sigma2_beta0, r_tau, s_tau, r_eps, s_eps,
/// alpha0, sigma2_alpha.
std::vector<std::string> param_names(const ModelConfig& config, const Dataset& ds);
std::vector<double> flatten_state(const ModelConfig& config, int n_servers, int n_players,
                                  const ParamState& state);
ParamState unflatten_state(const ModelConfig& config, int n_servers, int n_players,
                           std::span<const double> flat);

/// Spread starting point: free coefficients from N(0, 0.5^2), decrements
/// from a unit-mean Gamma, abilities at zero, population parameters at
/// their prior means. Throws SamplerInitError if no finite-posterior start
/// is found in 100 attempts.
ParamState init_state(const ModelConfig& config, const Dataset& ds, std::uint64_t seed);

/// Runs n_chains Metropolis-within-Gibbs chains (chain c seeded seed + c)
/// and returns the merged thinned draws. Fully deterministic given
/// (config, dataset, seed). Throws std::invalid_argument on bad settings
/// and SamplerInitError when observations fall outside the spline domain.
PosteriorDraws run_chain(const ChainConfig& chain, const Dataset& ds, const ModelConfig& model);

/// Observation cells for a dataset under a model (court folded into the
/// cell key only when the model has court effects). Cell order is the
/// canonical scoring order used by cell_logits.
std::vector<CellObs> build_cells(const ModelConfig& config, const Dataset& ds);

/// Logit of every cell under one parameter state, in cell order.
std::vector<double> cell_logits_for(const ModelConfig& config, const std::vector<CellObs>& cells,
                                    int n_servers, const ParamState& state);

/// Binomial log-likelihood of the cells at the given logits.
double total_loglik(const std::vector<CellObs>& cells, std::span<const double> logits);

namespace detail {

/// Posterior of a Normal mean: prior N(m0, 1/p0), n observations of
/// precision tau summing to S. Returns (mean, precision).
std::pair<double, double> normal_posterior(double m0, double p0, double tau, double n, double sum);

/// Posterior of a precision with Gamma(shape0, rate0) prior after n Normal
/// observations with squared deviations summing to sumsq.
std::pair<double, double> gamma_posterior(double shape0, double rate0, double n, double sumsq);

}  // namespace detail

}  // namespace serveadv
