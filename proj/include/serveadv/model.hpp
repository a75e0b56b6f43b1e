#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "serveadv/data.hpp"
#include "serveadv/splines.hpp"

namespace serveadv {

/// Constraint variants. Unconstrained keeps every coefficient free; Partial
/// frees the head of the coefficient vector and forces a non-increasing
/// tail from first_constrained_index(spec) on (so the curve decays from
/// mono_from); Full forces the whole vector non-increasing.
enum class Variant { Unconstrained, Partial, Full };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// Model shape: the spline setup, the constraint variant, and whether rally
/// abilities are court specific (one ability per surface per player).
struct ModelConfig {
    SplineSpec spec;
    Variant variant = Variant::Partial;
    bool court_effect = false;

    /// Number of freely varying leading coefficients.
    int n_free() const;
    /// Number of positive decrements building the constrained tail.
    int n_eps() const { return spec.basis_dim - n_free(); }
    /// Rally-ability entries per player (1, or one per surface).
    int alpha_per_player() const { return court_effect ? 3 : 1; }
};

/// Per-player parameters: each server's free coefficients and decrements,
/// plus one rally ability per player (times three under court effects).
/// The final alpha entry is derived from the sum-to-zero constraint.
struct PlayerParams {
    std::vector<std::vector<double>> free_beta;  // [server][n_free]
    std::vector<std::vector<double>> eps;        // [server][n_eps], all > 0
    std::vector<double> alpha;                   // [player * alpha_per_player]
};

/// Population-level parameters. tau2 are precisions of the per-server
/// coefficient distributions; (r, s) pairs are mean and variance of the
/// Gamma laws for those precisions and for the decrements.
struct HyperParams {
    std::vector<double> beta_mean;  // [n_free]
    std::vector<double> tau2;       // [n_free], > 0
    double beta0 = 0.0;
    double sigma2_beta0 = 1.0;
    double r_tau = 5.0, s_tau = 5.0;
    double r_eps = 5.0, s_eps = 5.0;
    double alpha0 = 0.0;
    double sigma2_alpha = 1.0;
};

struct ParamState {
    PlayerParams players;
    HyperParams hyp;
};

/// Gamma distribution with the given mean and variance, returned as
/// (shape, rate). Throws std::invalid_argument unless both are positive.
std::pair<double, double> gamma_mean_var(double mean, double variance);

/// Full coefficient vector from the free head and the positive decrements:
/// coeffs[m] = coeffs[m-1] - eps[m - n_free] for the constrained tail.
/// Throws std::invalid_argument on a non-positive decrement.
std::vector<double> reconstruct_coeffs(std::span<const double> free_beta,
                                       std::span<const double> eps);

/// Overwrites the last entry with minus the sum of the others. Requires at
/// least two entries.
void apply_sum_to_zero(std::vector<double>& alphas);

/// log p / (1 - p) for a serve point: curve value at the bucket plus the
/// server-minus-receiver rally ability gap.
double logit_p(const SplineSpec& spec, std::span<const double> server_coeffs,
               double server_alpha, double receiver_alpha, double x);

/// Rally ability of a player on a court under the given layout.
double alpha_at(const ModelConfig& config, std::span<const double> alpha, int player, Court court);

/// Index of the derived (sum-to-zero) alpha entry: the last one.
int derived_alpha_index(const ModelConfig& config, int n_players);

/// log(1 + exp(x)) without overflow.
double softplus(double x);
/// log sigma(x) = -softplus(-x).
double log_sigmoid(double x);

struct LogLikResult {
    double total = 0.0;
    std::vector<double> per_obs;  // one entry per dataset point, same order
};

/// Bernoulli log-likelihood of the dataset under the given parameters.
/// Reference implementation an observation at a time; the sampler uses a
/// grouped fast path that must agree with this one.
LogLikResult log_likelihood(const ModelConfig& config, const Dataset& ds, const PlayerParams& p);

/// Joint log prior density over all free coordinates (derived alpha entries
/// excluded). Minus infinity outside the support: non-positive decrements,
/// precisions, or variances, or (r, s) outside (0, 10).
double log_prior(const ModelConfig& config, const ParamState& state, int n_servers, int n_players);

/// Flat JSON round-trip of a parameter state; doubles survive exactly.
std::string state_to_json(const ModelConfig& config, const ParamState& state);
ParamState state_from_json(const ModelConfig& config, const std::string& text);

}  // namespace serveadv
