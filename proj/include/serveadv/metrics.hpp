#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "serveadv/sampler.hpp"

namespace serveadv {

/// Per-observation log-likelihoods, row-major with one row per posterior
/// draw. Used directly for small fixtures; large datasets go through the
/// cell-based routines below, which never materialize this matrix.
struct LogLikMatrix {
    std::size_t n_draws = 0;
    std::size_t n_obs = 0;
    std::vector<double> values;  // [draw][obs]

    double at(std::size_t draw, std::size_t obs) const { return values[draw * n_obs + obs]; }
};

/// Sum over observations of the log conditional predictive ordinate,
/// log CPO_i = log S - logsumexp_d(-ll_id) for S draws.
double lpml(const LogLikMatrix& ll);

/// Widely applicable information criterion on the deviance scale:
/// -2 * sum_i (log mean_d exp(ll_id) - var_d(ll_id)), sample variance.
double waic(const LogLikMatrix& ll);

/// Deviance information criterion 2 * mean(D) - D(at posterior mean),
/// with D = -2 * log-likelihood.
double dic(std::span<const double> loglik_totals, double loglik_at_mean);

/// Cell-based equivalents: each cell holds `wins` identical success
/// observations and `total - wins` identical failures, so per-observation
/// terms are computed once per cell and side, then weighted.
double lpml_cells(const std::vector<CellObs>& cells, std::span<const double> cell_logits,
                  std::size_t n_draws);
double waic_cells(const std::vector<CellObs>& cells, std::span<const double> cell_logits,
                  std::size_t n_draws);

/// Per-draw total log-likelihood recomputed from stored cell logits.
std::vector<double> loglik_totals_cells(const std::vector<CellObs>& cells,
                                        std::span<const double> cell_logits, std::size_t n_draws);

/// Root mean squared error of posterior-mean predicted win counts against
/// observed win counts, over (server, bucket) groups.
double rmse_cells(const std::vector<CellObs>& cells, std::span<const double> cell_logits,
                  std::size_t n_draws);

/// Likelihood-parameter posterior mean: free coefficients and abilities
/// averaged directly, decrements averaged on the log scale. Hyperparameters
/// are averaged arithmetically (they do not enter the likelihood).
ParamState posterior_mean_state(const PosteriorDraws& draws);

/// Effective sample size of a scalar trace holding n_chains equal-length
/// chains back to back; per-chain values via Geyer's initial positive
/// sequence estimator, summed over chains.
double ess(std::span<const double> x, int n_chains);

/// Split potential scale reduction factor over the same layout. NaN when
/// the within-split variance is zero.
double split_rhat(std::span<const double> x, int n_chains);

struct Diagnostics {
    std::vector<double> ess;   // per parameter
    std::vector<double> rhat;  // per parameter
    double min_ess = 0.0;
    double max_rhat = 0.0;
};

/// Convergence diagnostics for every stored parameter.
Diagnostics diagnostics(const PosteriorDraws& draws);

struct MetricSet {
    double lpml = 0.0;
    double waic = 0.0;
    double dic = 0.0;
    double rmse = 0.0;
};

/// Everything the comparison and report stages need from one fitted model.
struct FitReport {
    std::string variant;
    bool court_effect = false;
    std::string dataset_hash;
    std::int64_t n_draws = 0;
    int n_chains = 1;
    std::int64_t n_iter = 0;
    std::int64_t burn_in = 0;
    std::int64_t thin = 0;
    std::uint64_t seed = 0;
    MetricSet metrics;
    std::map<std::string, double> acceptance;  // block -> post-burn-in rate
    double min_ess = 0.0;
    double max_rhat = 0.0;
    double runtime_seconds = 0.0;
};

/// Metrics of a fit on its own dataset (LPML/WAIC/RMSE from the stored
/// cell logits, DIC from the stored totals and the posterior-mean state).
MetricSet evaluate_fit(const PosteriorDraws& draws);

std::string fit_report_to_json(const FitReport& report);
FitReport fit_report_from_json(const std::string& text);

}  // namespace serveadv
