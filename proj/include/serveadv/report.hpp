#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "serveadv/sampler.hpp"

namespace serveadv {

/// Posterior mean and central 95% band of the serve-win probability along
/// a rally-bucket grid.
struct CurveSummary {
    std::vector<double> grid;
    std::vector<double> mean;
    std::vector<double> lo;  // 2.5% quantile
    std::vector<double> hi;  // 97.5% quantile
};

/// Posterior median and central 95% interval of a scalar.
struct ScalarSummary {
    double median = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

struct RankedPlayer {
    std::string player;
    double median = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// One (server, bucket) group: observed win frequency against the
/// posterior-mean fitted probability.
struct FitPoint {
    int server = 0;
    int x = 0;
    std::int64_t total = 0;
    std::int64_t wins = 0;
    double observed = 0.0;
    double fitted = 0.0;
};

/// One server's rally ability against its total serve advantage — the
/// attack-versus-defence scatter. zero_excluded is true when neither 95%
/// interval contains zero (the display filter used for the plots).
struct PlayerScatter {
    std::string player;
    ScalarSummary alpha;
    ScalarSummary advantage;
    bool zero_excluded = false;
};

struct PredictionSummary {
    bool known_player = false;
    CurveSummary curve;
    ScalarSummary advantage;
};

/// Linear-interpolation quantile of the values (the same convention as the
/// common statistics libraries' default). Takes a copy because it sorts.
double quantile(std::vector<double> values, double q);

/// Grid over the spline domain in steps of 0.1, endpoints included.
std::vector<double> default_grid(const SplineSpec& spec);

/// Win-probability curve of a fitted server against an average opponent:
/// per draw p(s) = sigmoid(f_i(s) + alpha_i - mean of the other players'
/// alpha), court-specific under court effects.
CurveSummary curve_summary(const PosteriorDraws& draws, int server, std::span<const double> grid,
                           Court court = Court::Hard);

/// First-shot advantage f_i(lower) - f_i(upper) on the logit scale.
ScalarSummary serve_advantage(const PosteriorDraws& draws, int server);

/// Players ordered by posterior median rally ability, best first; ties
/// break lexicographically by name.
std::vector<RankedPlayer> rank_rally_ability(const PosteriorDraws& draws,
                                             Court court = Court::Hard);

/// Observed versus fitted win frequency for every (server, bucket) group
/// of the fit's own data.
std::vector<FitPoint> observed_vs_fitted(const PosteriorDraws& draws);

/// Rally ability and serve advantage summaries per server, in server
/// order. Abilities are court-specific under court effects.
std::vector<PlayerScatter> scatter_data(const PosteriorDraws& draws, Court court = Court::Hard);

/// Posterior predictive curve for a server whose decay curve was never
/// observed: coefficients are drawn from the population model of each
/// stored draw. If player_name matches a known player its rally ability is
/// taken from the draws; otherwise the ability is drawn from the
/// population too. Deterministic given (draws, name, grid, court, seed).
PredictionSummary predict_new_server(const PosteriorDraws& draws, const std::string& player_name,
                                     std::span<const double> grid, Court court, std::uint64_t seed);

}  // namespace serveadv
