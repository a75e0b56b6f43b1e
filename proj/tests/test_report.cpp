#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers/synth.hpp"
#include "serveadv/model.hpp"
#include "serveadv/report.hpp"
#include "serveadv/sampler.hpp"

using namespace serveadv;

namespace {

SplineSpec paper_spec() {
    return make_spec(1.0, 15.0, 4, std::vector<double>{2, 3, 4, 7, 11}, 3.0);
}

PosteriorDraws quick_draws(unsigned seed, bool court = false, int n_servers = 3, int n_players = 5,
                           int n_points = 600) {
    const auto synth = synth::make_synth(paper_spec(), n_servers, n_players, n_points,
                                         std::vector<double>{1.0, 0.5, 0.8}, 0.1, 1.0, 1.0, 0.4, seed);
    ModelConfig cfg;
    cfg.spec = paper_spec();
    cfg.variant = Variant::Partial;
    cfg.court_effect = court;
    ChainConfig chain;
    chain.n_iter = 200;
    chain.burn_in = 60;
    chain.thin = 5;
    chain.n_chains = 1;
    chain.seed = seed;
    return run_chain(chain, synth.ds, cfg);
}

}  // namespace

TEST_CASE("quantiles interpolate linearly between order statistics") {
    const std::vector<double> v = {4.0, 1.0, 3.0, 2.0};  // sorted: 1 2 3 4
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
    CHECK(quantile(v, 0.5) == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(quantile(v, 0.25) == doctest::Approx(1.75).epsilon(1e-15));   // h = 0.75
    CHECK(quantile(v, 1.0 / 3.0) == doctest::Approx(2.0).epsilon(1e-12));  // h = 1 exactly
    CHECK(quantile({5.0}, 0.37) == 5.0);
    CHECK(quantile(v, -0.5) == 1.0);
    CHECK(quantile(v, 2.0) == 4.0);
    CHECK_THROWS_AS(quantile({}, 0.5), std::invalid_argument);

    const std::vector<double> ten = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(quantile(ten, 0.025) == doctest::Approx(1.225).epsilon(1e-12));  // h = 0.225
    CHECK(quantile(ten, 0.975) == doctest::Approx(9.775).epsilon(1e-12));
}

TEST_CASE("default grid steps by a tenth across the domain") {
    const auto grid = default_grid(paper_spec());
    REQUIRE(grid.size() == 141);
    CHECK(grid.front() == 1.0);
    CHECK(grid.back() == 15.0);
    CHECK(grid[1] == doctest::Approx(1.1).epsilon(1e-12));
    for (std::size_t i = 1; i < grid.size(); ++i)
        CHECK(grid[i] - grid[i - 1] == doctest::Approx(0.1).epsilon(1e-9));
}

TEST_CASE("curve summaries are probabilities with ordered bands") {
    const PosteriorDraws draws = quick_draws(71);
    const auto grid = default_grid(draws.model.spec);
    for (int s = 0; s < draws.n_servers; ++s) {
        const CurveSummary cs = curve_summary(draws, s, grid);
        REQUIRE(cs.grid.size() == grid.size());
        REQUIRE(cs.mean.size() == grid.size());
        REQUIRE(cs.lo.size() == grid.size());
        REQUIRE(cs.hi.size() == grid.size());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            CHECK(cs.mean[g] > 0.0);
            CHECK(cs.mean[g] < 1.0);
            CHECK(cs.lo[g] <= cs.mean[g] + 1e-12);
            CHECK(cs.mean[g] <= cs.hi[g] + 1e-12);
        }
    }
    CHECK_THROWS_AS(curve_summary(draws, draws.n_servers, grid), std::invalid_argument);
}

TEST_CASE("curve summary matches a by-hand recomputation at one point") {
    const PosteriorDraws draws = quick_draws(73);
    const std::vector<double> grid = {4.5};
    const CurveSummary cs = curve_summary(draws, 1, grid);

    std::vector<double> probs;
    const int np = draws.n_players;
    for (std::size_t d = 0; d < draws.n_draws(); ++d) {
        const ParamState st = draws.state_at(d);
        const auto coeffs = reconstruct_coeffs(st.players.free_beta[1], st.players.eps[1]);
        const int self = draws.server_player[1];
        double others = 0.0;
        for (int p = 0; p < np; ++p)
            if (p != self) others += st.players.alpha[p];
        others /= double(np - 1);
        const double logit = spline_eval(draws.model.spec, coeffs, 4.5) +
                             st.players.alpha[self] - others;
        probs.push_back(1.0 / (1.0 + std::exp(-logit)));
    }
    double mean = 0.0;
    for (double p : probs) mean += p;
    mean /= double(probs.size());
    CHECK(cs.mean[0] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(cs.lo[0] == doctest::Approx(quantile(probs, 0.025)).epsilon(1e-12));
    CHECK(cs.hi[0] == doctest::Approx(quantile(probs, 0.975)).epsilon(1e-12));
}

TEST_CASE("serve advantage is the drop from first shot to long rallies") {
    const PosteriorDraws draws = quick_draws(79);
    const ScalarSummary adv = serve_advantage(draws, 0);
    CHECK(adv.lo <= adv.median);
    CHECK(adv.median <= adv.hi);

    // recompute the per-draw advantage directly
    std::vector<double> gaps;
    for (std::size_t d = 0; d < draws.n_draws(); ++d) {
        const ParamState st = draws.state_at(d);
        const auto coeffs = reconstruct_coeffs(st.players.free_beta[0], st.players.eps[0]);
        gaps.push_back(spline_eval(draws.model.spec, coeffs, 1.0) -
                       spline_eval(draws.model.spec, coeffs, 15.0));
    }
    CHECK(adv.median == doctest::Approx(quantile(gaps, 0.5)).epsilon(1e-12));
    CHECK(adv.lo == doctest::Approx(quantile(gaps, 0.025)).epsilon(1e-12));
    CHECK(adv.hi == doctest::Approx(quantile(gaps, 0.975)).epsilon(1e-12));
}

TEST_CASE("ranking orders by median, ties broken by name") {
    const PosteriorDraws draws = quick_draws(83);
    const auto ranked = rank_rally_ability(draws);
    REQUIRE(ranked.size() == static_cast<std::size_t>(draws.n_players));
    for (std::size_t i = 1; i < ranked.size(); ++i) {
        const bool ordered = ranked[i - 1].median > ranked[i].median ||
                             (ranked[i - 1].median == ranked[i].median &&
                              ranked[i - 1].player < ranked[i].player);
        CHECK(ordered);
    }
    // medians come straight from the stored alpha traces
    for (const auto& rp : ranked) {
        int p = -1;
        for (int i = 0; i < draws.n_players; ++i)
            if (draws.player_names[i] == rp.player) p = i;
        REQUIRE(p >= 0);
        std::vector<double> trace;
        for (std::size_t d = 0; d < draws.n_draws(); ++d)
            trace.push_back(draws.value(d, draws.alpha_offset() + p));
        CHECK(rp.median == doctest::Approx(quantile(trace, 0.5)).epsilon(1e-12));
    }
}

TEST_CASE("court-specific abilities rank per surface") {
    const PosteriorDraws draws = quick_draws(89, true);
    const auto clay = rank_rally_ability(draws, Court::Clay);
    const auto hard = rank_rally_ability(draws, Court::Hard);
    REQUIRE(clay.size() == hard.size());
    bool differs = false;
    for (std::size_t i = 0; i < clay.size() && !differs; ++i)
        differs = clay[i].player != hard[i].player || clay[i].median != hard[i].median;
    CHECK(differs);
}

TEST_CASE("observed versus fitted covers every (server, bucket) group") {
    const PosteriorDraws draws = quick_draws(97);
    const auto points = observed_vs_fitted(draws);
    REQUIRE(!points.empty());
    std::int64_t total = 0;
    for (const auto& fp : points) {
        CHECK(fp.total > 0);
        CHECK(fp.wins >= 0);
        CHECK(fp.wins <= fp.total);
        CHECK(fp.observed == doctest::Approx(double(fp.wins) / double(fp.total)).epsilon(1e-12));
        CHECK(fp.fitted > 0.0);
        CHECK(fp.fitted < 1.0);
        CHECK(fp.x >= 1);
        CHECK(fp.x <= 15);
        total += fp.total;
    }
    std::int64_t cells_total = 0;
    for (const auto& c : draws.cells) cells_total += c.total;
    CHECK(total == cells_total);
}

TEST_CASE("scatter data pairs abilities with advantages in server order") {
    const PosteriorDraws draws = quick_draws(101);
    const auto scatter = scatter_data(draws);
    REQUIRE(scatter.size() == static_cast<std::size_t>(draws.n_servers));
    for (int s = 0; s < draws.n_servers; ++s) {
        CHECK(scatter[s].player == draws.server_names[s]);
        const ScalarSummary adv = serve_advantage(draws, s);
        CHECK(scatter[s].advantage.median == doctest::Approx(adv.median).epsilon(1e-12));
        const bool expect_zero_excluded =
            (scatter[s].alpha.lo > 0.0 || scatter[s].alpha.hi < 0.0) &&
            (scatter[s].advantage.lo > 0.0 || scatter[s].advantage.hi < 0.0);
        CHECK(scatter[s].zero_excluded == expect_zero_excluded);
    }
}

TEST_CASE("predictions for unseen servers are deterministic and sane") {
    const PosteriorDraws draws = quick_draws(103);
    const auto grid = default_grid(draws.model.spec);
    const PredictionSummary a = predict_new_server(draws, "Nobody", grid, Court::Hard, 5);
    const PredictionSummary b = predict_new_server(draws, "Nobody", grid, Court::Hard, 5);
    CHECK_FALSE(a.known_player);
    CHECK(a.curve.mean == b.curve.mean);
    CHECK(a.curve.lo == b.curve.lo);
    CHECK(a.advantage.median == b.advantage.median);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        CHECK(a.curve.mean[g] > 0.0);
        CHECK(a.curve.mean[g] < 1.0);
        CHECK(a.curve.lo[g] <= a.curve.hi[g]);
    }
    CHECK(a.advantage.lo <= a.advantage.median);
    CHECK(a.advantage.median <= a.advantage.hi);

    const PredictionSummary c = predict_new_server(draws, "Nobody", grid, Court::Hard, 6);
    CHECK(a.curve.mean != c.curve.mean);

    // a player seen as receiver keeps their learned ability
    const std::string known = draws.player_names.back();
    const PredictionSummary d = predict_new_server(draws, known, grid, Court::Hard, 5);
    CHECK(d.known_player);
    CHECK(d.curve.mean != a.curve.mean);
}

TEST_CASE("population predictions widen the band relative to a fitted server") {
    const PosteriorDraws draws = quick_draws(107, false, 4, 6, 1200);
    const std::vector<double> grid = {2.0, 8.0};
    const PredictionSummary pred = predict_new_server(draws, "Nobody", grid, Court::Hard, 11);
    // across fitted servers, the new-server band should not be tighter than
    // the narrowest fitted band (it adds population spread on top)
    double narrowest = 1.0;
    for (int s = 0; s < draws.n_servers; ++s) {
        const CurveSummary cs = curve_summary(draws, s, grid);
        narrowest = std::min(narrowest, cs.hi[0] - cs.lo[0]);
    }
    CHECK(pred.curve.hi[0] - pred.curve.lo[0] >= narrowest * 0.5);
}
