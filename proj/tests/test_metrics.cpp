#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers/synth.hpp"
#include "serveadv/metrics.hpp"
#include "serveadv/model.hpp"
#include "serveadv/rng.hpp"
#include "serveadv/sampler.hpp"

using namespace serveadv;

namespace {

SplineSpec paper_spec() {
    return make_spec(1.0, 15.0, 4, std::vector<double>{2, 3, 4, 7, 11}, 3.0);
}

LogLikMatrix matrix_from(std::size_t n_draws, std::size_t n_obs, std::vector<double> values) {
    LogLikMatrix m;
    m.n_draws = n_draws;
    m.n_obs = n_obs;
    m.values = std::move(values);
    return m;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

PosteriorDraws quick_draws(unsigned seed, int n_chains = 1, std::int64_t n_iter = 150,
                           std::int64_t burn_in = 50, std::int64_t thin = 5) {
    const auto synth = synth::make_synth(paper_spec(), 2, 4, 300, std::vector<double>{1.0, 0.5, 0.8},
                                         0.1, 1.0, 1.0, 0.3, seed);
    ModelConfig cfg;
    cfg.spec = paper_spec();
    cfg.variant = Variant::Partial;
    ChainConfig chain;
    chain.n_iter = n_iter;
    chain.burn_in = burn_in;
    chain.thin = thin;
    chain.n_chains = n_chains;
    chain.seed = seed;
    return run_chain(chain, synth.ds, cfg);
}

}  // namespace

TEST_CASE("lpml from two draws and one observation") {
    // likelihoods 0.5 and 0.25: CPO is the harmonic mean 1/3.
    const auto ll = matrix_from(2, 1, {std::log(0.5), std::log(0.25)});
    CHECK(lpml(ll) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-9));
}

TEST_CASE("lpml adds over observations") {
    const auto ll = matrix_from(2, 2, {std::log(0.5), std::log(0.8), std::log(0.25), std::log(0.4)});
    const double cpo1 = std::log(1.0 / 3.0);
    const double cpo2 = std::log(2.0 / (1.0 / 0.8 + 1.0 / 0.4));
    CHECK(lpml(ll) == doctest::Approx(cpo1 + cpo2).epsilon(1e-9));
}

TEST_CASE("waic from a hand-computed fixture") {
    // One observation, two draws with likelihoods 0.5 and 0.25.
    const double l1 = std::log(0.5), l2 = std::log(0.25);
    const auto ll = matrix_from(2, 1, {l1, l2});
    const double lppd = std::log(0.375);
    const double mean = 0.5 * (l1 + l2);
    const double var = (l1 - mean) * (l1 - mean) + (l2 - mean) * (l2 - mean);  // n-1 = 1
    CHECK(waic(ll) == doctest::Approx(-2.0 * (lppd - var)).epsilon(1e-9));
}

TEST_CASE("dic from totals and the value at the mean") {
    const std::vector<double> totals = {-10.0, -12.0, -11.0};
    // mean deviance = -2 * mean(totals) = 22, deviance at mean = 20
    // DIC = 2 * 22 - 20 = 24
    CHECK(dic(totals, -10.0) == doctest::Approx(24.0).epsilon(1e-12));
}

TEST_CASE("cell-based metrics equal the expanded per-observation matrix") {
    // 2 cells, 3 draws; expand cells into individual Bernoulli observations.
    std::vector<CellObs> cells(2);
    cells[0].wins = 2;
    cells[0].total = 3;
    cells[0].server = 0;
    cells[0].x = 1;
    cells[1].wins = 0;
    cells[1].total = 2;
    cells[1].server = 0;
    cells[1].x = 4;
    const std::vector<double> logits = {logit(0.7), logit(0.3),   // draw 0
                                        logit(0.6), logit(0.45),  // draw 1
                                        logit(0.8), logit(0.2)};  // draw 2
    const std::size_t n_draws = 3;

    LogLikMatrix expanded;
    expanded.n_draws = n_draws;
    expanded.n_obs = 5;
    for (std::size_t d = 0; d < n_draws; ++d)
        for (std::size_t c = 0; c < 2; ++c) {
            const double p = 1.0 / (1.0 + std::exp(-logits[d * 2 + c]));
            for (int w = 0; w < cells[c].wins; ++w) expanded.values.push_back(std::log(p));
            for (int l = 0; l < cells[c].total - cells[c].wins; ++l)
                expanded.values.push_back(std::log(1.0 - p));
        }

    CHECK(lpml_cells(cells, logits, n_draws) == doctest::Approx(lpml(expanded)).epsilon(1e-12));
    CHECK(waic_cells(cells, logits, n_draws) == doctest::Approx(waic(expanded)).epsilon(1e-12));

    const auto totals = loglik_totals_cells(cells, logits, n_draws);
    REQUIRE(totals.size() == n_draws);
    for (std::size_t d = 0; d < n_draws; ++d) {
        double expect = 0.0;
        for (std::size_t o = 0; o < expanded.n_obs; ++o) expect += expanded.at(d, o);
        CHECK(totals[d] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("rmse over (server, bucket) groups with a hand value") {
    // One group: 10 observations, 7 wins, posterior mean p = 0.5 every draw.
    std::vector<CellObs> cells(2);
    cells[0].server = 0;
    cells[0].x = 3;
    cells[0].wins = 4;
    cells[0].total = 6;
    cells[1].server = 0;
    cells[1].x = 3;
    cells[1].wins = 3;
    cells[1].total = 4;
    const std::vector<double> logits = {0.0, 0.0};  // p = 0.5 for both cells, one draw
    // expected wins = 10 * 0.5 = 5; observed = 7; rmse = sqrt((7-5)^2 / 1) = 2
    CHECK(rmse_cells(cells, logits, 1) == doctest::Approx(2.0).epsilon(1e-12));

    // two groups: add a second server with a perfect fit; rmse = sqrt(4/2)
    std::vector<CellObs> more = cells;
    CellObs extra;
    extra.server = 1;
    extra.x = 1;
    extra.wins = 1;
    extra.total = 2;
    more.push_back(extra);
    const std::vector<double> logits3 = {0.0, 0.0, 0.0};
    CHECK(rmse_cells(more, logits3, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("rmse averages the probability over draws before scoring") {
    std::vector<CellObs> cells(1);
    cells[0].server = 0;
    cells[0].x = 2;
    cells[0].wins = 6;
    cells[0].total = 10;
    const std::vector<double> logits = {logit(0.2), logit(0.8)};  // two draws
    const double pbar = 0.5;
    CHECK(rmse_cells(cells, logits, 2) ==
          doctest::Approx(std::fabs(6.0 - 10.0 * pbar)).epsilon(1e-12));
}

TEST_CASE("ess equals n for white noise and collapses for constants") {
    Rng rng(7);
    std::vector<double> iid(4000);
    for (double& v : iid) v = rng.normal(0.0, 1.0);
    const double e = ess(iid, 1);
    CHECK(e > 3000.0);
    CHECK(e <= 4000.0 * 1.05);

    std::vector<double> constant(500, 3.25);
    CHECK(ess(constant, 1) == doctest::Approx(500.0));

    // strong positive correlation cuts the effective count well below n
    std::vector<double> walk(4000);
    double x = 0.0;
    for (double& v : walk) {
        x = 0.95 * x + rng.normal(0.0, 1.0);
        v = x;
    }
    CHECK(ess(walk, 1) < 1500.0);
}

TEST_CASE("split rhat near one for stationary chains, large for split means") {
    Rng rng(15);
    std::vector<double> good(4000);
    for (double& v : good) v = rng.normal(0.0, 1.0);
    const double r = split_rhat(good, 2);
    CHECK(r > 0.98);
    CHECK(r < 1.02);

    // two chains at different levels
    std::vector<double> split_means(2000);
    for (std::size_t i = 0; i < 1000; ++i) split_means[i] = rng.normal(0.0, 0.1);
    for (std::size_t i = 1000; i < 2000; ++i) split_means[i] = rng.normal(5.0, 0.1);
    CHECK(split_rhat(split_means, 2) > 2.0);

    std::vector<double> constant(100, 1.0);
    CHECK(std::isnan(split_rhat(constant, 2)));
}

TEST_CASE("posterior mean state averages on the right scales") {
    const PosteriorDraws draws = quick_draws(51);
    const ParamState mean = posterior_mean_state(draws);
    const std::size_t n = draws.n_draws();
    REQUIRE(n > 0);

    // free coefficient: arithmetic mean of the stored values
    double acc = 0.0;
    for (std::size_t d = 0; d < n; ++d) acc += draws.value(d, draws.beta_offset(0) + 1);
    CHECK(mean.players.free_beta[0][1] == doctest::Approx(acc / double(n)).epsilon(1e-12));

    // decrement: geometric mean (log-scale average), still positive
    double log_acc = 0.0;
    for (std::size_t d = 0; d < n; ++d) log_acc += std::log(draws.value(d, draws.eps_offset(1) + 2));
    CHECK(mean.players.eps[1][2] == doctest::Approx(std::exp(log_acc / double(n))).epsilon(1e-12));
    CHECK(mean.players.eps[1][2] > 0.0);

    // abilities recentre to zero
    double alpha_sum = 0.0;
    for (double a : mean.players.alpha) alpha_sum += a;
    CHECK(std::fabs(alpha_sum) <= 1e-12);

    // the mean state is usable: reconstruction respects the constraint
    const auto coeffs = reconstruct_coeffs(mean.players.free_beta[0], mean.players.eps[0]);
    CHECK(is_nonincreasing_on(draws.model.spec, coeffs));
}

TEST_CASE("diagnostics cover every parameter") {
    const PosteriorDraws draws = quick_draws(57, 2, 300, 100, 5);
    const Diagnostics diag = diagnostics(draws);
    REQUIRE(diag.ess.size() == draws.n_params());
    REQUIRE(diag.rhat.size() == draws.n_params());
    double min_ess = std::numeric_limits<double>::infinity();
    double max_rhat = 0.0;
    for (std::size_t p = 0; p < draws.n_params(); ++p) {
        CHECK(diag.ess[p] > 0.0);
        CHECK(diag.ess[p] <= double(draws.n_draws()) * 1.5);
        min_ess = std::min(min_ess, diag.ess[p]);
        if (!std::isnan(diag.rhat[p])) max_rhat = std::max(max_rhat, diag.rhat[p]);
    }
    CHECK(diag.min_ess == doctest::Approx(min_ess));
    CHECK(diag.max_rhat == doctest::Approx(max_rhat));
}

TEST_CASE("fit evaluation is internally consistent") {
    const PosteriorDraws draws = quick_draws(61);
    const MetricSet m = evaluate_fit(draws);
    CHECK(std::isfinite(m.lpml));
    CHECK(std::isfinite(m.waic));
    CHECK(std::isfinite(m.dic));
    CHECK(m.rmse >= 0.0);
    CHECK(m.lpml < 0.0);
    // deviance-scale criteria agree with -2 LPML within a loose factor
    CHECK(m.waic == doctest::Approx(-2.0 * m.lpml).epsilon(0.25));
    // and match direct recomputation from the stored pieces
    CHECK(m.lpml ==
          doctest::Approx(lpml_cells(draws.cells, draws.cell_logits, draws.n_draws())).epsilon(1e-12));
    CHECK(m.waic ==
          doctest::Approx(waic_cells(draws.cells, draws.cell_logits, draws.n_draws())).epsilon(1e-12));

    PosteriorDraws empty = draws;
    empty.cells.clear();
    empty.cell_logits.clear();
    CHECK_THROWS_AS(evaluate_fit(empty), std::invalid_argument);
}

TEST_CASE("fit reports survive a json round-trip") {
    FitReport r;
    r.variant = "partial";
    r.court_effect = true;
    r.dataset_hash = "deadbeef01234567";
    r.n_draws = 950;
    r.n_chains = 4;
    r.n_iter = 20000;
    r.burn_in = 1000;
    r.thin = 20;
    r.seed = 99;
    r.metrics = {-1234.5, 2470.25, 2468.0, 3.75};
    r.acceptance = {{"beta", 0.44}, {"eps", 0.3}, {"alpha", 0.5}};
    r.min_ess = 120.5;
    r.max_rhat = 1.01;
    r.runtime_seconds = 42.25;

    const FitReport back = fit_report_from_json(fit_report_to_json(r));
    CHECK(back.variant == r.variant);
    CHECK(back.court_effect == r.court_effect);
    CHECK(back.dataset_hash == r.dataset_hash);
    CHECK(back.n_draws == r.n_draws);
    CHECK(back.n_chains == r.n_chains);
    CHECK(back.n_iter == r.n_iter);
    CHECK(back.burn_in == r.burn_in);
    CHECK(back.thin == r.thin);
    CHECK(back.seed == r.seed);
    CHECK(back.metrics.lpml == r.metrics.lpml);
    CHECK(back.metrics.waic == r.metrics.waic);
    CHECK(back.metrics.dic == r.metrics.dic);
    CHECK(back.metrics.rmse == r.metrics.rmse);
    CHECK(back.acceptance == r.acceptance);
    CHECK(back.min_ess == r.min_ess);
    CHECK(back.max_rhat == r.max_rhat);
    CHECK(back.runtime_seconds == r.runtime_seconds);
}
