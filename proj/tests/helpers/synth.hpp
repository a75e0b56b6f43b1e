#pragma once

// Synthetic datasets drawn from the model itself, with the ground truth
// kept alongside for recovery checks.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "serveadv/data.hpp"
#include "serveadv/model.hpp"
#include "serveadv/rng.hpp"
#include "serveadv/splines.hpp"

namespace synth {

struct Synth {
    serveadv::Dataset ds;
    std::vector<std::vector<double>> coeffs;  // true coefficient vector per server
    std::vector<double> alpha;                // true ability per player, sums to zero
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

/// Servers are the first n_servers players. Per-server free coefficients
/// are base_free + N(0, free_sd^2) noise, decrements are Gamma with the
/// given mean/variance, abilities are an even spread of width 2 *
/// alpha_spread re-centered to zero. Rally buckets follow a geometric-ish
/// decay with the given continuation weight: the 0.65 default makes short
/// rallies dominate, as in the real data; values nearer 1 spread points
/// across the whole bucket range for whole-curve recovery checks.
inline Synth make_synth(const serveadv::SplineSpec& spec, int n_servers, int n_players,
                        std::size_t n_points, std::span<const double> base_free, double free_sd,
                        double eps_mean, double eps_var, double alpha_spread, std::uint64_t seed,
                        double bucket_decay = 0.65) {
    serveadv::Rng rng(seed);
    Synth out;

    out.alpha.resize(n_players);
    for (int p = 0; p < n_players; ++p) {
        out.alpha[p] =
            n_players > 1 ? alpha_spread * (2.0 * p / (n_players - 1.0) - 1.0) : 0.0;
    }
    double mean_alpha = 0.0;
    for (double a : out.alpha) mean_alpha += a;
    mean_alpha /= n_players;
    for (double& a : out.alpha) a -= mean_alpha;

    const int n_free = static_cast<int>(base_free.size());
    const int n_eps = spec.basis_dim - n_free;
    const auto [eps_shape, eps_rate] = serveadv::gamma_mean_var(eps_mean, eps_var);
    out.coeffs.resize(n_servers);
    for (int i = 0; i < n_servers; ++i) {
        std::vector<double> free(n_free), eps(n_eps);
        for (int m = 0; m < n_free; ++m) free[m] = base_free[m] + rng.normal(0.0, free_sd);
        for (int e = 0; e < n_eps; ++e) eps[e] = rng.gamma(eps_shape, eps_rate);
        out.coeffs[i] = serveadv::reconstruct_coeffs(free, eps);
    }

    auto& ds = out.ds;
    for (int p = 0; p < n_players; ++p) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "P%03d", p);
        ds.player_names.push_back(buf);
        if (p < n_servers) {
            ds.server_names.push_back(buf);
            ds.server_player.push_back(p);
        }
    }

    // bucket weights ~ bucket_decay^(x-1), normalized
    const int n_buckets = static_cast<int>(spec.upper - spec.lower) + 1;
    std::vector<double> cum(n_buckets);
    double total = 0.0;
    for (int b = 0; b < n_buckets; ++b) {
        total += std::pow(bucket_decay, b);
        cum[b] = total;
    }
    for (double& c : cum) c /= total;

    ds.points.reserve(n_points);
    for (std::size_t n = 0; n < n_points; ++n) {
        const int server = static_cast<int>(rng.uniform_int(n_servers));
        int receiver = static_cast<int>(rng.uniform_int(n_players - 1));
        if (receiver >= server) ++receiver;  // receiver != server's player index
        const double u = rng.uniform();
        int x = static_cast<int>(spec.lower);
        for (int b = 0; b < n_buckets; ++b) {
            if (u <= cum[b]) {
                x = static_cast<int>(spec.lower) + b;
                break;
            }
        }
        const double f = serveadv::spline_eval(spec, out.coeffs[server], x);
        const double z = f + out.alpha[server] - out.alpha[receiver];
        serveadv::AggregatedPoint pt;
        pt.server = server;
        pt.receiver = receiver;
        pt.x = static_cast<std::int16_t>(x);
        pt.y = rng.uniform() < sigmoid(z) ? 1 : 0;
        pt.court = serveadv::Court::Hard;
        ds.points.push_back(pt);
    }
    return out;
}

}  // namespace synth
