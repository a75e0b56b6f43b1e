#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "serveadv/data.hpp"
#include "serveadv/model.hpp"
#include "serveadv/sampler.hpp"

namespace serveadv {

/// Full run configuration. Defaults mirror the reference analysis: cubic
/// splines on [1,15] with interior knots {2,3,4,7,11}, monotone from 3,
/// rally lengths 0..30, servers with three or more matches, and a single
/// 20,000-iteration chain (burn-in 1,000, thinning 20).
struct RunConfig {
    // paths
    std::string input_csv;
    std::string out_dir = "out";

    // data options
    Tour tour = Tour::ATP;
    int min_matches = 3;
    int max_rally = 30;
    int test_servers = 0;
    std::uint64_t split_seed = 7;
    SchemaConfig schema;

    // model options
    Variant variant = Variant::Partial;
    bool court_effect = false;
    int order = 4;
    std::vector<double> interior_knots = {2.0, 3.0, 4.0, 7.0, 11.0};
    double lower = 1.0;
    double upper = 15.0;
    double mono_from = 3.0;

    // chain options
    ChainConfig chain;

    // report options
    bool strict = false;       // fit fails when any split R-hat exceeds 1.1
    bool filter_zero = false;  // scatter keeps only players whose CIs exclude 0
    std::vector<std::string> predict_players;

    SplineSpec spec() const;
    ModelConfig model() const;
};

/// Parses the JSON config file over the defaults. An empty path yields the
/// defaults. Unknown keys throw SchemaError — a typo must not silently run
/// a different model.
RunConfig load_config(const std::string& path);

/// Config echo as canonical JSON (embedded in artifacts for provenance).
std::string config_to_json(const RunConfig& config);

// Command entry points. Each writes its artifacts under config.out_dir,
// updates manifest.json there, and returns a process exit code.
int cmd_ingest(const RunConfig& config);
int cmd_fit(const RunConfig& config);
int cmd_compare(const RunConfig& config, std::vector<std::string> report_paths);
int cmd_predict(const RunConfig& config);
int cmd_report(const RunConfig& config);

/// Full argv dispatch used by main(): subcommand routing, config loading,
/// flag overrides, and the exception-to-exit-code mapping (2 schema,
/// 3 empty after filters, 4 sampler init, 5 comparison mismatch,
/// 6 missing draws, 1 anything else).
int run_cli(int argc, char** argv);

/// Posterior draws persistence (little-endian binary, magic "SVDRAWS1").
/// Observation cells and per-cell logits are not stored; draws read back
/// carry parameters, names, and per-draw total log-likelihoods only.
void write_draws(const PosteriorDraws& draws, const std::string& path);
PosteriorDraws read_draws(const std::string& path);

}  // namespace serveadv
