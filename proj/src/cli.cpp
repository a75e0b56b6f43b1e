#include "serveadv/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "serveadv/errors.hpp"
#include "serveadv/metrics.hpp"
#include "serveadv/report.hpp"

namespace serveadv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v, const char* format = "%.6f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

const char* court_name(Court c) {
    switch (c) {
        case Court::Clay: return "clay";
        case Court::Grass: return "grass";
        case Court::Hard: return "hard";
    }
    return "?";
}

Tour tour_from_string(const std::string& s) {
    if (s == "atp") return Tour::ATP;
    if (s == "wta") return Tour::WTA;
    throw SchemaError("unknown tour '" + s + "' (expected atp or wta)");
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

void write_text(const fs::path& p, const std::string& text) {
    auto f = open_out(p);
    f << text;
    if (!f) throw std::runtime_error("short write to " + p.string());
}

std::string read_text(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw SchemaError("cannot read " + p.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Merge one command's entry into out_dir/manifest.json. No timestamps:
// identical runs must leave identical bytes.
void update_manifest(const fs::path& dir, const std::string& key, json entry) {
    const fs::path p = dir / "manifest.json";
    json m = json::object();
    if (fs::exists(p)) {
        try {
            m = json::parse(read_text(p));
        } catch (const json::exception&) {
            m = json::object();
        }
        if (!m.is_object()) m = json::object();
    }
    m[key] = std::move(entry);
    write_text(p, m.dump(2) + "\n");
}

json config_json(const RunConfig& c);

}  // namespace

SplineSpec RunConfig::spec() const { return make_spec(lower, upper, order, interior_knots, mono_from); }

ModelConfig RunConfig::model() const {
    ModelConfig m;
    m.spec = spec();
    m.variant = variant;
    m.court_effect = court_effect;
    return m;
}

namespace {

// --- config ---------------------------------------------------------------

template <typename T>
T grab(const json& j, const char* key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

void apply_schema_keys(const json& j, SchemaConfig& s) {
    for (const auto& [key, val] : j.items()) {
        if (key == "server_col") s.server_col = val.get<std::string>();
        else if (key == "receiver_col") s.receiver_col = val.get<std::string>();
        else if (key == "rally_col") s.rally_col = val.get<std::string>();
        else if (key == "winner_col") s.winner_col = val.get<std::string>();
        else if (key == "tournament_col") s.tournament_col = val.get<std::string>();
        else if (key == "match_col") s.match_col = val.get<std::string>();
        else if (key == "tour_col") s.tour_col = val.get<std::string>();
        else if (key == "winner_server_values") s.winner_server_values = val.get<std::vector<std::string>>();
        else if (key == "winner_receiver_values") s.winner_receiver_values = val.get<std::vector<std::string>>();
        else throw SchemaError("unknown config key schema." + key);
    }
}

void apply_chain_keys(const json& j, ChainConfig& c) {
    for (const auto& [key, val] : j.items()) {
        if (key == "n_iter") c.n_iter = val.get<std::int64_t>();
        else if (key == "burn_in") c.burn_in = val.get<std::int64_t>();
        else if (key == "thin") c.thin = val.get<std::int64_t>();
        else if (key == "n_chains") c.n_chains = val.get<int>();
        else if (key == "seed") c.seed = val.get<std::uint64_t>();
        else if (key == "adapt_window") c.adapt_window = val.get<std::int64_t>();
        else if (key == "target_accept") c.target_accept = val.get<double>();
        else throw SchemaError("unknown config key chain." + key);
    }
}

json config_json(const RunConfig& c) {
    json j;
    j["input_csv"] = c.input_csv;
    j["out_dir"] = c.out_dir;
    j["tour"] = c.tour == Tour::ATP ? "atp" : "wta";
    j["min_matches"] = c.min_matches;
    j["max_rally"] = c.max_rally;
    j["test_servers"] = c.test_servers;
    j["split_seed"] = c.split_seed;
    j["schema"] = {{"server_col", c.schema.server_col},
                   {"receiver_col", c.schema.receiver_col},
                   {"rally_col", c.schema.rally_col},
                   {"winner_col", c.schema.winner_col},
                   {"tournament_col", c.schema.tournament_col},
                   {"match_col", c.schema.match_col},
                   {"tour_col", c.schema.tour_col},
                   {"winner_server_values", c.schema.winner_server_values},
                   {"winner_receiver_values", c.schema.winner_receiver_values}};
    j["variant"] = to_string(c.variant);
    j["court_effect"] = c.court_effect;
    j["order"] = c.order;
    j["interior_knots"] = c.interior_knots;
    j["lower"] = c.lower;
    j["upper"] = c.upper;
    j["mono_from"] = c.mono_from;
    j["chain"] = {{"n_iter", c.chain.n_iter},     {"burn_in", c.chain.burn_in},
                  {"thin", c.chain.thin},         {"n_chains", c.chain.n_chains},
                  {"seed", c.chain.seed},         {"adapt_window", c.chain.adapt_window},
                  {"target_accept", c.chain.target_accept}};
    j["strict"] = c.strict;
    j["filter_zero"] = c.filter_zero;
    j["predict_players"] = c.predict_players;
    return j;
}

}  // namespace

std::string config_to_json(const RunConfig& config) { return config_json(config).dump(2) + "\n"; }

RunConfig load_config(const std::string& path) {
    RunConfig cfg;
    if (path.empty()) return cfg;
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw SchemaError("config file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw SchemaError("config root must be a JSON object");
    try {
        for (const auto& [key, val] : j.items()) {
            if (key == "input_csv") cfg.input_csv = val.get<std::string>();
            else if (key == "out_dir") cfg.out_dir = val.get<std::string>();
            else if (key == "tour") cfg.tour = tour_from_string(val.get<std::string>());
            else if (key == "min_matches") cfg.min_matches = val.get<int>();
            else if (key == "max_rally") cfg.max_rally = val.get<int>();
            else if (key == "test_servers") cfg.test_servers = val.get<int>();
            else if (key == "split_seed") cfg.split_seed = val.get<std::uint64_t>();
            else if (key == "schema") apply_schema_keys(val, cfg.schema);
            else if (key == "variant") cfg.variant = variant_from_string(val.get<std::string>());
            else if (key == "court_effect") cfg.court_effect = val.get<bool>();
            else if (key == "order") cfg.order = val.get<int>();
            else if (key == "interior_knots") cfg.interior_knots = val.get<std::vector<double>>();
            else if (key == "lower") cfg.lower = val.get<double>();
            else if (key == "upper") cfg.upper = val.get<double>();
            else if (key == "mono_from") cfg.mono_from = val.get<double>();
            else if (key == "chain") apply_chain_keys(val, cfg.chain);
            else if (key == "strict") cfg.strict = val.get<bool>();
            else if (key == "filter_zero") cfg.filter_zero = val.get<bool>();
            else if (key == "predict_players") cfg.predict_players = val.get<std::vector<std::string>>();
            else throw SchemaError("unknown config key: " + key);
        }
    } catch (const json::exception& e) {
        throw SchemaError("config file " + path + ": " + e.what());
    } catch (const std::invalid_argument& e) {
        throw SchemaError("config file " + path + ": " + e.what());
    }
    cfg.schema.default_tour = cfg.tour;
    return cfg;
}

// --- draws persistence ------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'S', 'V', 'D', 'R', 'A', 'W', 'S', '1'};

template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw SchemaError("draws file truncated");
    return v;
}

}  // namespace

void write_draws(const PosteriorDraws& draws, const std::string& path) {
    auto out = open_out(path);
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, 1);  // version
    put<std::uint32_t>(out, draws.model.court_effect ? 1 : 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(draws.model.variant));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(draws.chain.n_chains));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(draws.kept_per_chain));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(draws.chain.n_iter));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(draws.chain.burn_in));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(draws.chain.thin));
    put<std::uint64_t>(out, draws.chain.seed);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(draws.chain.adapt_window));
    put<double>(out, draws.chain.target_accept);
    put<std::int32_t>(out, draws.n_servers);
    put<std::int32_t>(out, draws.n_players);
    put<std::uint64_t>(out, draws.param_names.size());

    const auto& spec = draws.model.spec;
    put<std::int32_t>(out, spec.order);
    put<std::int32_t>(out, spec.basis_dim);
    put<double>(out, spec.lower);
    put<double>(out, spec.upper);
    put<double>(out, spec.mono_from);
    put<std::uint64_t>(out, spec.knots.size());
    for (double t : spec.knots) put<double>(out, t);

    std::string blob;
    for (const auto& n : draws.server_names) blob += n + '\n';
    for (const auto& n : draws.player_names) blob += n + '\n';
    for (const auto& n : draws.param_names) blob += n + '\n';
    put<std::uint64_t>(out, blob.size());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    for (int sp : draws.server_player) put<std::int32_t>(out, sp);

    put<std::uint64_t>(out, draws.n_draws());
    out.write(reinterpret_cast<const char*>(draws.states.data()),
              static_cast<std::streamsize>(draws.states.size() * sizeof(double)));
    out.write(reinterpret_cast<const char*>(draws.loglik_total.data()),
              static_cast<std::streamsize>(draws.loglik_total.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write to " + path);
}

PosteriorDraws read_draws(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingDrawsError("draws file missing: " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw SchemaError("not a draws file: " + path);
    const auto version = take<std::uint32_t>(in);
    if (version != 1) throw SchemaError("unsupported draws file version");

    PosteriorDraws d;
    d.model.court_effect = take<std::uint32_t>(in) != 0;
    d.model.variant = static_cast<Variant>(take<std::uint32_t>(in));
    d.chain.n_chains = static_cast<int>(take<std::uint32_t>(in));
    d.kept_per_chain = static_cast<std::int64_t>(take<std::uint64_t>(in));
    d.chain.n_iter = static_cast<std::int64_t>(take<std::uint64_t>(in));
    d.chain.burn_in = static_cast<std::int64_t>(take<std::uint64_t>(in));
    d.chain.thin = static_cast<std::int64_t>(take<std::uint64_t>(in));
    d.chain.seed = take<std::uint64_t>(in);
    d.chain.adapt_window = static_cast<std::int64_t>(take<std::uint64_t>(in));
    d.chain.target_accept = take<double>(in);
    d.n_servers = take<std::int32_t>(in);
    d.n_players = take<std::int32_t>(in);
    const auto n_params = take<std::uint64_t>(in);

    auto& spec = d.model.spec;
    spec.order = take<std::int32_t>(in);
    spec.basis_dim = take<std::int32_t>(in);
    spec.lower = take<double>(in);
    spec.upper = take<double>(in);
    spec.mono_from = take<double>(in);
    spec.knots.resize(take<std::uint64_t>(in));
    for (double& t : spec.knots) t = take<double>(in);

    std::string blob(take<std::uint64_t>(in), '\0');
    in.read(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!in) throw SchemaError("draws file truncated");
    std::istringstream lines(blob);
    std::string line;
    auto next_line = [&]() {
        if (!std::getline(lines, line)) throw SchemaError("draws file name table truncated");
        return line;
    };
    for (int i = 0; i < d.n_servers; ++i) d.server_names.push_back(next_line());
    for (int i = 0; i < d.n_players; ++i) d.player_names.push_back(next_line());
    for (std::uint64_t i = 0; i < n_params; ++i) d.param_names.push_back(next_line());
    d.server_player.resize(d.n_servers);
    for (auto& sp : d.server_player) sp = take<std::int32_t>(in);

    const auto n_draws = take<std::uint64_t>(in);
    d.states.resize(n_draws * n_params);
    in.read(reinterpret_cast<char*>(d.states.data()),
            static_cast<std::streamsize>(d.states.size() * sizeof(double)));
    d.loglik_total.resize(n_draws);
    in.read(reinterpret_cast<char*>(d.loglik_total.data()),
            static_cast<std::streamsize>(d.loglik_total.size() * sizeof(double)));
    if (!in) throw SchemaError("draws file truncated");
    return d;
}

// --- commands ---------------------------------------------------------------

int cmd_ingest(const RunConfig& config) {
    if (config.input_csv.empty()) throw SchemaError("ingest requires input_csv");
    const fs::path out(config.out_dir);
    fs::create_directories(out);

    SchemaConfig schema = config.schema;
    schema.default_tour = config.tour;
    ParsedPoints parsed = parse_points_csv(config.input_csv, schema);

    std::vector<RawPointRecord> recs;
    recs.reserve(parsed.records.size());
    for (auto& r : parsed.records)
        if (r.tour == config.tour) recs.push_back(std::move(r));
    std::size_t dropped_long = 0;
    recs = filter_rallies(std::move(recs), config.max_rally, &dropped_long);
    recs = filter_players(std::move(recs), config.min_matches);
    if (recs.empty()) throw EmptyAfterFiltersError("no points left after tour/rally/match filters");

    const DataSummary summary = summarize(recs);
    const Dataset full = build_dataset(recs);
    if (config.test_servers >= full.n_servers())
        throw EmptyAfterFiltersError("test split would hold out every server");
    const TrainTestSplit split = split_train_test(full, config.test_servers, config.split_seed);

    write_aggregated_csv(split.train, (out / "train.csv").string());
    write_players_json(split.train, (out / "players.json").string());
    write_aggregated_csv(split.test, (out / "test.csv").string());
    write_players_json(split.test, (out / "test_players.json").string());

    json s;
    for (const auto& [tour, stat] : summary.tours) {
        json t;
        for (const auto& [tournament, ts] : stat.tournaments)
            t["tournaments"][to_string(tournament)] = {{"matches", ts.matches}, {"players", ts.players}};
        t["points"] = stat.points;
        t["short_rallies"] = stat.short_rallies;
        t["long_rallies"] = stat.long_rallies;
        t["bucket_total"] = stat.bucket_total;
        t["bucket_win_freq"] = stat.bucket_win_freq;
        s["tours"][to_string(tour)] = std::move(t);
    }
    s["parse"] = {{"rows_total", parsed.report.rows_total},
                  {"rows_kept", parsed.report.rows_kept},
                  {"dropped_rally", parsed.report.dropped_rally},
                  {"dropped_winner", parsed.report.dropped_winner},
                  {"dropped_tournament", parsed.report.dropped_tournament},
                  {"dropped_tour", parsed.report.dropped_tour},
                  {"dropped_same_player", parsed.report.dropped_same_player},
                  {"dropped_long_rally", dropped_long}};
    s["train"] = {{"servers", split.train.n_servers()},
                  {"players", split.train.n_players()},
                  {"points", split.train.points.size()},
                  {"dataset_hash", dataset_hash(split.train)}};
    s["test"] = {{"servers", split.test.n_servers()},
                 {"players", split.test.n_players()},
                 {"points", split.test.points.size()},
                 {"server_names", split.test_servers}};
    s["config_echo"] = config_json(config);
    write_text(out / "summary.json", s.dump(2) + "\n");

    update_manifest(out, "ingest",
                    {{"config", config_json(config)},
                     {"outputs", {"train.csv", "players.json", "test.csv", "test_players.json", "summary.json"}},
                     {"dataset_hash", dataset_hash(split.train)}});

    std::cout << "ingest: " << split.train.points.size() << " train points, "
              << split.train.n_servers() << " train servers, " << split.test.n_servers()
              << " test servers, " << full.n_players() << " players\n";
    return 0;
}

int cmd_fit(const RunConfig& config) {
    const fs::path out(config.out_dir);
    fs::create_directories(out);
    const Dataset ds = read_aggregated((out / "train.csv").string(), (out / "players.json").string());
    const ModelConfig model = config.model();
    const std::string vname = to_string(model.variant);

    const auto t0 = std::chrono::steady_clock::now();
    const PosteriorDraws draws = run_chain(config.chain, ds, model);
    const MetricSet metrics = evaluate_fit(draws);
    const Diagnostics diag = diagnostics(draws);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    FitReport rep;
    rep.variant = vname;
    rep.court_effect = model.court_effect;
    rep.dataset_hash = dataset_hash(ds);
    rep.n_draws = static_cast<std::int64_t>(draws.n_draws());
    rep.n_chains = config.chain.n_chains;
    rep.n_iter = config.chain.n_iter;
    rep.burn_in = config.chain.burn_in;
    rep.thin = config.chain.thin;
    rep.seed = config.chain.seed;
    rep.metrics = metrics;
    for (const auto& [name, st] : draws.acceptance.blocks) rep.acceptance[name] = st.rate();
    rep.min_ess = diag.min_ess;
    rep.max_rhat = diag.max_rhat;
    rep.runtime_seconds = seconds;

    write_draws(draws, (out / ("draws_" + vname + ".bin")).string());

    // Human-readable parameter summary.
    {
        json pj;
        pj["variant"] = vname;
        pj["n_draws"] = rep.n_draws;
        pj["n_chains"] = rep.n_chains;
        json params = json::array();
        const std::size_t n = draws.n_draws();
        std::vector<double> col(n);
        for (std::size_t j = 0; j < draws.n_params(); ++j) {
            double mean = 0.0;
            for (std::size_t d = 0; d < n; ++d) {
                col[d] = draws.value(d, j);
                mean += col[d];
            }
            mean /= static_cast<double>(n);
            params.push_back({{"name", draws.param_names[j]},
                              {"mean", mean},
                              {"median", quantile(col, 0.5)},
                              {"lo", quantile(col, 0.025)},
                              {"hi", quantile(col, 0.975)},
                              {"ess", diag.ess[j]},
                              {"rhat", diag.rhat[j]}});
        }
        pj["params"] = std::move(params);
        pj["config_echo"] = config_json(config);
        write_text(out / ("draws_" + vname + ".json"), pj.dump(2) + "\n");
    }

    // Raw traces for external convergence checks.
    {
        auto f = open_out(out / ("traces_" + vname + ".csv"));
        f << "chain,draw";
        for (const auto& n : draws.param_names) f << ',' << n;
        f << '\n';
        const std::int64_t kept = draws.kept_per_chain;
        for (std::size_t d = 0; d < draws.n_draws(); ++d) {
            f << (kept > 0 ? static_cast<std::int64_t>(d) / kept : 0) << ','
              << (kept > 0 ? static_cast<std::int64_t>(d) % kept : 0);
            for (std::size_t j = 0; j < draws.n_params(); ++j) f << ',' << fmt(draws.value(d, j), "%.17g");
            f << '\n';
        }
    }

    json fr = json::parse(fit_report_to_json(rep));
    fr["config_echo"] = config_json(config);
    write_text(out / ("fit_report_" + vname + ".json"), fr.dump(2) + "\n");

    update_manifest(out, "fit:" + vname,
                    {{"config", config_json(config)},
                     {"outputs",
                      {"draws_" + vname + ".bin", "draws_" + vname + ".json",
                       "traces_" + vname + ".csv", "fit_report_" + vname + ".json"}},
                     {"dataset_hash", rep.dataset_hash}});

    std::cout << "fit(" << vname << "): " << rep.n_draws << " draws, lpml=" << fmt(metrics.lpml)
              << ", waic=" << fmt(metrics.waic) << ", dic=" << fmt(metrics.dic)
              << ", rmse=" << fmt(metrics.rmse) << ", max_rhat=" << fmt(rep.max_rhat, "%.3f")
              << "\n";
    if (config.strict && !(rep.max_rhat <= 1.1)) {
        std::cerr << "strict: max split R-hat " << fmt(rep.max_rhat, "%.3f") << " exceeds 1.1\n";
        return 1;
    }
    return 0;
}

int cmd_compare(const RunConfig& config, std::vector<std::string> report_paths) {
    const fs::path out(config.out_dir);
    fs::create_directories(out);
    if (report_paths.empty()) {
        for (const char* v : {"unconstrained", "partial", "full"}) {
            const fs::path p = out / (std::string("fit_report_") + v + ".json");
            if (fs::exists(p)) report_paths.push_back(p.string());
        }
    }
    if (report_paths.size() < 2)
        throw MissingDrawsError("compare needs at least two fit reports");

    std::vector<FitReport> reports;
    for (const auto& p : report_paths) {
        if (!fs::exists(p)) throw MissingDrawsError("fit report missing: " + p);
        reports.push_back(fit_report_from_json(read_text(p)));
    }
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].dataset_hash != reports[0].dataset_hash)
            throw CompareMismatchError("fit reports come from different datasets: " +
                                       reports[i].dataset_hash + " vs " + reports[0].dataset_hash);
    }

    double best_lpml = reports[0].metrics.lpml;
    double best_waic = reports[0].metrics.waic;
    double best_dic = reports[0].metrics.dic;
    double best_rmse = reports[0].metrics.rmse;
    for (const auto& r : reports) {
        best_lpml = std::max(best_lpml, r.metrics.lpml);
        best_waic = std::min(best_waic, r.metrics.waic);
        best_dic = std::min(best_dic, r.metrics.dic);
        best_rmse = std::min(best_rmse, r.metrics.rmse);
    }
    int n_selected = 0;
    for (const auto& r : reports) n_selected += r.metrics.lpml == best_lpml ? 1 : 0;
    const bool tie = n_selected > 1;

    {
        auto f = open_out(out / "table3.csv");
        f << "variant,court_effect,lpml,waic,dic,rmse,best_lpml,best_waic,best_dic,best_rmse,"
             "selected,tie\n";
        for (const auto& r : reports) {
            f << r.variant << ',' << (r.court_effect ? 1 : 0) << ',' << fmt(r.metrics.lpml) << ','
              << fmt(r.metrics.waic) << ',' << fmt(r.metrics.dic) << ',' << fmt(r.metrics.rmse)
              << ',' << (r.metrics.lpml == best_lpml ? 1 : 0) << ','
              << (r.metrics.waic == best_waic ? 1 : 0) << ',' << (r.metrics.dic == best_dic ? 1 : 0)
              << ',' << (r.metrics.rmse == best_rmse ? 1 : 0) << ','
              << (r.metrics.lpml == best_lpml ? 1 : 0) << ',' << (tie ? 1 : 0) << '\n';
        }
    }

    json inputs = json::array();
    for (const auto& p : report_paths) inputs.push_back(p);
    update_manifest(out, "compare",
                    {{"config", config_json(config)},
                     {"inputs", inputs},
                     {"outputs", {"table3.csv"}},
                     {"dataset_hash", reports[0].dataset_hash}});

    std::string selected;
    for (const auto& r : reports)
        if (r.metrics.lpml == best_lpml) {
            selected = r.variant;
            break;
        }
    std::cout << "compare: selected " << selected << " by LPML" << (tie ? " (tie)" : "") << "\n";
    return 0;
}

namespace {

std::vector<Court> report_courts(const ModelConfig& model) {
    if (model.court_effect) return {Court::Clay, Court::Grass, Court::Hard};
    return {Court::Hard};
}

const char* court_label(const ModelConfig& model, Court c) {
    return model.court_effect ? court_name(c) : "all";
}

}  // namespace

int cmd_predict(const RunConfig& config) {
    const fs::path out(config.out_dir);
    fs::create_directories(out);
    const std::string vname = to_string(config.variant);
    const PosteriorDraws draws = read_draws((out / ("draws_" + vname + ".bin")).string());
    const Dataset test =
        read_aggregated((out / "test.csv").string(), (out / "test_players.json").string());

    std::vector<std::string> targets = test.server_names;
    for (const auto& name : config.predict_players)
        if (std::find(targets.begin(), targets.end(), name) == targets.end())
            targets.push_back(name);

    const auto grid = default_grid(draws.model.spec);
    const auto courts = report_courts(draws.model);

    auto f = open_out(out / "predictions.csv");
    f << "player,known_player,court,kind,s,value,lo,hi\n";
    if (targets.empty())
        std::cerr << "predict: empty test set and no predict_players; artifact is header-only\n";

    std::uint64_t stream = config.chain.seed + static_cast<std::uint64_t>(config.chain.n_chains);
    for (const auto& name : targets) {
        for (Court c : courts) {
            const PredictionSummary ps = predict_new_server(draws, name, grid, c, stream++);
            const char* lab = court_label(draws.model, c);
            for (std::size_t g = 0; g < ps.curve.grid.size(); ++g) {
                f << name << ',' << (ps.known_player ? 1 : 0) << ',' << lab << ",curve,"
                  << fmt(ps.curve.grid[g], "%.1f") << ',' << fmt(ps.curve.mean[g]) << ','
                  << fmt(ps.curve.lo[g]) << ',' << fmt(ps.curve.hi[g]) << '\n';
            }
            f << name << ',' << (ps.known_player ? 1 : 0) << ',' << lab << ",advantage,,"
              << fmt(ps.advantage.median) << ',' << fmt(ps.advantage.lo) << ','
              << fmt(ps.advantage.hi) << '\n';
        }
    }

    update_manifest(out, "predict",
                    {{"config", config_json(config)},
                     {"outputs", {"predictions.csv"}},
                     {"targets", targets}});
    std::cout << "predict: " << targets.size() << " servers\n";
    return 0;
}

int cmd_report(const RunConfig& config) {
    const fs::path out(config.out_dir);
    fs::create_directories(out);
    const std::string vname = to_string(config.variant);
    const PosteriorDraws draws = read_draws((out / ("draws_" + vname + ".bin")).string());
    const auto grid = default_grid(draws.model.spec);
    const auto courts = report_courts(draws.model);

    {
        auto f = open_out(out / "curves.csv");
        f << "server,court,s,mean,lo,hi\n";
        for (int i = 0; i < draws.n_servers; ++i) {
            for (Court c : courts) {
                const CurveSummary cs = curve_summary(draws, i, grid, c);
                for (std::size_t g = 0; g < cs.grid.size(); ++g) {
                    f << draws.server_names[i] << ',' << court_label(draws.model, c) << ','
                      << fmt(cs.grid[g], "%.1f") << ',' << fmt(cs.mean[g]) << ',' << fmt(cs.lo[g])
                      << ',' << fmt(cs.hi[g]) << '\n';
                }
            }
        }
    }
    {
        auto f = open_out(out / "scatter.csv");
        f << "player,court,alpha_median,alpha_lo,alpha_hi,advantage_median,advantage_lo,"
             "advantage_hi,zero_excluded\n";
        for (Court c : courts) {
            for (const auto& p : scatter_data(draws, c)) {
                if (config.filter_zero && !p.zero_excluded) continue;
                f << p.player << ',' << court_label(draws.model, c) << ',' << fmt(p.alpha.median)
                  << ',' << fmt(p.alpha.lo) << ',' << fmt(p.alpha.hi) << ','
                  << fmt(p.advantage.median) << ',' << fmt(p.advantage.lo) << ','
                  << fmt(p.advantage.hi) << ',' << (p.zero_excluded ? 1 : 0) << '\n';
            }
        }
    }
    {
        auto f = open_out(out / "ranking.csv");
        f << "court,rank,player,alpha_median,alpha_lo,alpha_hi\n";
        for (Court c : courts) {
            int rank = 1;
            for (const auto& r : rank_rally_ability(draws, c)) {
                f << court_label(draws.model, c) << ',' << rank++ << ',' << r.player << ','
                  << fmt(r.median) << ',' << fmt(r.lo) << ',' << fmt(r.hi) << '\n';
            }
        }
    }

    update_manifest(out, "report:" + vname,
                    {{"config", config_json(config)},
                     {"outputs", {"curves.csv", "scatter.csv", "ranking.csv"}}});
    std::cout << "report(" << vname << "): " << draws.n_servers << " curves, "
              << draws.n_players << " ranked players\n";
    return 0;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"Serve-advantage decay curves and rally abilities from point-by-point tennis data"};
    app.require_subcommand(1);

    std::string config_path, out_dir, variant_s, tour_s, input_csv;
    std::uint64_t seed = 0;
    bool strict = false;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "output directory (overrides config)");
    app.add_option("--variant", variant_s, "model variant")
        ->check(CLI::IsMember({"unconstrained", "partial", "full"}));
    app.add_option("--tour", tour_s, "tour filter")->check(CLI::IsMember({"atp", "wta"}));
    auto* seed_opt = app.add_option("--seed", seed, "chain seed (overrides config)");
    app.add_flag("--strict", strict, "fail fit when any split R-hat exceeds 1.1");

    auto* ing = app.add_subcommand("ingest", "parse, filter, aggregate and split the raw CSV");
    ing->add_option("input", input_csv, "raw point-by-point CSV (overrides config input_csv)");
    auto* fit = app.add_subcommand("fit", "run the sampler on the aggregated training data");
    std::vector<std::string> report_paths;
    auto* cmp = app.add_subcommand("compare", "rank fitted variants by predictive criteria");
    cmp->add_option("reports", report_paths, "fit report JSON files (default: all in out dir)");
    auto* prd = app.add_subcommand("predict", "posterior predictive curves for held-out servers");
    auto* rep = app.add_subcommand("report", "curve, scatter and ranking tables for a fit");
    for (auto* sub : {ing, fit, cmp, prd, rep}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        RunConfig cfg = load_config(config_path);
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!variant_s.empty()) cfg.variant = variant_from_string(variant_s);
        if (!tour_s.empty()) {
            cfg.tour = tour_from_string(tour_s);
            cfg.schema.default_tour = cfg.tour;
        }
        if (seed_opt->count() > 0) cfg.chain.seed = seed;
        if (strict) cfg.strict = true;
        if (!input_csv.empty()) cfg.input_csv = input_csv;

        if (app.got_subcommand(ing)) return cmd_ingest(cfg);
        if (app.got_subcommand(fit)) return cmd_fit(cfg);
        if (app.got_subcommand(cmp)) return cmd_compare(cfg, report_paths);
        if (app.got_subcommand(prd)) return cmd_predict(cfg);
        if (app.got_subcommand(rep)) return cmd_report(cfg);
        std::cerr << "error: no subcommand\n";
        return 1;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const EmptyAfterFiltersError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const SamplerInitError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const CompareMismatchError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const MissingDrawsError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 6;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace serveadv
