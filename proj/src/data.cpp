#include "serveadv/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "serveadv/errors.hpp"
#include "serveadv/rng.hpp"

namespace serveadv {

namespace {

constexpr int kMaxBucket = 15;

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Lowercased with everything but letters and digits removed; label matching
// is insensitive to case, spaces and punctuation.
std::string normalize_label(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

bool parse_tournament(const std::string& raw, Tournament* out) {
    static const std::map<std::string, Tournament> aliases = {
        {"ausopen", Tournament::AusOpen},     {"australianopen", Tournament::AusOpen},
        {"australian", Tournament::AusOpen},  {"frenchopen", Tournament::FrenchOpen},
        {"rolandgarros", Tournament::FrenchOpen}, {"french", Tournament::FrenchOpen},
        {"usopen", Tournament::USOpen},       {"wimbledon", Tournament::Wimbledon},
    };
    const auto it = aliases.find(normalize_label(raw));
    if (it == aliases.end()) return false;
    *out = it->second;
    return true;
}

bool parse_tour(const std::string& raw, Tour* out) {
    const std::string n = normalize_label(raw);
    if (n == "atp" || n == "m" || n == "men" || n == "mens") {
        *out = Tour::ATP;
        return true;
    }
    if (n == "wta" || n == "w" || n == "women" || n == "womens") {
        *out = Tour::WTA;
        return true;
    }
    return false;
}

bool parse_int(const std::string& raw, int* out) {
    const std::string t = trim(raw);
    if (t.empty()) return false;
    int value = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
    if (ec != std::errc() || ptr != t.data() + t.size()) return false;
    *out = value;
    return true;
}

// One CSV line into fields; supports double-quoted fields with "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::string& path) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == name) return i;
    }
    throw SchemaError("column '" + name + "' not found in " + path);
}

bool in_list(const std::string& normalized, const std::vector<std::string>& values) {
    for (const auto& v : values) {
        if (normalized == normalize_label(v)) return true;
    }
    return false;
}

}  // namespace

Court court_of(Tournament t) {
    switch (t) {
        case Tournament::AusOpen: return Court::Hard;
        case Tournament::USOpen: return Court::Hard;
        case Tournament::FrenchOpen: return Court::Clay;
        case Tournament::Wimbledon: return Court::Grass;
    }
    throw std::invalid_argument("unknown tournament");
}

int aggregate_rally(int raw) {
    if (raw < 0) throw std::invalid_argument("rally length must be non-negative");
    return std::min(raw / 2 + 1, kMaxBucket);
}

const char* to_string(Tour t) { return t == Tour::ATP ? "atp" : "wta"; }

const char* to_string(Tournament t) {
    switch (t) {
        case Tournament::AusOpen: return "AusOpen";
        case Tournament::FrenchOpen: return "FrenchOpen";
        case Tournament::USOpen: return "USOpen";
        case Tournament::Wimbledon: return "Wimbledon";
    }
    return "?";
}

ParsedPoints parse_points_csv(const std::string& path, const SchemaConfig& schema) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open input file " + path);

    std::string line;
    if (!std::getline(in, line)) throw SchemaError("input file is empty: " + path);
    const auto header = split_csv_line(line);

    const std::size_t c_server = column_index(header, schema.server_col, path);
    const std::size_t c_receiver = column_index(header, schema.receiver_col, path);
    const std::size_t c_rally = column_index(header, schema.rally_col, path);
    const std::size_t c_winner = column_index(header, schema.winner_col, path);
    const std::size_t c_tournament = column_index(header, schema.tournament_col, path);
    const std::size_t c_match = column_index(header, schema.match_col, path);
    const bool has_tour = !schema.tour_col.empty();
    const std::size_t c_tour = has_tour ? column_index(header, schema.tour_col, path) : 0;

    ParsedPoints out;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        auto field = [&](std::size_t i) { return i < fields.size() ? trim(fields[i]) : std::string(); };
        ++out.report.rows_total;

        RawPointRecord rec;
        rec.server = field(c_server);
        rec.receiver = field(c_receiver);
        rec.match_id = field(c_match);
        if (rec.server.empty() || rec.receiver.empty() || rec.server == rec.receiver) {
            ++out.report.dropped_same_player;
            continue;
        }
        if (!parse_int(field(c_rally), &rec.rally) || rec.rally < 0) {
            ++out.report.dropped_rally;
            continue;
        }
        if (!parse_tournament(field(c_tournament), &rec.tournament)) {
            ++out.report.dropped_tournament;
            continue;
        }
        if (has_tour) {
            if (!parse_tour(field(c_tour), &rec.tour)) {
                ++out.report.dropped_tour;
                continue;
            }
        } else {
            rec.tour = schema.default_tour;
        }

        const std::string winner_raw = field(c_winner);
        const std::string winner_norm = normalize_label(winner_raw);
        if (in_list(winner_norm, schema.winner_server_values) || winner_raw == rec.server) {
            rec.server_won = true;
        } else if (in_list(winner_norm, schema.winner_receiver_values) || winner_raw == rec.receiver) {
            rec.server_won = false;
        } else {
            ++out.report.dropped_winner;
            continue;
        }

        ++out.report.rows_kept;
        out.records.push_back(std::move(rec));
    }

    if (out.report.rows_total > 0 && out.report.dropped() * 2 > out.report.rows_total) {
        std::ostringstream msg;
        msg << "more than half of the rows were unusable (" << out.report.dropped() << " of "
            << out.report.rows_total << ") in " << path;
        throw SchemaError(msg.str());
    }
    return out;
}

std::vector<RawPointRecord> filter_rallies(std::vector<RawPointRecord> records, int max_rally,
                                           std::size_t* dropped) {
    std::vector<RawPointRecord> kept;
    kept.reserve(records.size());
    std::size_t n_dropped = 0;
    for (auto& r : records) {
        if (r.rally >= 0 && r.rally <= max_rally) {
            kept.push_back(std::move(r));
        } else {
            ++n_dropped;
        }
    }
    if (dropped != nullptr) *dropped = n_dropped;
    return kept;
}

std::vector<RawPointRecord> filter_players(std::vector<RawPointRecord> records, int min_matches) {
    std::map<std::string, std::set<std::string>> matches_of;
    for (const auto& r : records) matches_of[r.server].insert(r.match_id);
    std::vector<RawPointRecord> kept;
    kept.reserve(records.size());
    for (auto& r : records) {
        if (static_cast<int>(matches_of[r.server].size()) >= min_matches) kept.push_back(std::move(r));
    }
    return kept;
}

Dataset::CellCount Dataset::count_for(int server, int x) const {
    CellCount c;
    for (const auto& p : points) {
        if (p.server == server && p.x == x) {
            c.total += 1;
            c.wins += p.y;
        }
    }
    return c;
}

Dataset build_dataset(const std::vector<RawPointRecord>& records) {
    std::set<std::string> server_set;
    std::set<std::string> player_set;
    for (const auto& r : records) {
        server_set.insert(r.server);
        player_set.insert(r.server);
        player_set.insert(r.receiver);
    }

    Dataset ds;
    ds.server_names.assign(server_set.begin(), server_set.end());
    ds.player_names.assign(player_set.begin(), player_set.end());

    std::map<std::string, std::int32_t> server_idx;
    std::map<std::string, std::int32_t> player_idx;
    for (std::size_t i = 0; i < ds.server_names.size(); ++i)
        server_idx[ds.server_names[i]] = static_cast<std::int32_t>(i);
    for (std::size_t i = 0; i < ds.player_names.size(); ++i)
        player_idx[ds.player_names[i]] = static_cast<std::int32_t>(i);

    ds.server_player.resize(ds.server_names.size());
    for (std::size_t i = 0; i < ds.server_names.size(); ++i)
        ds.server_player[i] = player_idx[ds.server_names[i]];

    ds.points.reserve(records.size());
    for (const auto& r : records) {
        AggregatedPoint p;
        p.server = server_idx[r.server];
        p.receiver = player_idx[r.receiver];
        p.x = static_cast<std::int16_t>(aggregate_rally(r.rally));
        p.y = r.server_won ? 1 : 0;
        p.court = court_of(r.tournament);
        ds.points.push_back(p);
    }
    return ds;
}

TrainTestSplit split_train_test(const Dataset& full, int n_test_servers, std::uint64_t seed) {
    const int n_s = full.n_servers();
    if (n_test_servers < 0) throw std::invalid_argument("held-out server count must be non-negative");
    if (n_test_servers >= n_s && !(n_test_servers == 0 && n_s == 0))
        throw std::invalid_argument("held-out server count must be below the number of servers");

    Rng rng(seed);
    const auto held = rng.sample_without_replacement(static_cast<std::size_t>(n_s),
                                                     static_cast<std::size_t>(n_test_servers));
    std::vector<bool> is_test(n_s, false);
    for (std::size_t i : held) is_test[i] = true;

    TrainTestSplit split;
    // Player space is shared; only the server tables are re-indexed.
    split.train.player_names = full.player_names;
    split.test.player_names = full.player_names;

    std::vector<std::int32_t> new_index(n_s, -1);
    for (int s = 0; s < n_s; ++s) {
        Dataset& side = is_test[s] ? split.test : split.train;
        new_index[s] = static_cast<std::int32_t>(side.server_names.size());
        side.server_names.push_back(full.server_names[s]);
        side.server_player.push_back(full.server_player[s]);
        if (is_test[s]) split.test_servers.push_back(full.server_names[s]);
    }
    for (const auto& p : full.points) {
        Dataset& side = is_test[p.server] ? split.test : split.train;
        AggregatedPoint q = p;
        q.server = new_index[p.server];
        side.points.push_back(q);
    }
    return split;
}

DataSummary summarize(const std::vector<RawPointRecord>& records) {
    DataSummary out;
    std::map<std::pair<Tour, Tournament>, std::set<std::string>> matches;
    std::map<std::pair<Tour, Tournament>, std::set<std::string>> players;
    std::map<Tour, std::vector<std::pair<std::size_t, std::size_t>>> buckets;  // (wins, total)

    for (const auto& r : records) {
        auto& tour = out.tours[r.tour];
        tour.points += 1;
        if (r.rally <= 4) {
            tour.short_rallies += 1;
        } else {
            tour.long_rallies += 1;
        }
        const auto key = std::make_pair(r.tour, r.tournament);
        matches[key].insert(r.match_id);
        players[key].insert(r.server);
        players[key].insert(r.receiver);

        auto& b = buckets[r.tour];
        if (b.empty()) b.assign(kMaxBucket, {0, 0});
        const int x = aggregate_rally(r.rally);
        b[x - 1].second += 1;
        b[x - 1].first += r.server_won ? 1 : 0;
    }

    for (auto& [key, match_set] : matches) {
        auto& stat = out.tours[key.first].tournaments[key.second];
        stat.matches = match_set.size();
        stat.players = players[key].size();
    }
    for (auto& [tour, stat] : out.tours) {
        const auto& b = buckets[tour];
        stat.bucket_win_freq.assign(kMaxBucket, 0.0);
        stat.bucket_total.assign(kMaxBucket, 0);
        for (int i = 0; i < kMaxBucket; ++i) {
            stat.bucket_total[i] = b[i].second;
            stat.bucket_win_freq[i] =
                b[i].second == 0 ? 0.0 : static_cast<double>(b[i].first) / static_cast<double>(b[i].second);
        }
    }
    return out;
}

void write_aggregated_csv(const Dataset& ds, const std::string& path) {
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("cannot write " + path);
    outf << "server_index,receiver_index,x,y,court\n";
    for (const auto& p : ds.points) {
        outf << p.server << ',' << p.receiver << ',' << p.x << ',' << p.y << ','
             << static_cast<int>(p.court) << '\n';
    }
    if (!outf) throw std::runtime_error("failed writing " + path);
}

void write_players_json(const Dataset& ds, const std::string& path) {
    nlohmann::json j;
    j["servers"] = ds.server_names;
    j["players"] = ds.player_names;
    j["server_player"] = ds.server_player;
    std::ofstream outf(path);
    if (!outf) throw std::runtime_error("cannot write " + path);
    outf << j.dump(2) << '\n';
}

Dataset read_aggregated(const std::string& csv_path, const std::string& players_path) {
    Dataset ds;
    {
        std::ifstream in(players_path);
        if (!in) throw SchemaError("cannot open player table " + players_path);
        nlohmann::json j;
        try {
            in >> j;
            ds.server_names = j.at("servers").get<std::vector<std::string>>();
            ds.player_names = j.at("players").get<std::vector<std::string>>();
            ds.server_player = j.at("server_player").get<std::vector<std::int32_t>>();
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError("malformed player table " + players_path + ": " + e.what());
        }
        if (ds.server_player.size() != ds.server_names.size())
            throw SchemaError("player table size mismatch in " + players_path);
        for (auto p : ds.server_player) {
            if (p < 0 || p >= ds.n_players())
                throw SchemaError("server to player map out of range in " + players_path);
        }
    }

    std::ifstream in(csv_path);
    if (!in) throw SchemaError("cannot open aggregated points " + csv_path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != "server_index,receiver_index,x,y,court")
        throw SchemaError("unexpected header in " + csv_path);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto fields = split_csv_line(line);
        int v[5];
        if (fields.size() != 5 || !parse_int(fields[0], &v[0]) || !parse_int(fields[1], &v[1]) ||
            !parse_int(fields[2], &v[2]) || !parse_int(fields[3], &v[3]) || !parse_int(fields[4], &v[4]))
            throw SchemaError("malformed row " + std::to_string(lineno) + " in " + csv_path);
        if (v[0] < 0 || v[0] >= ds.n_servers() || v[1] < 0 || v[1] >= ds.n_players() || v[2] < 1 ||
            v[2] > kMaxBucket || (v[3] != 0 && v[3] != 1) || v[4] < 1 || v[4] > 3)
            throw SchemaError("out-of-range row " + std::to_string(lineno) + " in " + csv_path);
        AggregatedPoint p;
        p.server = v[0];
        p.receiver = v[1];
        p.x = static_cast<std::int16_t>(v[2]);
        p.y = static_cast<std::int16_t>(v[3]);
        p.court = static_cast<Court>(v[4]);
        ds.points.push_back(p);
    }
    return ds;
}

std::string dataset_hash(const Dataset& ds) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix_byte = [&h](unsigned char b) {
        h ^= b;
        h *= 1099511628211ull;
    };
    auto mix_int = [&](std::int64_t v) {
        for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
    };
    auto mix_str = [&](const std::string& s) {
        for (char c : s) mix_byte(static_cast<unsigned char>(c));
        mix_byte(0);
    };
    mix_int(ds.n_servers());
    mix_int(ds.n_players());
    for (const auto& s : ds.server_names) mix_str(s);
    for (const auto& s : ds.player_names) mix_str(s);
    for (auto p : ds.server_player) mix_int(p);
    for (const auto& p : ds.points) {
        mix_int(p.server);
        mix_int(p.receiver);
        mix_int(p.x);
        mix_int(p.y);
        mix_int(static_cast<int>(p.court));
    }
    std::ostringstream hex;
    hex << std::hex;
    for (int i = 15; i >= 0; --i) hex << ((h >> (4 * i)) & 0xf);
    return hex.str();
}

}  // namespace serveadv
