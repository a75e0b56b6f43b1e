#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace serveadv {

enum class Tour { ATP, WTA };

enum class Tournament { AusOpen, FrenchOpen, USOpen, Wimbledon };

enum class Court : int { Clay = 1, Grass = 2, Hard = 3 };

/// Court surface played at each tournament.
Court court_of(Tournament t);

/// Rally-length bucket: pairs of shots collapse together and everything
/// from 28 strokes up shares the top bucket. Maps 0 and 1 to bucket 1,
/// 2 and 3 to bucket 2, ..., capped at 15. Requires raw >= 0.
int aggregate_rally(int raw);

const char* to_string(Tour t);
const char* to_string(Tournament t);

/// One serve point as read from the scrape: who served, who received, how
/// long the rally ran, and whether the server won it.
struct RawPointRecord {
    std::string server;
    std::string receiver;
    std::string match_id;
    Tournament tournament = Tournament::AusOpen;
    Tour tour = Tour::ATP;
    int rally = 0;
    bool server_won = false;
};

/// Column names and value encodings for the input CSV. The winner cell is
/// recognized either by the listed flag values or by matching the server or
/// receiver cell verbatim.
struct SchemaConfig {
    std::string server_col = "server";
    std::string receiver_col = "receiver";
    std::string rally_col = "rally";
    std::string winner_col = "winner";
    std::string tournament_col = "tournament";
    std::string match_col = "match_id";
    std::string tour_col;  // optional; empty means use default_tour
    std::vector<std::string> winner_server_values = {"1", "s", "server", "true"};
    std::vector<std::string> winner_receiver_values = {"0", "2", "r", "receiver", "false"};
    Tour default_tour = Tour::ATP;
};

/// Per-file ingestion tally. Rows can drop for an unparseable rally count,
/// an unrecognizable winner, an unknown tournament, or a server identical
/// to the receiver; each cause is counted separately.
struct ParseReport {
    std::size_t rows_total = 0;
    std::size_t rows_kept = 0;
    std::size_t dropped_rally = 0;
    std::size_t dropped_winner = 0;
    std::size_t dropped_tournament = 0;
    std::size_t dropped_tour = 0;
    std::size_t dropped_same_player = 0;

    std::size_t dropped() const {
        return dropped_rally + dropped_winner + dropped_tournament + dropped_tour + dropped_same_player;
    }
};

struct ParsedPoints {
    std::vector<RawPointRecord> records;
    ParseReport report;
};

/// Reads the point-by-point CSV. Throws SchemaError when the file is
/// missing or empty, when a configured column is absent, or when more than
/// half of the data rows drop.
ParsedPoints parse_points_csv(const std::string& path, const SchemaConfig& schema);

/// Keeps rows with 0 <= rally <= max_rally. Longer rallies are recording
/// artifacts in the scrape and are discarded, not clamped.
std::vector<RawPointRecord> filter_rallies(std::vector<RawPointRecord> records, int max_rally,
                                           std::size_t* dropped = nullptr);

/// Keeps rows whose server appears in at least min_matches distinct matches
/// as the serving player.
std::vector<RawPointRecord> filter_players(std::vector<RawPointRecord> records, int min_matches);

/// One aggregated observation: server (index into server_names), receiver
/// (index into player_names), rally bucket x, server-win indicator y, and
/// the court surface.
struct AggregatedPoint {
    std::int32_t server = 0;
    std::int32_t receiver = 0;
    std::int16_t x = 0;
    std::int16_t y = 0;
    Court court = Court::Hard;
};

/// Indexed point set. Server indices and player indices are separate
/// spaces: every server is also a player, via server_player. Names are
/// sorted, so index assignment is deterministic.
struct Dataset {
    std::vector<AggregatedPoint> points;
    std::vector<std::string> server_names;   // server index -> name
    std::vector<std::string> player_names;   // player index -> name
    std::vector<std::int32_t> server_player; // server index -> player index

    int n_servers() const { return static_cast<int>(server_names.size()); }
    int n_players() const { return static_cast<int>(player_names.size()); }

    /// Win / total tallies per (server, bucket), buckets 1..15.
    struct CellCount {
        std::int64_t wins = 0;
        std::int64_t total = 0;
    };
    CellCount count_for(int server, int x) const;
};

/// Buckets rally lengths and indexes players by sorted name.
Dataset build_dataset(const std::vector<RawPointRecord>& records);

struct TrainTestSplit {
    Dataset train;
    Dataset test;
    std::vector<std::string> test_servers;
};

/// Holds out n_test_servers whole servers (all their service points) chosen
/// by seeded draw. Both halves keep the full player index space so rally
/// abilities learned on train apply to test. Throws std::invalid_argument
/// when n_test_servers is not below the server count.
TrainTestSplit split_train_test(const Dataset& full, int n_test_servers, std::uint64_t seed);

/// Descriptive tallies used for the ingest summary.
struct DataSummary {
    struct TournamentStat {
        std::size_t matches = 0;
        std::size_t players = 0;
    };
    struct TourStat {
        std::map<Tournament, TournamentStat> tournaments;
        std::size_t points = 0;
        std::size_t short_rallies = 0;  // raw length <= 4
        std::size_t long_rallies = 0;
        std::vector<double> bucket_win_freq;    // index 0 -> bucket 1
        std::vector<std::size_t> bucket_total;  // observations per bucket
    };
    std::map<Tour, TourStat> tours;
};

/// Summary over filtered raw records (raw rally lengths are needed for the
/// short/long split, so this runs before aggregation discards them).
DataSummary summarize(const std::vector<RawPointRecord>& records);

/// Canonical aggregated CSV: header server_index,receiver_index,x,y,court.
void write_aggregated_csv(const Dataset& ds, const std::string& path);

/// players.json companion: server and player name tables plus the
/// server -> player index map.
void write_players_json(const Dataset& ds, const std::string& path);

/// Rebuilds a Dataset from the canonical CSV and its players.json. Throws
/// SchemaError on malformed input or out-of-range indices.
Dataset read_aggregated(const std::string& csv_path, const std::string& players_path);

/// Content hash of the aggregated points and name tables (FNV-1a, hex).
/// Split, variant, and sampler settings do not affect it.
std::string dataset_hash(const Dataset& ds);

}  // namespace serveadv
