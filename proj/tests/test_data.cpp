#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "serveadv/data.hpp"
#include "serveadv/errors.hpp"

using namespace serveadv;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    static int counter = 0;
    fs::path dir = fs::temp_directory_path() / ("serveadv_data_test_" + std::to_string(++counter));
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& p, const std::string& body) {
    std::ofstream out(p);
    out << body;
}

std::string points_header() {
    return "server,receiver,rally,winner,tournament,match_id\n";
}

RawPointRecord rec(std::string server, std::string receiver, int rally, bool won,
                   std::string match = "m1", Tournament t = Tournament::AusOpen) {
    RawPointRecord r;
    r.server = std::move(server);
    r.receiver = std::move(receiver);
    r.rally = rally;
    r.server_won = won;
    r.match_id = std::move(match);
    r.tournament = t;
    return r;
}

}  // namespace

TEST_CASE("rally lengths bucket in pairs with a cap") {
    CHECK(aggregate_rally(0) == 1);
    CHECK(aggregate_rally(1) == 1);
    CHECK(aggregate_rally(2) == 2);
    CHECK(aggregate_rally(3) == 2);
    CHECK(aggregate_rally(4) == 3);
    CHECK(aggregate_rally(26) == 14);
    CHECK(aggregate_rally(27) == 14);
    CHECK(aggregate_rally(28) == 15);
    CHECK(aggregate_rally(29) == 15);
    CHECK(aggregate_rally(30) == 15);
    CHECK(aggregate_rally(100) == 15);
}

TEST_CASE("tournament surfaces") {
    CHECK(court_of(Tournament::FrenchOpen) == Court::Clay);
    CHECK(court_of(Tournament::Wimbledon) == Court::Grass);
    CHECK(court_of(Tournament::AusOpen) == Court::Hard);
    CHECK(court_of(Tournament::USOpen) == Court::Hard);
}

TEST_CASE("csv parsing recognizes winners by flag or by name") {
    const fs::path dir = temp_dir();
    const fs::path csv = dir / "points.csv";
    write_file(csv, points_header() +
                        "A,B,3,1,ausopen,m1\n"        // flag: server won
                        "A,B,5,0,ausopen,m1\n"        // flag: receiver won
                        "B,A,2,B,wimbledon,m2\n"      // name matches server
                        "B,A,4,A,wimbledon,m2\n"      // name matches receiver
                        "\"C\",\"D\",1,server,usopen,\"m3\"\n");  // quoted cells
    const ParsedPoints parsed = parse_points_csv(csv.string(), SchemaConfig{});
    REQUIRE(parsed.records.size() == 5);
    CHECK(parsed.report.rows_total == 5);
    CHECK(parsed.report.rows_kept == 5);
    CHECK(parsed.report.dropped() == 0);
    CHECK(parsed.records[0].server_won);
    CHECK_FALSE(parsed.records[1].server_won);
    CHECK(parsed.records[2].server_won);
    CHECK_FALSE(parsed.records[3].server_won);
    CHECK(parsed.records[4].server_won);
    CHECK(parsed.records[2].tournament == Tournament::Wimbledon);
    CHECK(parsed.records[4].server == "C");
    CHECK(parsed.records[4].match_id == "m3");
}

TEST_CASE("csv parsing counts each drop cause separately") {
    const fs::path dir = temp_dir();
    const fs::path csv = dir / "points.csv";
    write_file(csv, points_header() +
                        "A,B,3,1,ausopen,m1\n"
                        "A,B,notanumber,1,ausopen,m1\n"  // bad rally
                        "A,B,3,maybe,ausopen,m1\n"        // bad winner
                        "A,B,3,1,davis_cup,m1\n"          // unknown tournament
                        "A,A,3,1,ausopen,m1\n"            // server == receiver
                        "A,B,4,0,usopen,m2\n"
                        "A,B,4,0,usopen,m2\n"
                        "B,A,2,1,usopen,m2\n"
                        "B,A,6,0,usopen,m2\n");
    const ParsedPoints parsed = parse_points_csv(csv.string(), SchemaConfig{});
    CHECK(parsed.report.rows_total == 9);
    CHECK(parsed.report.rows_kept == 5);
    CHECK(parsed.report.dropped_rally == 1);
    CHECK(parsed.report.dropped_winner == 1);
    CHECK(parsed.report.dropped_tournament == 1);
    CHECK(parsed.report.dropped_same_player == 1);
}

TEST_CASE("csv schema errors name the offending column") {
    const fs::path dir = temp_dir();
    const fs::path csv = dir / "points.csv";
    write_file(csv, "server,receiver,rally,tournament,match_id\nA,B,3,ausopen,m1\n");
    try {
        parse_points_csv(csv.string(), SchemaConfig{});
        FAIL("missing column should throw");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("winner") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_points_csv((dir / "absent.csv").string(), SchemaConfig{}), SchemaError);
    write_file(dir / "empty.csv", "");
    CHECK_THROWS_AS(parse_points_csv((dir / "empty.csv").string(), SchemaConfig{}), SchemaError);
}

TEST_CASE("csv parsing rejects files where most rows drop") {
    const fs::path dir = temp_dir();
    const fs::path csv = dir / "points.csv";
    write_file(csv, points_header() +
                        "A,B,3,1,ausopen,m1\n"
                        "A,B,x,1,ausopen,m1\n"
                        "A,B,y,1,ausopen,m1\n"
                        "A,B,z,1,ausopen,m1\n");
    CHECK_THROWS_AS(parse_points_csv(csv.string(), SchemaConfig{}), SchemaError);
}

TEST_CASE("tour column filters when configured") {
    const fs::path dir = temp_dir();
    const fs::path csv = dir / "points.csv";
    write_file(csv, "server,receiver,rally,winner,tournament,match_id,tour\n"
                    "A,B,3,1,ausopen,m1,atp\n"
                    "C,D,3,1,ausopen,m2,wta\n"
                    "E,F,3,1,ausopen,m3,atp\n");
    SchemaConfig schema;
    schema.tour_col = "tour";
    const ParsedPoints parsed = parse_points_csv(csv.string(), schema);
    REQUIRE(parsed.records.size() == 3);
    CHECK(parsed.records[0].tour == Tour::ATP);
    CHECK(parsed.records[1].tour == Tour::WTA);
}

TEST_CASE("rally filter keeps only plausible lengths") {
    std::vector<RawPointRecord> records = {rec("A", "B", 0, true), rec("A", "B", 30, true),
                                           rec("A", "B", 31, true), rec("A", "B", 55, true)};
    std::size_t dropped = 0;
    const auto kept = filter_rallies(std::move(records), 30, &dropped);
    CHECK(kept.size() == 2);
    CHECK(dropped == 2);
    CHECK(kept[0].rally == 0);
    CHECK(kept[1].rally == 30);
}

TEST_CASE("player filter requires a minimum of distinct matches served") {
    std::vector<RawPointRecord> records;
    // A serves in three matches, B in two, C in one.
    for (int m = 1; m <= 3; ++m)
        for (int i = 0; i < 2; ++i) records.push_back(rec("A", "B", 3, true, "am" + std::to_string(m)));
    for (int m = 1; m <= 2; ++m) records.push_back(rec("B", "A", 3, false, "bm" + std::to_string(m)));
    records.push_back(rec("C", "A", 3, true, "cm1"));
    const auto kept = filter_players(records, 3);
    REQUIRE(kept.size() == 6);
    for (const auto& r : kept) CHECK(r.server == "A");
}

TEST_CASE("dataset building is deterministic and indexes by sorted name") {
    std::vector<RawPointRecord> records = {
        rec("Zoe", "Amy", 3, true, "m1", Tournament::Wimbledon),
        rec("Amy", "Zoe", 5, false, "m1", Tournament::Wimbledon),
        rec("Amy", "Kim", 0, true, "m2", Tournament::FrenchOpen),
    };
    const Dataset ds = build_dataset(records);
    REQUIRE(ds.server_names == std::vector<std::string>{"Amy", "Zoe"});
    REQUIRE(ds.player_names == std::vector<std::string>{"Amy", "Kim", "Zoe"});
    REQUIRE(ds.server_player == std::vector<std::int32_t>{0, 2});
    REQUIRE(ds.points.size() == 3);
    // records keep their order; indices and buckets are derived
    CHECK(ds.points[0].server == 1);
    CHECK(ds.points[0].receiver == 0);
    CHECK(ds.points[0].x == 2);
    CHECK(ds.points[0].y == 1);
    CHECK(ds.points[0].court == Court::Grass);
    CHECK(ds.points[1].server == 0);
    CHECK(ds.points[1].x == 3);
    CHECK(ds.points[1].y == 0);
    CHECK(ds.points[2].x == 1);
    CHECK(ds.points[2].court == Court::Clay);

    const auto cell = ds.count_for(1, 2);
    CHECK(cell.wins == 1);
    CHECK(cell.total == 1);
    CHECK(ds.count_for(0, 9).total == 0);
}

TEST_CASE("train/test split holds out whole servers and keeps the player space") {
    std::vector<RawPointRecord> records;
    const std::vector<std::string> names = {"A", "B", "C", "D", "E"};
    for (const auto& s : names)
        for (const auto& r : names) {
            if (s == r) continue;
            for (int i = 0; i < 3; ++i) records.push_back(rec(s, r, i, i % 2 == 0, s + r));
        }
    const Dataset full = build_dataset(records);
    const TrainTestSplit split = split_train_test(full, 2, 99);
    CHECK(split.test_servers.size() == 2);
    CHECK(split.train.n_servers() == 3);
    CHECK(split.test.n_servers() == 2);
    CHECK(split.train.n_players() == full.n_players());
    CHECK(split.test.n_players() == full.n_players());
    CHECK(split.train.player_names == full.player_names);
    CHECK(split.test.player_names == full.player_names);
    CHECK(split.train.points.size() + split.test.points.size() == full.points.size());
    // no held-out server appears in the training half
    std::set<std::string> held(split.test_servers.begin(), split.test_servers.end());
    for (const auto& name : split.train.server_names) CHECK(held.count(name) == 0);
    // per-half server indices point at the right players
    for (int s = 0; s < split.test.n_servers(); ++s)
        CHECK(split.test.player_names[split.test.server_player[s]] == split.test.server_names[s]);
    // same seed, same split
    const TrainTestSplit again = split_train_test(full, 2, 99);
    CHECK(again.test_servers == split.test_servers);
    CHECK_THROWS_AS(split_train_test(full, 5, 1), std::invalid_argument);
}

TEST_CASE("summaries count matches, players, and rally mixes per tour") {
    std::vector<RawPointRecord> records = {
        rec("A", "B", 2, true, "m1", Tournament::AusOpen),
        rec("A", "B", 9, false, "m1", Tournament::AusOpen),
        rec("B", "A", 4, true, "m2", Tournament::USOpen),
    };
    records[2].tour = Tour::WTA;
    const DataSummary sum = summarize(records);
    REQUIRE(sum.tours.count(Tour::ATP) == 1);
    REQUIRE(sum.tours.count(Tour::WTA) == 1);
    const auto& atp = sum.tours.at(Tour::ATP);
    CHECK(atp.points == 2);
    CHECK(atp.short_rallies == 1);
    CHECK(atp.long_rallies == 1);
    CHECK(atp.tournaments.at(Tournament::AusOpen).matches == 1);
    CHECK(atp.tournaments.at(Tournament::AusOpen).players == 2);
    REQUIRE(atp.bucket_total.size() == 15);
    CHECK(atp.bucket_total[1] == 1);   // rally 2 -> bucket 2
    CHECK(atp.bucket_win_freq[1] == 1.0);
    CHECK(atp.bucket_total[4] == 1);   // rally 9 -> bucket 5
    CHECK(atp.bucket_win_freq[4] == 0.0);
    const auto& wta = sum.tours.at(Tour::WTA);
    CHECK(wta.points == 1);
    CHECK(wta.short_rallies == 1);
}

TEST_CASE("aggregated csv round-trips and hashes stay content-based") {
    std::vector<RawPointRecord> records = {
        rec("Amy", "Zoe", 3, true, "m1", Tournament::Wimbledon),
        rec("Zoe", "Amy", 7, false, "m2", Tournament::USOpen),
        rec("Amy", "Kim", 1, true, "m3", Tournament::FrenchOpen),
    };
    const Dataset ds = build_dataset(records);
    const fs::path dir = temp_dir();
    const fs::path csv = dir / "train.csv";
    const fs::path players = dir / "players.json";
    write_aggregated_csv(ds, csv.string());
    write_players_json(ds, players.string());
    const Dataset back = read_aggregated(csv.string(), players.string());
    REQUIRE(back.points.size() == ds.points.size());
    for (std::size_t i = 0; i < ds.points.size(); ++i) {
        CHECK(back.points[i].server == ds.points[i].server);
        CHECK(back.points[i].receiver == ds.points[i].receiver);
        CHECK(back.points[i].x == ds.points[i].x);
        CHECK(back.points[i].y == ds.points[i].y);
        CHECK(back.points[i].court == ds.points[i].court);
    }
    CHECK(back.server_names == ds.server_names);
    CHECK(back.player_names == ds.player_names);
    CHECK(back.server_player == ds.server_player);
    CHECK(dataset_hash(back) == dataset_hash(ds));

    // hash reacts to content, not to object identity
    Dataset mutated = ds;
    mutated.points[0].y = 0;
    CHECK(dataset_hash(mutated) != dataset_hash(ds));

    // malformed indices are rejected
    write_file(csv, "server_index,receiver_index,x,y,court\n7,0,3,1,3\n");
    CHECK_THROWS_AS(read_aggregated(csv.string(), players.string()), SchemaError);
}
