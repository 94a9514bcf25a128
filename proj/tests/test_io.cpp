#include <catch2/catch.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "normsim/engine.hpp"
#include "normsim/io.hpp"
#include "normsim/rng.hpp"

using namespace normsim;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "normsim_io_test";
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<TrajectoryRecord> sample_records() {
    std::vector<TrajectoryRecord> records;
    for (int i = 0; i < 3; ++i) {
        TrajectoryRecord r;
        r.sweep = static_cast<std::uint64_t>(i) * 100;
        r.avg_abs_main = 0.5 - 0.123456789012345 * i;
        r.avg_abs_secondary = 0.1 + 0.1 * i;
        r.n_clusters = static_cast<std::uint64_t>(1 + i);
        r.max_cluster_share = 1.0 / (i + 1);
        records.push_back(r);
    }
    return records;
}

}  // namespace

TEST_CASE("format_double round-trips arbitrary doubles") {
    SplitMix64 rng(77);
    for (int i = 0; i < 5000; ++i) {
        const double v = rng.next_symmetric() * std::pow(10.0, (rng.next_double() - 0.5) * 40.0);
        CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
    }
    CHECK(format_double(0.5) == "0.5");
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.15) == "0.15");
}

TEST_CASE("write_timeseries emits header plus one line per record") {
    const auto path = temp_dir() / "ts_bare.csv";
    write_timeseries(sample_records(), path);
    const std::string text = slurp(path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);  // header + 3 records
    CHECK(text.rfind("sweep,avg_abs_main,avg_abs_secondary,n_clusters,max_cluster_share\n", 0) ==
          0);
}

TEST_CASE("write_timeseries rejects an empty record list and bad paths") {
    CHECK_THROWS_AS(write_timeseries({}, temp_dir() / "empty.csv"), std::invalid_argument);
    CHECK_THROWS_WITH(write_timeseries(sample_records(), "/nonexistent_dir_xyz/out.csv"),
                      Catch::Contains("/nonexistent_dir_xyz/out.csv"));
}

TEST_CASE("time series round-trip reproduces identical bytes") {
    const auto path = temp_dir() / "ts_meta.csv";
    const std::vector<std::string> meta = {"# normsim timeseries v1",
                                           meta_line("rng_family", kRngFamily),
                                           meta_line("seed", "42")};
    write_timeseries(sample_records(), path, meta);
    const std::string first = slurp(path);

    const TimeseriesFile parsed = read_timeseries(path);
    REQUIRE(parsed.records.size() == 3);
    CHECK(parsed.meta == meta);
    CHECK(parsed.records[1].avg_abs_main == sample_records()[1].avg_abs_main);

    const auto path2 = temp_dir() / "ts_meta2.csv";
    write_timeseries(parsed.records, path2, parsed.meta);
    CHECK(slurp(path2) == first);
}

TEST_CASE("snapshot files round-trip losslessly at full precision") {
    SplitMix64 rng(123);
    SnapshotFile snap;
    snap.params.n_agents = 64;
    snap.params.h = 0.25;
    snap.params.u_m = 0.7;
    snap.params.u_s = 0.1;
    snap.params.mu = 0.5;
    snap.params.bounded = false;
    snap.params.seed = 0xDEADBEEFCAFEULL;
    snap.sweep = 1234;
    snap.extra_meta = {meta_line("cluster_epsilon", "0.02")};
    for (int i = 0; i < 64; ++i) {
        Agent a;
        a.attitude.main = rng.next_symmetric() * 1.5;
        a.attitude.secondary = rng.next_symmetric() * 1e-7;
        a.involvement = i % 3 == 0 ? Involvement::hsi : Involvement::non_hsi;
        snap.agents.push_back(a);
    }

    const auto path = temp_dir() / "snap.csv";
    write_snapshot(snap, path);
    const SnapshotFile back = read_snapshot(path);

    CHECK(back.format_version == snap.format_version);
    CHECK(back.rng_family == kRngFamily);
    CHECK(back.params.n_agents == snap.params.n_agents);
    CHECK(back.params.h == snap.params.h);
    CHECK(back.params.u_m == snap.params.u_m);
    CHECK(back.params.u_s == snap.params.u_s);
    CHECK(back.params.bounded == snap.params.bounded);
    CHECK(back.params.seed == snap.params.seed);
    CHECK(back.sweep == snap.sweep);
    CHECK(back.extra_meta == snap.extra_meta);
    REQUIRE(back.agents.size() == snap.agents.size());
    for (std::size_t i = 0; i < snap.agents.size(); ++i) REQUIRE(back.agents[i] == snap.agents[i]);

    // Re-serialization is byte-identical.
    const auto path2 = temp_dir() / "snap2.csv";
    write_snapshot(back, path2);
    CHECK(slurp(path2) == slurp(path));
}

TEST_CASE("read_snapshot validates the row count against the header") {
    SnapshotFile snap;
    snap.params.n_agents = 5;
    snap.params.u_m = 0.5;
    snap.params.u_s = 0.5;
    snap.agents.assign(3, Agent{});  // wrong on purpose
    const auto path = temp_dir() / "snap_bad.csv";
    write_snapshot(snap, path);
    CHECK_THROWS_WITH(read_snapshot(path), Catch::Contains("n_agents"));

    CHECK_THROWS_WITH(read_snapshot(temp_dir() / "does_not_exist.csv"),
                      Catch::Contains("does_not_exist.csv"));
}

TEST_CASE("phase map writers emit long and matrix forms") {
    PhaseMap map;
    map.quantity = MapQuantity::mean_avg_abs_main;
    map.h = 0.1;
    map.bounded = true;
    map.u_m_values = {0.3, 0.6};
    map.u_s_values = {0.2, 0.4};
    map.values = {0.1, 0.2, std::nullopt, 0.4};

    const auto long_path = temp_dir() / "map_long.csv";
    const auto matrix_path = temp_dir() / "map_matrix.csv";
    write_phase_map_long(map, long_path);
    write_phase_map_matrix(map, matrix_path);

    const std::string long_text = slurp(long_path);
    CHECK_THAT(long_text, Catch::Contains("u_m,u_s,value"));
    CHECK_THAT(long_text, Catch::Contains("0.3,0.2,0.1"));
    CHECK_THAT(long_text, Catch::Contains("0.3,0.4,NA"));  // voided cell flagged
    CHECK_THAT(long_text, Catch::Contains("quantity=mean_avg_abs_main"));

    const std::string matrix_text = slurp(matrix_path);
    CHECK_THAT(matrix_text, Catch::Contains("u_s,0.3,0.6"));
    CHECK_THAT(matrix_text, Catch::Contains("0.2,0.1,0.2"));
    CHECK_THAT(matrix_text, Catch::Contains("0.4,NA,0.4"));
}

TEST_CASE("classification csv lists one row per source") {
    std::vector<ClassificationRow> rows(2);
    rows[0].source = "snapshot_00000000.csv";
    rows[0].pattern_main = PatternCode::several_moderate;
    rows[1].source = "snapshot_00000100.csv";
    rows[1].sweep = 100;
    rows[1].pattern_main = PatternCode::single_extreme;
    const std::string csv = classification_csv(rows);
    CHECK_THAT(csv, Catch::Contains("snapshot_00000000.csv,0,"));
    CHECK_THAT(csv, Catch::Contains("snapshot_00000100.csv,100,"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // format line + header + 2 rows
}
