#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "staycast/model_io.hpp"
#include "staycast/predict.hpp"
#include "staycast/synth.hpp"

using namespace staycast;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / fs::path("staycast_io_test")) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

VehicleModelBundle sample_bundle() {
    const SequenceFixture fixture =
        sample_sequence_fixture(fixture_ground_truth(), 1, 14, 3, 6, 88);
    const auto& days = fixture.vehicles[0];

    VehicleModelBundle bundle;
    bundle.vehicle_id = "truck-3";
    bundle.grid = GridSpec{30.4, 103.8, 2000.0, 6, 6};
    bundle.seed = 4242;
    bundle.n_train_days = 10;
    bundle.n_test_days = 4;
    bundle.silhouette_by_k = {{3, 0.44}, {4, 0.39}, {5, 0.31}};
    bundle.iohmm = em_fit(days, 2, random_hints(days, 2, 6), EmConfig{}, &bundle.trace);
    bundle.mc = mc_fit(days, 1.0);
    bundle.lr = lr_fit(days);
    bundle.config.seed = 4242;
    bundle.config.em.l2 = 0.002;
    return bundle;
}

}  // namespace

TEST_CASE("atomic_write_file lands the full content and leaves no temp files") {
    TempDir dir;
    const fs::path target = dir.path / "artifact.txt";
    atomic_write_file(target.string(), "first\n");
    CHECK(slurp(target) == "first\n");
    atomic_write_file(target.string(), "second version\n");
    CHECK(slurp(target) == "second version\n");

    int entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path)) ++entries;
    CHECK(entries == 1);

    // Parent directories are created on demand.
    const fs::path nested = dir.path / "deep" / "tree" / "f.txt";
    atomic_write_file(nested.string(), "x");
    CHECK(slurp(nested) == "x");
}

TEST_CASE("stays artifact round-trips bitwise") {
    StaysArtifact artifact;
    artifact.grid = GridSpec{30.4, 103.8, 1500.0, 9, 7};
    artifact.thresholds = StayThresholds{250.0, 480.0};
    artifact.stays["t1"] = {
        StayActivity{CellId{2, 3}, parse_timestamp("2023-03-01T08:00:00+08:00"),
                     parse_timestamp("2023-03-01T09:12:34+08:00"), 30.412345678901,
                     103.812345678901},
        StayActivity{CellId{0, 0}, parse_timestamp("2023-03-01T11:30:00+08:00"),
                     parse_timestamp("2023-03-01T12:00:00+08:00"), 30.40001, 103.80002},
    };
    artifact.stays["t2"] = {StayActivity{CellId{8, 6}, parse_timestamp("2023-03-02T06:00:00Z"),
                                         parse_timestamp("2023-03-02T06:30:00Z"), 30.5, 103.9}};

    const std::string text = stays_to_jsonl(artifact);
    std::istringstream in(text);
    const StaysArtifact back = stays_from_jsonl(in);

    CHECK(back.grid.origin_lat == artifact.grid.origin_lat);
    CHECK(back.grid.n_rows == 9);
    CHECK(back.thresholds.theta_d_m == 250.0);
    REQUIRE(back.stays.size() == 2);
    REQUIRE(back.stays.at("t1").size() == 2);
    const StayActivity& s = back.stays.at("t1")[0];
    CHECK(s.cell == CellId{2, 3});
    CHECK(s.arrival.epoch_sec == artifact.stays.at("t1")[0].arrival.epoch_sec);
    CHECK(s.arrival.offset_sec == 8 * 3600);
    CHECK(s.c_lat == 30.412345678901);  // shortest-round-trip doubles survive
    CHECK(s.c_lon == 103.812345678901);

    // Serialization is deterministic.
    CHECK(stays_to_jsonl(artifact) == text);
}

TEST_CASE("sequences artifact round-trips days with contexts") {
    const SyntheticFleet fleet = [] {
        GeneratorSpec spec;
        spec.grid = GridSpec{30.4, 103.8, 2000.0, 6, 6};
        spec.ground_truth = demo_ground_truth(spec.grid);
        spec.n_vehicles = 2;
        spec.days_per_vehicle = 5;
        spec.seed = 3;
        return sample_fleet(spec);
    }();
    SequencesArtifact artifact;
    artifact.grid = fleet.grid;
    for (const auto& v : fleet.vehicles) artifact.fleet[v.vehicle_id] = v.days;

    const std::string text = sequences_to_jsonl(artifact);
    std::istringstream in(text);
    const SequencesArtifact back = sequences_from_jsonl(in);

    REQUIRE(back.fleet.size() == artifact.fleet.size());
    for (const auto& [id, days] : artifact.fleet) {
        const auto& rdays = back.fleet.at(id);
        REQUIRE(rdays.size() == days.size());
        for (std::size_t d = 0; d < days.size(); ++d) {
            CHECK(rdays[d].date == days[d].date);
            CHECK(rdays[d].day_start.epoch_sec == days[d].day_start.epoch_sec);
            REQUIRE(rdays[d].stays.size() == days[d].stays.size());
            REQUIRE(rdays[d].contexts.size() == days[d].contexts.size());
            for (std::size_t i = 0; i < days[d].stays.size(); ++i) {
                CHECK(rdays[d].stays[i].cell == days[d].stays[i].cell);
                CHECK(rdays[d].trip_durations_h[i] == days[d].trip_durations_h[i]);
            }
            for (std::size_t i = 0; i < days[d].contexts.size(); ++i)
                CHECK((rdays[d].contexts[i] - days[d].contexts[i]).cwiseAbs().maxCoeff() == 0);
        }
    }
    CHECK(sequences_to_jsonl(back) == text);
}

TEST_CASE("model bundles survive serialize -> parse -> serialize byte-identically") {
    const VehicleModelBundle bundle = sample_bundle();
    const std::string text = bundle_to_json(bundle);
    const VehicleModelBundle back = bundle_from_json(text);
    CHECK(bundle_to_json(back) == text);

    CHECK(back.vehicle_id == "truck-3");
    CHECK(back.seed == 4242);
    CHECK(back.n_train_days == 10);
    CHECK(back.silhouette_by_k == bundle.silhouette_by_k);
    CHECK(back.config.em.l2 == 0.002);
    CHECK(back.trace.converged == bundle.trace.converged);
    REQUIRE(back.trace.log_likelihood.size() == bundle.trace.log_likelihood.size());
    CHECK(back.trace.log_likelihood.back() == bundle.trace.log_likelihood.back());

    // The Markov chain is rebuilt from raw counts and stays bitwise equal.
    CHECK(back.mc.alpha == bundle.mc.alpha);
    CHECK((back.mc.counts - bundle.mc.counts).cwiseAbs().maxCoeff() == 0);
    CHECK((back.mc.transition - bundle.mc.transition).cwiseAbs().maxCoeff() == 0);
    CHECK((back.lr.coef - bundle.lr.coef).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("a reloaded model predicts bitwise-identically") {
    TempDir dir;
    const VehicleModelBundle bundle = sample_bundle();
    const fs::path path = dir.path / "truck-3.json";
    write_model_bundle(path.string(), bundle);
    const VehicleModelBundle loaded = read_model_bundle(path.string());

    const SequenceFixture probe =
        sample_sequence_fixture(fixture_ground_truth(), 1, 5, 2, 5, 1234);
    for (const auto& day : probe.vehicles[0]) {
        std::vector<Eigen::VectorXd> contexts = day.contexts;
        contexts.push_back(day.contexts.back());
        for (int i = 0; i <= day.length(); ++i) {
            const NextActivityForecast a = predict_next(bundle.iohmm, day.observations,
                                                        contexts, i);
            const NextActivityForecast b = predict_next(loaded.iohmm, day.observations,
                                                        contexts, i);
            CHECK(a.cell == b.cell);
            CHECK(a.duration_h == b.duration_h);
            CHECK((a.dest_probs - b.dest_probs).cwiseAbs().maxCoeff() == 0);
            CHECK((a.state_probs - b.state_probs).cwiseAbs().maxCoeff() == 0);
        }
    }
}

TEST_CASE("corrupt or mistyped bundle documents are rejected") {
    CHECK_THROWS(bundle_from_json("not json at all"));
    CHECK_THROWS(bundle_from_json("{}"));

    const VehicleModelBundle bundle = sample_bundle();
    std::string text = bundle_to_json(bundle);
    // Damage the state count so validate() must fire.
    const auto pos = text.find("\"n_states\"");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, std::string("\"n_states\": 2").size(), "\"n_states\": 9");
    CHECK_THROWS(bundle_from_json(text));
}

TEST_CASE("forecast records round-trip and the meta line carries top_k") {
    std::vector<ForecastRecord> records;
    ForecastRecord r;
    r.vehicle_id = "t1";
    r.date = parse_date("2023-03-05");
    r.after_activity = 3;
    r.cell = CellId{4, 2};
    r.duration_h = 1.625;
    r.top_dest_probs = {{CellId{4, 2}, 0.5}, {CellId{1, 1}, 0.3}, {CellId{0, 0}, 0.15},
                        {CellId{2, 2}, 0.05}};
    records.push_back(r);

    // Serialization keeps the entries it is given (the predictor truncates);
    // the meta line records the configured top_k.
    const std::string text = forecasts_to_jsonl(records, 2);
    const json meta = json::parse(text.substr(0, text.find('\n')));
    CHECK(meta.at("top_k") == 2);

    std::istringstream in(text);
    const auto back = forecasts_from_jsonl(in);
    REQUIRE(back.size() == 1);
    CHECK(back[0].vehicle_id == "t1");
    CHECK(back[0].date == r.date);
    CHECK(back[0].after_activity == 3);
    CHECK(back[0].cell == CellId{4, 2});
    CHECK(back[0].duration_h == 1.625);
    REQUIRE(back[0].top_dest_probs.size() == 4);
    CHECK(back[0].top_dest_probs[0].second == 0.5);
    CHECK(back[0].top_dest_probs[1].first == CellId{1, 1});
    CHECK(back[0].top_dest_probs[3].second == 0.05);
}
