#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "staycast/synth.hpp"

using namespace staycast;

namespace {

GeneratorSpec small_spec() {
    GeneratorSpec spec;
    spec.grid = GridSpec{30.4, 103.8, 2000.0, 6, 6};
    spec.ground_truth = demo_ground_truth(spec.grid);
    spec.n_vehicles = 2;
    spec.days_per_vehicle = 8;
    spec.idle_day_prob = 0.2;
    spec.seed = 77;
    return spec;
}

bool same_day(const ActivityDay& a, const ActivityDay& b) {
    if (a.date != b.date || a.stays.size() != b.stays.size()) return false;
    for (std::size_t i = 0; i < a.stays.size(); ++i) {
        if (a.stays[i].cell != b.stays[i].cell) return false;
        if (a.stays[i].arrival.epoch_sec != b.stays[i].arrival.epoch_sec) return false;
        if (a.stays[i].departure.epoch_sec != b.stays[i].departure.epoch_sec) return false;
        if (a.trip_durations_h[i] != b.trip_durations_h[i]) return false;
    }
    if (a.contexts.size() != b.contexts.size()) return false;
    for (std::size_t i = 0; i < a.contexts.size(); ++i)
        if ((a.contexts[i] - b.contexts[i]).cwiseAbs().maxCoeff() != 0) return false;
    return true;
}

}  // namespace

TEST_CASE("sample_fleet is bit-reproducible for a fixed spec") {
    const SyntheticFleet a = sample_fleet(small_spec());
    const SyntheticFleet b = sample_fleet(small_spec());
    REQUIRE(a.vehicles.size() == b.vehicles.size());
    for (std::size_t v = 0; v < a.vehicles.size(); ++v) {
        CHECK(a.vehicles[v].vehicle_id == b.vehicles[v].vehicle_id);
        REQUIRE(a.vehicles[v].days.size() == b.vehicles[v].days.size());
        for (std::size_t d = 0; d < a.vehicles[v].days.size(); ++d)
            CHECK(same_day(a.vehicles[v].days[d], b.vehicles[v].days[d]));
    }
    CHECK(a.weather == b.weather);
}

TEST_CASE("sampled days satisfy the pipeline invariants") {
    const SyntheticFleet fleet = sample_fleet(small_spec());
    REQUIRE(fleet.vehicles.size() == 2);
    for (const auto& vehicle : fleet.vehicles) {
        CHECK(!vehicle.days.empty());
        CHECK(vehicle.days.size() == vehicle.hidden_states.size());
        std::int64_t prev_date = -1;
        for (std::size_t d = 0; d < vehicle.days.size(); ++d) {
            const ActivityDay& day = vehicle.days[d];
            CHECK(day.date > prev_date);
            prev_date = day.date;
            CHECK(local_hour_int(day.day_start) == kOperationalDayStartHour);
            CHECK(day.n_activities() >= 1);
            CHECK(day.contexts.size() == static_cast<std::size_t>(day.n_activities()) + 1);
            CHECK(vehicle.hidden_states[d].size() ==
                  static_cast<std::size_t>(day.n_activities()));
            CHECK(fleet.weather.count(day.date) == 1);

            std::int64_t clock = day.day_start.epoch_sec;
            for (int i = 0; i < day.n_activities(); ++i) {
                const StayActivity& stay = day.stays[i];
                CHECK(day.trip_durations_h[i] > 0.0);
                CHECK(stay.arrival.epoch_sec > clock);
                CHECK(stay.departure.epoch_sec > stay.arrival.epoch_sec);
                clock = stay.departure.epoch_sec;
                CHECK(stay.cell.row >= 0);
                CHECK(stay.cell.row < fleet.grid.n_rows);
                CHECK(stay.cell.col >= 0);
                CHECK(stay.cell.col < fleet.grid.n_cols);
            }
            // The whole day fits before the next 05:00 boundary.
            CHECK(day.stays.back().departure.epoch_sec <=
                  day.day_start.epoch_sec + 24 * 3600);
        }
    }
}

TEST_CASE("generated contexts equal a fresh attach_contexts pass") {
    const SyntheticFleet fleet = sample_fleet(small_spec());
    for (const auto& vehicle : fleet.vehicles) {
        std::vector<ActivityDay> replay = vehicle.days;
        for (auto& day : replay) day.contexts.clear();
        attach_contexts(replay, fleet.weather, WeatherPolicy::Error);
        for (std::size_t d = 0; d < replay.size(); ++d) {
            REQUIRE(replay[d].contexts.size() == vehicle.days[d].contexts.size());
            for (std::size_t i = 0; i < replay[d].contexts.size(); ++i)
                CHECK((replay[d].contexts[i] - vehicle.days[d].contexts[i])
                          .cwiseAbs()
                          .maxCoeff() == 0);
        }
    }
}

TEST_CASE("trajectory_points reconstructs each stay's window") {
    const SyntheticFleet fleet = sample_fleet(small_spec());
    const VehicleHistory& vehicle = fleet.vehicles[0];
    const double poll = 120.0, jitter = 30.0;
    const auto points = trajectory_points(vehicle, fleet.grid, poll, jitter, 5);
    const auto again = trajectory_points(vehicle, fleet.grid, poll, jitter, 5);
    REQUIRE(points.size() == again.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        CHECK(points[i].lat == again[i].lat);
        CHECK(points[i].time.epoch_sec == again[i].time.epoch_sec);
        if (i > 0) CHECK(points[i].time.epoch_sec > points[i - 1].time.epoch_sec);
    }

    std::size_t cursor = 0;
    for (const auto& day : vehicle.days)
        for (const auto& stay : day.stays) {
            // Find this stay's fixes: they start exactly at the arrival.
            while (cursor < points.size() &&
                   points[cursor].time.epoch_sec < stay.arrival.epoch_sec)
                ++cursor;
            REQUIRE(cursor < points.size());
            CHECK(points[cursor].time.epoch_sec == stay.arrival.epoch_sec);
            const auto [clat, clon] = cell_center(stay.cell, fleet.grid);
            std::size_t last = cursor;
            while (last < points.size() &&
                   points[last].time.epoch_sec <= stay.departure.epoch_sec) {
                CHECK(haversine_m(points[last].lat, points[last].lon, clat, clon) <=
                      jitter + 1.0);
                if (last + 1 < points.size() &&
                    points[last + 1].time.epoch_sec <= stay.departure.epoch_sec)
                    CHECK(points[last + 1].time.epoch_sec - points[last].time.epoch_sec <=
                          static_cast<std::int64_t>(poll));
                ++last;
            }
            CHECK(points[last - 1].time.epoch_sec == stay.departure.epoch_sec);
            cursor = last;
        }
}

TEST_CASE("the shipped ground-truth models are coherent") {
    const IohmmModel fixture = fixture_ground_truth();
    CHECK_NOTHROW(fixture.validate());
    CHECK(fixture.n_states == 3);
    CHECK(fixture.n_destinations() == 4);
    CHECK(fixture.context_dim == 2);

    const GridSpec grid{30.4, 103.8, 2000.0, 5, 5};
    CHECK_NOTHROW(demo_ground_truth(grid).validate());
    CHECK_THROWS(demo_ground_truth(GridSpec{30.4, 103.8, 2000.0, 3, 3}));
}

TEST_CASE("sequence fixtures have the requested shape and are deterministic") {
    const IohmmModel truth = fixture_ground_truth();
    const SequenceFixture a = sample_sequence_fixture(truth, 3, 12, 2, 5, 19);
    const SequenceFixture b = sample_sequence_fixture(truth, 3, 12, 2, 5, 19);
    REQUIRE(a.vehicles.size() == 3);
    REQUIRE(a.states.size() == 3);
    for (std::size_t v = 0; v < 3; ++v) {
        REQUIRE(a.vehicles[v].size() == 12);
        for (std::size_t d = 0; d < 12; ++d) {
            const DaySequence& day = a.vehicles[v][d];
            CHECK(day.length() >= 2);
            CHECK(day.length() <= 5);
            CHECK(day.contexts.size() == day.observations.size());
            CHECK(a.states[v][d].size() == static_cast<std::size_t>(day.length()));
            // z = [wet, bias] is constant within a day.
            for (const auto& z : day.contexts) {
                CHECK((z(0) == 0.0 || z(0) == 1.0));
                CHECK(z(1) == 1.0);
                CHECK(z(0) == day.contexts[0](0));
            }
            for (int i = 0; i < day.length(); ++i) {
                CHECK(truth.try_dest_index(day.observations[i].cell).has_value());
                CHECK(day.observations[i].duration_h > 0.0);
                const int state = a.states[v][d][static_cast<std::size_t>(i)];
                CHECK(state >= 0);
                CHECK(state < truth.n_states);
            }
            CHECK(b.vehicles[v][d].observations[0].cell == day.observations[0].cell);
            CHECK(b.vehicles[v][d].observations[0].duration_h ==
                  day.observations[0].duration_h);
        }
    }
}

TEST_CASE("single-activity marginals converge to the enumerated mixture") {
    const IohmmModel truth = fixture_ground_truth();
    const SequenceFixture fixture = sample_sequence_fixture(truth, 1, 4000, 1, 1, 101);

    Eigen::VectorXd freq_wet = Eigen::VectorXd::Zero(4), freq_dry = Eigen::VectorXd::Zero(4);
    int n_wet = 0, n_dry = 0;
    for (const auto& day : fixture.vehicles[0]) {
        const int l = truth.dest_index(day.observations[0].cell);
        if (day.contexts[0](0) == 1.0) {
            freq_wet(l) += 1;
            ++n_wet;
        } else {
            freq_dry(l) += 1;
            ++n_dry;
        }
    }
    REQUIRE(n_wet > 1000);
    REQUIRE(n_dry > 1000);
    freq_wet /= n_wet;
    freq_dry /= n_dry;

    const JointEnumeration wet = enumerate_joint(truth, {Eigen::Vector2d(1, 1)}, {});
    const JointEnumeration dry = enumerate_joint(truth, {Eigen::Vector2d(0, 1)}, {});
    Eigen::VectorXd expect_wet = Eigen::VectorXd::Zero(4), expect_dry = Eigen::VectorXd::Zero(4);
    for (int u = 0; u < 3; ++u) {
        expect_wet += wet.next_state_probs(u) * truth.destination_probs(u, Eigen::Vector2d(1, 1));
        expect_dry += dry.next_state_probs(u) * truth.destination_probs(u, Eigen::Vector2d(0, 1));
    }
    CHECK((freq_wet - expect_wet).cwiseAbs().maxCoeff() < 0.04);
    CHECK((freq_dry - expect_dry).cwiseAbs().maxCoeff() < 0.04);
}

TEST_CASE("enumerate_joint refuses exploding path counts and bad shapes") {
    const IohmmModel truth = fixture_ground_truth();
    DaySequence day;
    for (int i = 0; i < 13; ++i) {  // 3^13 > 1e6 paths
        day.contexts.emplace_back(Eigen::Vector2d(0, 1));
        day.observations.push_back({truth.destinations[0], 1.0});
    }
    CHECK_THROWS_AS(enumerate_joint(truth, day.contexts, day.observations),
                    std::invalid_argument);

    CHECK_THROWS_AS(enumerate_joint(truth, {Eigen::Vector2d(0, 1)},
                                    {{truth.destinations[0], 1.0},
                                     {truth.destinations[1], 1.0}}),
                    std::invalid_argument);
}

TEST_CASE("bayes_rate is perfect for a single-destination generator") {
    IohmmModel degenerate = fixture_ground_truth();
    degenerate.destinations = {CellId{2, 2}};
    for (auto& eml : degenerate.lambda_eml) eml = Eigen::MatrixXd::Zero(1, 2);
    degenerate.validate();

    const SequenceFixture fixture = sample_sequence_fixture(degenerate, 2, 10, 2, 4, 3);
    const BayesRate rate = bayes_rate(degenerate, fixture.vehicles);
    CHECK(rate.dest_accuracy == 1.0);
    int total = 0;
    for (const auto& v : fixture.vehicles)
        for (const auto& d : v) total += d.length();
    CHECK(rate.n_test_activities == total);
}
