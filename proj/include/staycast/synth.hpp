#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "staycast/geo.hpp"
#include "staycast/iohmm.hpp"
#include "staycast/sequences.hpp"

namespace staycast {

/// Recipe for sampling a fleet from a known model. Weather is drawn per civil
/// date and shared fleet-wide; day histories (contexts) evolve with the same
/// rules the real pipeline applies.
struct GeneratorSpec {
    IohmmModel ground_truth;
    GridSpec grid;  // maps the model's cells to coordinates
    int n_vehicles = 1;
    int days_per_vehicle = 30;
    int min_daily_activities = 2;
    int max_daily_activities = 6;
    double dwell_min_h = 0.3;
    double dwell_max_h = 1.5;
    double idle_day_prob = 0.0;  // chance a calendar day is skipped entirely
    std::int64_t start_date = 19417;  // 2023-03-01
    std::int32_t utc_offset_sec = 8 * 3600;
    std::array<double, 4> weather_probs = {0.55, 0.20, 0.20, 0.05};  // sunny/rainy/cloudy/foggy
    std::uint64_t seed = 1;
};

struct VehicleHistory {
    std::string vehicle_id;
    std::vector<ActivityDay> days;                 // contexts attached
    std::vector<std::vector<int>> hidden_states;   // ground truth, aligned with days
};

struct SyntheticFleet {
    GridSpec grid;
    WeatherTable weather;
    std::vector<VehicleHistory> vehicles;
};

/// Draws per-day weather, hidden-state paths, destinations, and durations
/// (negative draws resampled) from spec.ground_truth. Bit-reproducible for a
/// given spec.
SyntheticFleet sample_fleet(const GeneratorSpec& spec);

/// 3-state, 4-destination model with weather-driven transitions and
/// state-separated duration means; the `simulate` default and the recovery
/// fixture. Requires a grid of at least 5 x 5 cells.
IohmmModel demo_ground_truth(const GridSpec& grid);

/// Companion model over the minimal context z = [wet, bias]: wet weather
/// flips the state cycle and moves the destination mass. Small enough that
/// per-vehicle fits approach it at desk scale.
IohmmModel fixture_ground_truth();

/// Day sequences drawn directly in model space (no calendar): each day gets
/// one wet/dry draw, a uniform length in [min_acts, max_acts], and a sampled
/// state path with emissions.
struct SequenceFixture {
    std::vector<std::vector<DaySequence>> vehicles;          // [vehicle][day]
    std::vector<std::vector<std::vector<int>>> states;       // ground-truth paths
};

SequenceFixture sample_sequence_fixture(const IohmmModel& model, int n_vehicles, int n_days,
                                        int min_acts, int max_acts, std::uint64_t seed,
                                        double wet_prob = 0.5);

/// GPS fixes that re-create one vehicle's stays: points every poll_sec from
/// arrival to departure, jittered up to jitter_m around the cell center.
std::vector<TrajectoryPoint> trajectory_points(const VehicleHistory& vehicle,
                                               const GridSpec& grid, double poll_sec,
                                               double jitter_m, std::uint64_t seed);

/// Exact quantities from summing over all |H|^m hidden paths (Eq-level oracle
/// for the scaled recursions). Refuses instances with |H|^m > 1e6. When
/// `contexts` has m+1 entries the next-step fields are filled by marginalizing
/// one transition past the end of the sequence.
struct JointEnumeration {
    double likelihood = 1.0;
    Eigen::MatrixXd gamma;         // m x |H|
    std::vector<Eigen::MatrixXd> xi;
    Eigen::VectorXd next_state_probs;  // empty unless contexts.size() == m + 1
    Eigen::VectorXd next_dest_probs;
    double next_duration_mean = 0.0;
};

JointEnumeration enumerate_joint(const IohmmModel& model,
                                 const std::vector<Eigen::VectorXd>& contexts,
                                 const std::vector<Observation>& observations);

/// Performance of the generating model on its own fleet's test days: the
/// ceiling any fitted model is measured against.
struct BayesRate {
    double dest_accuracy = 0.0;       // mean of per-vehicle accuracies
    double duration_r2 = 0.0;         // mean of per-vehicle defined R^2
    int n_test_activities = 0;
};

BayesRate bayes_rate(const IohmmModel& ground_truth,
                     const std::vector<std::vector<DaySequence>>& test_days_per_vehicle);

}  // namespace staycast
