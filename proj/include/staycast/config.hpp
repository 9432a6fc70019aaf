#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "staycast/geo.hpp"
#include "staycast/iohmm.hpp"
#include "staycast/sequences.hpp"

namespace staycast {

/// Knobs of a `simulate` run.
struct SimulateConfig {
    int n_vehicles = 20;
    int days_per_vehicle = 60;
    int min_daily_activities = 2;
    int max_daily_activities = 6;
    double idle_day_prob = 0.1;
    double poll_sec = 120.0;
    double jitter_m = 30.0;
    std::int64_t start_date = 19417;  // 2023-03-01
    int utc_offset_h = 8;
};

/// Every tunable of the pipeline; defaults match the shipped behavior and any
/// field can be overridden from a flat `key = value` config file.
struct ToolkitConfig {
    GridSpec grid;  // n_rows == 0 means "derive from the data" at extract time
    StayThresholds thresholds;
    std::vector<int> k_candidates = {3, 4, 5, 6, 7, 8};
    EmConfig em;
    double mc_alpha = 1.0;
    double train_frac = 0.7;
    std::uint64_t seed = 1;
    WeatherPolicy weather_policy = WeatherPolicy::Error;
    double hist_bin_h = 0.5;
    int top_k = 5;
    SimulateConfig sim;

    void validate() const;  // throws std::invalid_argument with the offending key
};

/// Parse `key = value` lines ('#' comments, blank lines ignored) on top of the
/// defaults. Unknown keys are an error.
ToolkitConfig parse_config(std::istream& in);
ToolkitConfig load_config_file(const std::string& path);

}  // namespace staycast
