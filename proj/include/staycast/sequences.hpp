#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "staycast/geo.hpp"
#include "staycast/util.hpp"

namespace staycast {

/// One detected stop: grid cell, arrival/departure times, centroid.
struct StayActivity {
    CellId cell;
    Timestamp arrival;
    Timestamp departure;
    double c_lat = 0.0;
    double c_lon = 0.0;

    double dwell_h() const {
        return static_cast<double>(departure.epoch_sec - arrival.epoch_sec) / 3600.0;
    }
};

/// One operational day: the [05:00, next-day 05:00) local window holding an
/// ordered stay sequence. trip_durations_h[i] = arrival_i - departure_{i-1},
/// anchored at the 05:00 day start for the first stay.
struct ActivityDay {
    std::string vehicle_id;
    Timestamp day_start;      // 05:00 local
    std::int64_t date = 0;    // civil date (days since epoch) of day_start
    std::vector<StayActivity> stays;
    std::vector<double> trip_durations_h;
    // z_1..z_{m+1}; the extra vector is the context of the not-yet-observed
    // next activity. Filled by attach_contexts.
    std::vector<Eigen::VectorXd> contexts;

    int n_activities() const { return static_cast<int>(stays.size()); }
};

enum class WeatherCondition { Sunny, Rainy, Cloudy, Foggy };

WeatherCondition parse_weather(const std::string& s);
std::string weather_name(WeatherCondition c);

/// date (days since epoch) -> condition; at most one record per date.
using WeatherTable = std::map<std::int64_t, WeatherCondition>;

/// Read a `date,condition` CSV.
WeatherTable read_weather_csv(std::istream& in);

enum class WeatherPolicy { Error, ZeroFill };

/// The model input z_i. Weather one-hots for the current day plus recent and
/// previous-day work statistics; hours are integer-valued, durations in hours.
struct ContextVector {
    double sunny = 0, rainy = 0, cloudy = 0, foggy = 0;
    double last_trip_duration_h = 0;
    double last_stay_duration_h = 0;
    double prev_day_first_trip_start_hour = 0;
    double prev_day_last_trip_start_hour = 0;
    double consecutive_idle_days = 0;
    double prev_day_trip_count = 0;
    double bias = 1;

    static constexpr int dim = 11;
    Eigen::VectorXd to_vector() const;
    static const char* const field_names[dim];
};

constexpr int kOperationalDayStartHour = 5;

/// Group one vehicle's time-ordered stays into operational days and compute
/// trip durations. Days with no stays are omitted. Stays spanning the 05:00
/// boundary are assigned by arrival time and noted in `warnings`.
std::vector<ActivityDay> partition_days(const std::string& vehicle_id,
                                        const std::vector<StayActivity>& stays,
                                        std::vector<std::string>* warnings = nullptr);

/// Context for activity i (1-based; i may be m+1 for the pending next
/// activity) of `day`. `prev_day` is the vehicle's most recent earlier active
/// day, or nullptr.
ContextVector build_context(const ActivityDay& day, int i, const ActivityDay* prev_day,
                            const WeatherTable& weather, WeatherPolicy policy,
                            std::vector<std::string>* warnings = nullptr);

/// Fill day.contexts (m+1 vectors each) for one vehicle's chronological days.
void attach_contexts(std::vector<ActivityDay>& days, const WeatherTable& weather,
                     WeatherPolicy policy, std::vector<std::string>* warnings = nullptr);

/// Per-vehicle descriptive summary used for fleet exploration.
struct VehicleStats {
    std::string vehicle_id;
    int active_days = 0;
    int n_stays = 0;
    int distinct_cells = 0;
    double median_stay_duration_min = 0.0;
    double mean_stay_duration_min = 0.0;
    std::vector<int> hour_histogram = std::vector<int>(24, 0);  // arrival local hour
};

std::vector<VehicleStats> fleet_stats(
    const std::map<std::string, std::vector<ActivityDay>>& fleet);

}  // namespace staycast
