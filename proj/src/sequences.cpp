#include "staycast/sequences.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace staycast {

const char* const ContextVector::field_names[ContextVector::dim] = {
    "sunny",
    "rainy",
    "cloudy",
    "foggy",
    "last_trip_duration_h",
    "last_stay_duration_h",
    "prev_day_first_trip_start_hour",
    "prev_day_last_trip_start_hour",
    "consecutive_idle_days",
    "prev_day_trip_count",
    "bias",
};

Eigen::VectorXd ContextVector::to_vector() const {
    Eigen::VectorXd z(dim);
    z << sunny, rainy, cloudy, foggy, last_trip_duration_h, last_stay_duration_h,
        prev_day_first_trip_start_hour, prev_day_last_trip_start_hour, consecutive_idle_days,
        prev_day_trip_count, bias;
    return z;
}

WeatherCondition parse_weather(const std::string& s) {
    if (s == "sunny") return WeatherCondition::Sunny;
    if (s == "rainy") return WeatherCondition::Rainy;
    if (s == "cloudy") return WeatherCondition::Cloudy;
    if (s == "foggy") return WeatherCondition::Foggy;
    throw std::invalid_argument("unknown weather condition: '" + s + "'");
}

std::string weather_name(WeatherCondition c) {
    switch (c) {
        case WeatherCondition::Sunny: return "sunny";
        case WeatherCondition::Rainy: return "rainy";
        case WeatherCondition::Cloudy: return "cloudy";
        case WeatherCondition::Foggy: return "foggy";
    }
    return "?";
}

WeatherTable read_weather_csv(std::istream& in) {
    WeatherTable table;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (line.find("date") != std::string::npos) continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::invalid_argument("weather csv line " + std::to_string(line_no) +
                                        ": expected `date,condition`");
        }
        const std::int64_t date = parse_date(line.substr(0, comma));
        const WeatherCondition cond = parse_weather(line.substr(comma + 1));
        if (!table.emplace(date, cond).second) {
            throw std::invalid_argument("duplicate weather record for " + format_date(date));
        }
    }
    return table;
}

namespace {

// Operational-day index of an instant: days elapsed since the epoch 05:00.
std::int64_t operational_day_index(const Timestamp& t) {
    const std::int64_t shifted = t.local_sec() - kOperationalDayStartHour * 3600;
    return shifted >= 0 ? shifted / 86400 : (shifted - 86399) / 86400;
}

}  // namespace

std::vector<ActivityDay> partition_days(const std::string& vehicle_id,
                                        const std::vector<StayActivity>& stays,
                                        std::vector<std::string>* warnings) {
    std::vector<ActivityDay> days;
    for (const auto& stay : stays) {
        if (stay.departure.epoch_sec < stay.arrival.epoch_sec) {
            throw std::invalid_argument("stay departs before it arrives");
        }
        const std::int64_t day_idx = operational_day_index(stay.arrival);
        if (days.empty() || days.back().date != day_idx) {
            if (!days.empty() && days.back().date > day_idx) {
                throw std::invalid_argument("stays not time-ordered for vehicle " + vehicle_id);
            }
            ActivityDay day;
            day.vehicle_id = vehicle_id;
            day.date = day_idx;
            day.day_start.offset_sec = stay.arrival.offset_sec;
            day.day_start.epoch_sec =
                day_idx * 86400 + kOperationalDayStartHour * 3600 - stay.arrival.offset_sec;
            days.push_back(std::move(day));
        }
        ActivityDay& day = days.back();
        const Timestamp prev_departure =
            day.stays.empty() ? day.day_start : day.stays.back().departure;
        day.trip_durations_h.push_back(
            static_cast<double>(stay.arrival.epoch_sec - prev_departure.epoch_sec) / 3600.0);
        if (operational_day_index(stay.departure) != day_idx && warnings != nullptr) {
            warnings->push_back("vehicle " + vehicle_id + ": stay arriving " +
                                format_timestamp(stay.arrival) +
                                " spans the 05:00 boundary; assigned by arrival");
        }
        day.stays.push_back(stay);
    }
    return days;
}

ContextVector build_context(const ActivityDay& day, int i, const ActivityDay* prev_day,
                            const WeatherTable& weather, WeatherPolicy policy,
                            std::vector<std::string>* warnings) {
    const int m = day.n_activities();
    if (i < 1 || i > m + 1) {
        throw std::invalid_argument("build_context: activity index " + std::to_string(i) +
                                    " outside [1, m+1]");
    }
    ContextVector z;
    const auto it = weather.find(day.date);
    if (it != weather.end()) {
        switch (it->second) {
            case WeatherCondition::Sunny: z.sunny = 1; break;
            case WeatherCondition::Rainy: z.rainy = 1; break;
            case WeatherCondition::Cloudy: z.cloudy = 1; break;
            case WeatherCondition::Foggy: z.foggy = 1; break;
        }
    } else if (policy == WeatherPolicy::Error) {
        throw std::runtime_error("no weather record for " + format_date(day.date));
    } else if (warnings != nullptr) {
        warnings->push_back("no weather record for " + format_date(day.date) +
                            "; weather block zero-filled");
    }
    if (i >= 2) {
        z.last_trip_duration_h = day.trip_durations_h[static_cast<std::size_t>(i) - 2];
        z.last_stay_duration_h = day.stays[static_cast<std::size_t>(i) - 2].dwell_h();
    }
    if (prev_day != nullptr && prev_day->n_activities() > 0) {
        const int pm = prev_day->n_activities();
        // Trip i departs at q_{i-1}; the day's first trip has only its
        // artificial 05:00 anchor, so its start is read from the first
        // observed event of that day.
        z.prev_day_first_trip_start_hour = local_hour_int(prev_day->stays[0].arrival);
        z.prev_day_last_trip_start_hour =
            pm >= 2 ? local_hour_int(prev_day->stays[static_cast<std::size_t>(pm) - 2].departure)
                    : z.prev_day_first_trip_start_hour;
        z.prev_day_trip_count = pm;
        z.consecutive_idle_days = static_cast<double>(day.date - prev_day->date - 1);
    }
    return z;
}

void attach_contexts(std::vector<ActivityDay>& days, const WeatherTable& weather,
                     WeatherPolicy policy, std::vector<std::string>* warnings) {
    const ActivityDay* prev = nullptr;
    for (auto& day : days) {
        if (prev != nullptr && prev->date >= day.date) {
            throw std::invalid_argument("attach_contexts: days not strictly chronological");
        }
        day.contexts.clear();
        day.contexts.reserve(static_cast<std::size_t>(day.n_activities()) + 1);
        for (int i = 1; i <= day.n_activities() + 1; ++i) {
            day.contexts.push_back(build_context(day, i, prev, weather, policy, warnings).to_vector());
        }
        prev = &day;
    }
}

std::vector<VehicleStats> fleet_stats(
    const std::map<std::string, std::vector<ActivityDay>>& fleet) {
    std::vector<VehicleStats> out;
    for (const auto& [id, days] : fleet) {
        VehicleStats s;
        s.vehicle_id = id;
        s.active_days = static_cast<int>(days.size());
        std::set<CellId> cells;
        std::vector<double> dwell_min;
        for (const auto& day : days) {
            for (const auto& stay : day.stays) {
                ++s.n_stays;
                cells.insert(stay.cell);
                dwell_min.push_back(stay.dwell_h() * 60.0);
                ++s.hour_histogram[static_cast<std::size_t>(local_hour_int(stay.arrival))];
            }
        }
        s.distinct_cells = static_cast<int>(cells.size());
        if (!dwell_min.empty()) {
            std::sort(dwell_min.begin(), dwell_min.end());
            const std::size_t n = dwell_min.size();
            s.median_stay_duration_min =
                n % 2 == 1 ? dwell_min[n / 2] : 0.5 * (dwell_min[n / 2 - 1] + dwell_min[n / 2]);
            double sum = 0.0;
            for (double d : dwell_min) sum += d;
            s.mean_stay_duration_min = sum / static_cast<double>(n);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace staycast
