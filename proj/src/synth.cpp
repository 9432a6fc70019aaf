#include "staycast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "staycast/evaluation.hpp"

namespace staycast {

namespace {

constexpr std::int64_t kDaySec = 86400;

WeatherCondition draw_weather(std::int64_t date, const std::array<double, 4>& probs,
                              std::uint64_t weather_seed) {
    std::mt19937_64 rng(mix_seed(weather_seed, static_cast<std::uint64_t>(date)));
    std::discrete_distribution<int> dist(probs.begin(), probs.end());
    return static_cast<WeatherCondition>(dist(rng));
}

int draw_categorical(const Eigen::VectorXd& probs, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u = unit(rng);
    double cum = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        cum += probs(i);
        if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size() - 1);
}

// Positive truncation by resampling; capped retries guard against specs whose
// mean sits far below zero.
double draw_positive_duration(double mean, double sd, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(mean, sd);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const double t = normal(rng);
        if (t > 0.0) return t;
    }
    throw std::runtime_error("sample_fleet: duration distribution almost surely negative");
}

Timestamp local_time(std::int64_t date, std::int64_t sec_of_day, std::int32_t offset) {
    return Timestamp{date * kDaySec + sec_of_day - offset, offset};
}

}  // namespace

SyntheticFleet sample_fleet(const GeneratorSpec& spec) {
    spec.ground_truth.validate();
    if (spec.n_vehicles < 1 || spec.days_per_vehicle < 1) {
        throw std::invalid_argument("sample_fleet: need at least one vehicle and one day");
    }
    if (spec.min_daily_activities < 1 || spec.max_daily_activities < spec.min_daily_activities) {
        throw std::invalid_argument("sample_fleet: bad daily activity range");
    }
    if (!(spec.dwell_min_h > 0.0) || spec.dwell_max_h < spec.dwell_min_h) {
        throw std::invalid_argument("sample_fleet: bad dwell range");
    }
    if (spec.idle_day_prob < 0.0 || spec.idle_day_prob >= 1.0) {
        throw std::invalid_argument("sample_fleet: idle_day_prob must be in [0, 1)");
    }

    SyntheticFleet fleet;
    fleet.grid = spec.grid;
    const std::uint64_t weather_seed = mix_seed(spec.seed, 0x57454154);  // weather stream

    const IohmmModel& model = spec.ground_truth;
    std::int64_t max_date = spec.start_date;

    for (int v = 0; v < spec.n_vehicles; ++v) {
        VehicleHistory vehicle;
        char id[16];
        std::snprintf(id, sizeof(id), "SYN-%04d", v + 1);
        vehicle.vehicle_id = id;
        std::mt19937_64 rng(mix_seed(spec.seed, fnv1a(vehicle.vehicle_id)));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> m_dist(spec.min_daily_activities,
                                                  spec.max_daily_activities);
        std::uniform_real_distribution<double> dwell_dist(spec.dwell_min_h, spec.dwell_max_h);

        std::int64_t date = spec.start_date;
        while (static_cast<int>(vehicle.days.size()) < spec.days_per_vehicle) {
            if (spec.idle_day_prob > 0.0 && unit(rng) < spec.idle_day_prob) {
                ++date;
                continue;
            }
            // Weather must exist for this date (and a generous margin of prior
            // dates handled below) before contexts are computed.
            for (std::int64_t d = std::min(spec.start_date - 1, date - 1); d <= date; ++d) {
                fleet.weather.emplace(d, draw_weather(d, spec.weather_probs, weather_seed));
            }

            ActivityDay day;
            day.vehicle_id = vehicle.vehicle_id;
            day.date = date;
            day.day_start = local_time(date, kOperationalDayStartHour * 3600, spec.utc_offset_sec);
            const std::int64_t day_end_local = day.day_start.local_sec() + kDaySec;

            const ActivityDay* prev_day = vehicle.days.empty() ? nullptr : &vehicle.days.back();
            std::vector<int> states;
            const int m_target = m_dist(rng);
            Timestamp prev_departure = day.day_start;
            for (int i = 1; i <= m_target; ++i) {
                const ContextVector ctx =
                    build_context(day, i, prev_day, fleet.weather, WeatherPolicy::Error);
                const Eigen::VectorXd z = ctx.to_vector();
                int state;
                if (i == 1) {
                    state = draw_categorical(model.initial_probs(z), rng);
                } else {
                    state = draw_categorical(model.transition_probs(states.back(), z), rng);
                }
                const int dest = draw_categorical(model.destination_probs(state, z), rng);
                const double t_h =
                    draw_positive_duration(model.duration_mean(state, z), model.sigma(state), rng);
                auto t_sec = static_cast<std::int64_t>(std::llround(t_h * 3600.0));
                if (t_sec < 1) t_sec = 1;
                const std::int64_t arrival_local = prev_departure.local_sec() + t_sec;
                if (arrival_local >= day_end_local) break;  // day truncated at 05:00

                auto dwell_sec = static_cast<std::int64_t>(
                    std::llround(dwell_dist(rng) * 3600.0));
                dwell_sec = std::min(dwell_sec, day_end_local - 1 - arrival_local);
                if (dwell_sec < 1) dwell_sec = 1;

                StayActivity stay;
                stay.cell = model.destinations[static_cast<std::size_t>(dest)];
                stay.arrival = Timestamp{arrival_local - spec.utc_offset_sec, spec.utc_offset_sec};
                stay.departure = Timestamp{stay.arrival.epoch_sec + dwell_sec, spec.utc_offset_sec};
                const auto [lat, lon] = cell_center(stay.cell, spec.grid);
                stay.c_lat = lat;
                stay.c_lon = lon;

                day.stays.push_back(stay);
                day.trip_durations_h.push_back(static_cast<double>(t_sec) / 3600.0);
                states.push_back(state);
                prev_departure = stay.departure;
            }
            if (!day.stays.empty()) {
                vehicle.days.push_back(std::move(day));
                vehicle.hidden_states.push_back(std::move(states));
            }
            max_date = std::max(max_date, date);
            ++date;
        }
        fleet.vehicles.push_back(std::move(vehicle));
    }

    // One extra date so zero-fill never triggers on the day after the last.
    for (std::int64_t d = spec.start_date - 1; d <= max_date + 1; ++d) {
        fleet.weather.emplace(d, draw_weather(d, spec.weather_probs, weather_seed));
    }
    for (auto& vehicle : fleet.vehicles) {
        attach_contexts(vehicle.days, fleet.weather, WeatherPolicy::Error);
    }
    return fleet;
}

IohmmModel demo_ground_truth(const GridSpec& grid) {
    if (grid.n_rows < 5 || grid.n_cols < 5) {
        throw std::invalid_argument("demo_ground_truth: grid must be at least 5 x 5");
    }
    // Context layout follows ContextVector: [0..3] weather one-hots,
    // [4] last trip h, [5] last stay h, [6][7] prev-day trip start hours,
    // [8] idle days, [9] prev-day trip count, [10] bias.
    constexpr int kSunny = 0, kRainy = 1, kCloudy = 2, kFoggy = 3, kBias = 10;
    const int d = ContextVector::dim;

    IohmmModel model;
    model.n_states = 3;
    model.context_dim = d;
    model.destinations = {CellId{1, 1}, CellId{1, 4}, CellId{4, 1}, CellId{4, 4}};

    model.lambda_in = Eigen::MatrixXd::Zero(3, d);
    model.lambda_in(0, kBias) = 0.3;
    model.lambda_in(0, kSunny) = 0.8;
    model.lambda_in(1, kRainy) = 0.8;
    model.lambda_in(1, kCloudy) = 0.8;

    // Clear weather walks the state cycle forward, wet weather backward.
    model.lambda_tr.assign(3, Eigen::MatrixXd::Zero(3, d));
    for (int u = 0; u < 3; ++u) {
        model.lambda_tr[static_cast<std::size_t>(u)]((u + 1) % 3, kSunny) = 2.5;
        model.lambda_tr[static_cast<std::size_t>(u)]((u + 1) % 3, kFoggy) = 2.5;
        model.lambda_tr[static_cast<std::size_t>(u)]((u + 2) % 3, kRainy) = 2.5;
        model.lambda_tr[static_cast<std::size_t>(u)]((u + 2) % 3, kCloudy) = 2.5;
    }

    model.lambda_eml.assign(3, Eigen::MatrixXd::Zero(4, d));
    model.lambda_eml[0](0, kBias) = 3.0;
    model.lambda_eml[1](1, kBias) = 3.0;
    model.lambda_eml[2](2, kBias) = 1.6;
    model.lambda_eml[2](2, kSunny) = 1.6;
    model.lambda_eml[2](3, kBias) = 1.6;
    model.lambda_eml[2](3, kRainy) = 1.6;
    model.lambda_eml[2](3, kCloudy) = 1.6;

    model.lambda_emt = Eigen::MatrixXd::Zero(3, d);
    model.lambda_emt(0, kBias) = 0.85;
    model.lambda_emt(0, kSunny) = 0.10;
    model.lambda_emt(1, kBias) = 1.50;
    model.lambda_emt(1, kRainy) = 0.10;
    model.lambda_emt(2, kBias) = 2.30;
    model.lambda_emt(2, kCloudy) = 0.10;
    model.sigma = Eigen::VectorXd::Constant(3, 0.25);
    model.validate();
    return model;
}

IohmmModel fixture_ground_truth() {
    constexpr int kWet = 0, kBias = 1;
    IohmmModel model;
    model.n_states = 3;
    model.context_dim = 2;
    model.destinations = {CellId{1, 1}, CellId{1, 4}, CellId{4, 1}, CellId{4, 4}};

    model.lambda_in = Eigen::MatrixXd::Zero(3, 2);
    model.lambda_in(0, kBias) = 0.4;
    model.lambda_in(1, kWet) = 0.8;

    // Dry weather walks the cycle forward, wet walks it backward.
    model.lambda_tr.assign(3, Eigen::MatrixXd::Zero(3, 2));
    for (int u = 0; u < 3; ++u) {
        auto& tr = model.lambda_tr[static_cast<std::size_t>(u)];
        tr((u + 1) % 3, kBias) = 2.5;
        tr((u + 1) % 3, kWet) = -2.5;
        tr((u + 2) % 3, kWet) = 2.5;
    }

    model.lambda_eml.assign(3, Eigen::MatrixXd::Zero(4, 2));
    model.lambda_eml[0](0, kBias) = 3.0;
    model.lambda_eml[1](1, kBias) = 3.0;
    model.lambda_eml[2](2, kBias) = 2.5;
    model.lambda_eml[2](2, kWet) = -2.5;
    model.lambda_eml[2](3, kWet) = 2.5;

    model.lambda_emt = Eigen::MatrixXd::Zero(3, 2);
    model.lambda_emt(0, kBias) = 0.8;
    model.lambda_emt(0, kWet) = 0.2;
    model.lambda_emt(1, kBias) = 1.6;
    model.lambda_emt(2, kBias) = 2.4;
    model.sigma = Eigen::VectorXd::Constant(3, 0.25);
    model.validate();
    return model;
}

SequenceFixture sample_sequence_fixture(const IohmmModel& model, int n_vehicles, int n_days,
                                        int min_acts, int max_acts, std::uint64_t seed,
                                        double wet_prob) {
    model.validate();
    if (model.context_dim != 2) {
        throw std::invalid_argument("sample_sequence_fixture: needs a [wet, bias] model");
    }
    if (n_vehicles < 1 || n_days < 1 || min_acts < 1 || max_acts < min_acts) {
        throw std::invalid_argument("sample_sequence_fixture: bad dimensions");
    }
    SequenceFixture fixture;
    fixture.vehicles.resize(static_cast<std::size_t>(n_vehicles));
    fixture.states.resize(static_cast<std::size_t>(n_vehicles));
    for (int v = 0; v < n_vehicles; ++v) {
        std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(v) + 1));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::uniform_int_distribution<int> m_dist(min_acts, max_acts);
        for (int d = 0; d < n_days; ++d) {
            Eigen::VectorXd z(2);
            z << (unit(rng) < wet_prob ? 1.0 : 0.0), 1.0;
            const int m = m_dist(rng);
            DaySequence day;
            std::vector<int> path;
            for (int i = 0; i < m; ++i) {
                day.contexts.push_back(z);
                const int state =
                    i == 0 ? draw_categorical(model.initial_probs(z), rng)
                           : draw_categorical(model.transition_probs(path.back(), z), rng);
                const int dest = draw_categorical(model.destination_probs(state, z), rng);
                const double t =
                    draw_positive_duration(model.duration_mean(state, z), model.sigma(state), rng);
                day.observations.push_back(
                    Observation{model.destinations[static_cast<std::size_t>(dest)], t});
                path.push_back(state);
            }
            fixture.vehicles[static_cast<std::size_t>(v)].push_back(std::move(day));
            fixture.states[static_cast<std::size_t>(v)].push_back(std::move(path));
        }
    }
    return fixture;
}

std::vector<TrajectoryPoint> trajectory_points(const VehicleHistory& vehicle,
                                               const GridSpec& grid, double poll_sec,
                                               double jitter_m, std::uint64_t seed) {
    if (!(poll_sec >= 1.0)) throw std::invalid_argument("trajectory_points: poll_sec must be >= 1");
    std::mt19937_64 rng(mix_seed(seed, fnv1a(vehicle.vehicle_id)));
    std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.141592653589793);
    std::uniform_real_distribution<double> radius(0.0, std::max(0.0, jitter_m));

    const double m_per_deg_lat = kEarthRadiusM * 3.141592653589793 / 180.0;
    const double m_per_deg_lon = m_per_deg_lat * std::cos(grid.origin_lat * 3.141592653589793 / 180.0);
    const auto step = static_cast<std::int64_t>(poll_sec);

    std::vector<TrajectoryPoint> points;
    for (const auto& day : vehicle.days) {
        for (const auto& stay : day.stays) {
            for (std::int64_t t = stay.arrival.epoch_sec;; t += step) {
                const bool last = t >= stay.departure.epoch_sec;
                const double r = radius(rng);
                const double a = angle(rng);
                TrajectoryPoint p;
                p.vehicle_id = vehicle.vehicle_id;
                p.time = Timestamp{last ? stay.departure.epoch_sec : t, stay.arrival.offset_sec};
                p.lat = stay.c_lat + r * std::sin(a) / m_per_deg_lat;
                p.lon = stay.c_lon + r * std::cos(a) / m_per_deg_lon;
                points.push_back(std::move(p));
                if (last) break;
            }
        }
    }
    return points;
}

JointEnumeration enumerate_joint(const IohmmModel& model,
                                 const std::vector<Eigen::VectorXd>& contexts,
                                 const std::vector<Observation>& observations) {
    const int m = static_cast<int>(observations.size());
    const int h = model.n_states;
    if (contexts.size() != observations.size() && contexts.size() != observations.size() + 1) {
        throw std::invalid_argument("enumerate_joint: need m or m+1 contexts");
    }
    const double n_paths = std::pow(static_cast<double>(h), m);
    if (n_paths > 1e6) {
        throw std::invalid_argument("enumerate_joint: |H|^m exceeds the 1e6 path bound");
    }
    const bool with_next = contexts.size() == observations.size() + 1;

    JointEnumeration out;
    out.gamma = Eigen::MatrixXd::Zero(m, h);
    out.xi.assign(static_cast<std::size_t>(std::max(0, m - 1)), Eigen::MatrixXd::Zero(h, h));
    Eigen::VectorXd next_state = Eigen::VectorXd::Zero(h);

    // Per-step probability tables reused across paths.
    std::vector<Eigen::VectorXd> delta(static_cast<std::size_t>(m));
    std::vector<Eigen::MatrixXd> phi(static_cast<std::size_t>(m));
    Eigen::VectorXd pi;
    for (int i = 0; i < m; ++i) {
        delta[static_cast<std::size_t>(i)] =
            model.emission_vector(observations[static_cast<std::size_t>(i)],
                                  contexts[static_cast<std::size_t>(i)]);
        if (i == 0) {
            pi = model.initial_probs(contexts[0]);
        } else {
            phi[static_cast<std::size_t>(i)] =
                model.transition_matrix(contexts[static_cast<std::size_t>(i)]);
        }
    }
    Eigen::MatrixXd phi_next;
    if (with_next && m > 0) {
        phi_next = model.transition_matrix(contexts[static_cast<std::size_t>(m)]);
    }

    if (m == 0) {
        out.likelihood = 1.0;
        if (with_next) out.next_state_probs = model.initial_probs(contexts[0]);
    } else {
        double likelihood = 0.0;
        std::vector<int> path(static_cast<std::size_t>(m), 0);
        while (true) {
            double w = pi(path[0]) * delta[0](path[0]);
            for (int i = 1; i < m; ++i) {
                w *= phi[static_cast<std::size_t>(i)](path[static_cast<std::size_t>(i - 1)],
                                                      path[static_cast<std::size_t>(i)]) *
                     delta[static_cast<std::size_t>(i)](path[static_cast<std::size_t>(i)]);
            }
            likelihood += w;
            for (int i = 0; i < m; ++i) out.gamma(i, path[static_cast<std::size_t>(i)]) += w;
            for (int i = 1; i < m; ++i) {
                out.xi[static_cast<std::size_t>(i - 1)](path[static_cast<std::size_t>(i - 1)],
                                                        path[static_cast<std::size_t>(i)]) += w;
            }
            if (with_next) {
                next_state += w * phi_next.row(path[static_cast<std::size_t>(m - 1)]).transpose();
            }
            // next path in lexicographic order
            int pos = m - 1;
            while (pos >= 0 && path[static_cast<std::size_t>(pos)] == h - 1) {
                path[static_cast<std::size_t>(pos)] = 0;
                --pos;
            }
            if (pos < 0) break;
            ++path[static_cast<std::size_t>(pos)];
        }
        if (!(likelihood > 0.0)) {
            throw std::runtime_error("enumerate_joint: zero likelihood");
        }
        out.likelihood = likelihood;
        out.gamma /= likelihood;
        for (auto& x : out.xi) x /= likelihood;
        if (with_next) out.next_state_probs = next_state / likelihood;
    }

    if (with_next) {
        const Eigen::VectorXd& z_next = contexts[static_cast<std::size_t>(m)];
        out.next_dest_probs = Eigen::VectorXd::Zero(model.n_destinations());
        out.next_duration_mean = 0.0;
        for (int u = 0; u < h; ++u) {
            out.next_dest_probs += out.next_state_probs(u) * model.destination_probs(u, z_next);
            out.next_duration_mean += out.next_state_probs(u) * model.duration_mean(u, z_next);
        }
    }
    return out;
}

BayesRate bayes_rate(const IohmmModel& ground_truth,
                     const std::vector<std::vector<DaySequence>>& test_days_per_vehicle) {
    BayesRate rate;
    const IohmmPredictor predictor(ground_truth);
    double acc_sum = 0.0, r2_sum = 0.0;
    int acc_n = 0, r2_n = 0;
    for (const auto& days : test_days_per_vehicle) {
        const VehicleScore score = score_vehicle(predictor, days);
        rate.n_test_activities += score.n_test_activities;
        if (score.n_test_activities == 0) continue;
        acc_sum += score.dest_accuracy;
        ++acc_n;
        if (score.duration_r2.has_value()) {
            r2_sum += *score.duration_r2;
            ++r2_n;
        }
    }
    if (acc_n > 0) rate.dest_accuracy = acc_sum / acc_n;
    if (r2_n > 0) rate.duration_r2 = r2_sum / r2_n;
    return rate;
}

}  // namespace staycast
