#include "staycast/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "staycast/linmodel.hpp"

namespace staycast {

DaySplit split_days(const std::vector<ActivityDay>& days, double train_frac) {
    if (days.size() < 2) throw std::invalid_argument("split_days: need at least 2 active days");
    if (!(train_frac > 0.0 && train_frac <= 1.0)) {
        throw std::invalid_argument("split_days: train_frac must be in (0, 1]");
    }
    for (std::size_t d = 1; d < days.size(); ++d) {
        if (days[d].day_start.epoch_sec <= days[d - 1].day_start.epoch_sec) {
            throw std::invalid_argument("split_days: days must be strictly chronological");
        }
    }
    const auto n_train = static_cast<std::size_t>(
        std::ceil(train_frac * static_cast<double>(days.size())));
    DaySplit split;
    split.train.assign(days.begin(), days.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.assign(days.begin() + static_cast<std::ptrdiff_t>(n_train), days.end());
    return split;
}

std::pair<CellId, double> IohmmPredictor::predict(const DaySequence& day, int i) const {
    if (i < 0 || i >= day.length()) throw std::invalid_argument("predict: index out of range");
    std::vector<Observation> prefix;
    std::vector<Eigen::VectorXd> contexts;
    prefix.reserve(static_cast<std::size_t>(i));
    contexts.reserve(static_cast<std::size_t>(i) + 1);
    for (int j = 0; j < i; ++j) {
        if (model_.try_dest_index(day.observations[static_cast<std::size_t>(j)].cell)) {
            prefix.push_back(day.observations[static_cast<std::size_t>(j)]);
            contexts.push_back(day.contexts[static_cast<std::size_t>(j)]);
        }
    }
    contexts.push_back(day.contexts[static_cast<std::size_t>(i)]);
    const NextActivityForecast forecast =
        predict_next(model_, prefix, contexts, static_cast<int>(prefix.size()));
    return {forecast.cell, forecast.duration_h};
}

std::pair<CellId, double> BaselinePredictor::predict(const DaySequence& day, int i) const {
    if (i < 0 || i >= day.length()) throw std::invalid_argument("predict: index out of range");
    std::optional<CellId> prev;
    if (i > 0) prev = day.observations[static_cast<std::size_t>(i - 1)].cell;
    const Eigen::VectorXd probs = mc_predict(mc_, prev);
    const CellId cell = mc_point_prediction(mc_, probs);
    return {cell, lr_.predict(day.contexts[static_cast<std::size_t>(i)])};
}

VehicleScore score_vehicle(const ActivityPredictor& predictor,
                           const std::vector<DaySequence>& test_days,
                           const std::string& vehicle_id) {
    VehicleScore score;
    score.vehicle_id = vehicle_id;

    std::vector<double> truth, predicted;
    int correct = 0;
    for (const auto& day : test_days) {
        for (int i = 0; i < day.length(); ++i) {
            const auto [cell, duration] = predictor.predict(day, i);
            const Observation& o = day.observations[static_cast<std::size_t>(i)];
            if (cell == o.cell) ++correct;
            truth.push_back(o.duration_h);
            predicted.push_back(duration);
        }
    }
    score.n_test_activities = static_cast<int>(truth.size());
    if (truth.empty()) return score;

    score.dest_accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    const double mean =
        std::accumulate(truth.begin(), truth.end(), 0.0) / static_cast<double>(truth.size());
    double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
    score.abs_errors_h.reserve(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double err = truth[i] - predicted[i];
        ss_res += err * err;
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
        abs_sum += std::fabs(err);
        score.abs_errors_h.push_back(std::fabs(err));
    }
    score.duration_mae_h = abs_sum / static_cast<double>(truth.size());
    score.duration_rmse_h = std::sqrt(ss_res / static_cast<double>(truth.size()));
    if (ss_tot > 0.0) score.duration_r2 = 1.0 - ss_res / ss_tot;
    return score;
}

const std::array<const char*, FactorRow::dim>& FactorRow::names() {
    static const std::array<const char*, dim> kNames = {
        "active_days",          "avg_daily_activities", "std_daily_activities",
        "std_first_trip_duration", "n_stays_total",     "nighttime_day_fraction",
        "n_hidden_states"};
    return kNames;
}

Eigen::VectorXd FactorRow::to_vector() const {
    Eigen::VectorXd v(dim);
    v << active_days, avg_daily_activities, std_daily_activities, std_first_trip_duration,
        n_stays_total, nighttime_day_fraction, n_hidden_states;
    return v;
}

namespace {

double population_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    double ss = 0.0;
    for (const double x : xs) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(xs.size()));
}

bool is_nighttime_arrival(const Timestamp& arrival) {
    const int hour = local_hour_int(arrival);
    return hour >= 21 || hour < kOperationalDayStartHour;
}

}  // namespace

FactorRow make_factor_row(const std::vector<ActivityDay>& days, int n_hidden_states) {
    FactorRow row;
    row.active_days = static_cast<double>(days.size());
    row.n_hidden_states = static_cast<double>(n_hidden_states);
    if (days.empty()) return row;

    std::vector<double> counts, first_trips;
    counts.reserve(days.size());
    int total_stays = 0;
    int nighttime_days = 0;
    for (const auto& day : days) {
        counts.push_back(static_cast<double>(day.n_activities()));
        total_stays += day.n_activities();
        if (!day.trip_durations_h.empty()) first_trips.push_back(day.trip_durations_h.front());
        const bool night = std::any_of(day.stays.begin(), day.stays.end(), [](const auto& stay) {
            return is_nighttime_arrival(stay.arrival);
        });
        if (night) ++nighttime_days;
    }
    row.avg_daily_activities =
        std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
    row.std_daily_activities = population_std(counts);
    row.std_first_trip_duration = population_std(first_trips);
    row.n_stays_total = static_cast<double>(total_stays);
    row.nighttime_day_fraction =
        static_cast<double>(nighttime_days) / static_cast<double>(days.size());
    return row;
}

namespace {

std::string star_label(double p) {
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "";
}

std::vector<FactorTableEntry> fit_factor_model(const std::vector<Eigen::VectorXd>& xs,
                                               const std::vector<double>& ys, bool* jittered) {
    const auto n = static_cast<Eigen::Index>(xs.size());
    Eigen::MatrixXd X(n, FactorRow::dim + 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X.row(i).tail(FactorRow::dim) = xs[static_cast<std::size_t>(i)].transpose();
        y(i) = ys[static_cast<std::size_t>(i)];
    }
    const OlsInference fit = ols_with_inference(X, y);
    if (fit.jittered && jittered != nullptr) *jittered = true;

    std::vector<FactorTableEntry> table;
    table.reserve(FactorRow::dim + 1);
    for (int j = 0; j <= FactorRow::dim; ++j) {
        FactorTableEntry entry;
        entry.variable = j == 0 ? "intercept" : FactorRow::names()[static_cast<std::size_t>(j - 1)];
        entry.coef = fit.coef(j);
        entry.std_err = fit.std_err(j);
        entry.p_value = fit.p_value(j);
        entry.stars = star_label(entry.p_value);
        table.push_back(std::move(entry));
    }
    return table;
}

}  // namespace

FactorRegressionResult factor_regression(const std::vector<FactorRow>& rows,
                                         const std::vector<double>& dest_accuracy,
                                         const std::vector<std::optional<double>>& duration_r2) {
    if (rows.size() != dest_accuracy.size() || rows.size() != duration_r2.size()) {
        throw std::invalid_argument("factor_regression: input length mismatch");
    }
    if (rows.size() < 10) {
        throw std::invalid_argument("factor_regression: need at least 10 vehicles");
    }

    FactorRegressionResult result;
    std::vector<Eigen::VectorXd> dest_x, dur_x;
    std::vector<double> dest_y, dur_y;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Eigen::VectorXd x = rows[i].to_vector();
        dest_x.push_back(x);
        dest_y.push_back(dest_accuracy[i]);
        if (duration_r2[i].has_value()) {
            dur_x.push_back(x);
            dur_y.push_back(*duration_r2[i]);
        }
    }
    result.n_vehicles_destination = static_cast<int>(dest_x.size());
    result.n_vehicles_duration = static_cast<int>(dur_x.size());
    if (result.n_vehicles_duration <= FactorRow::dim + 1) {
        throw std::invalid_argument("factor_regression: too few vehicles with duration R^2");
    }
    result.destination = fit_factor_model(dest_x, dest_y, &result.jittered);
    result.duration = fit_factor_model(dur_x, dur_y, &result.jittered);
    return result;
}

std::vector<HistogramBin> error_histogram(const std::vector<double>& abs_errors_h,
                                          double bin_width_h) {
    if (!(bin_width_h > 0.0)) throw std::invalid_argument("error_histogram: bin width must be > 0");
    std::vector<HistogramBin> bins;
    if (abs_errors_h.empty()) return bins;
    const double max_err = *std::max_element(abs_errors_h.begin(), abs_errors_h.end());
    auto n_bins = static_cast<std::size_t>(std::floor(max_err / bin_width_h)) + 1;
    bins.resize(n_bins);
    for (std::size_t b = 0; b < n_bins; ++b) {
        bins[b].lo = static_cast<double>(b) * bin_width_h;
        bins[b].hi = static_cast<double>(b + 1) * bin_width_h;
    }
    for (const double err : abs_errors_h) {
        auto b = static_cast<std::size_t>(std::floor(err / bin_width_h));
        if (b >= n_bins) b = n_bins - 1;
        ++bins[b].count;
    }
    return bins;
}

}  // namespace staycast
