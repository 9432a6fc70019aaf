#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "staycast/baselines.hpp"
#include "staycast/iohmm.hpp"
#include "staycast/predict.hpp"
#include "staycast/sequences.hpp"

namespace staycast {

/// Chronological split: the first ceil(train_frac * n) active days train, the
/// rest test. The test side may be empty (e.g. 3 days at 0.7 -> 3/0).
struct DaySplit {
    std::vector<ActivityDay> train;
    std::vector<ActivityDay> test;
};

DaySplit split_days(const std::vector<ActivityDay>& days, double train_frac = 0.7);

/// Predicts activity i (0-based) of a test day from the day's first i
/// observations plus the context of the predicted step. Implementations hold
/// their fitted model and must be causal in i.
class ActivityPredictor {
   public:
    virtual ~ActivityPredictor() = default;
    virtual std::pair<CellId, double> predict(const DaySequence& day, int i) const = 0;
};

/// Causal replay through predict_next. Prefix activities at cells outside the
/// model's destination set are skipped (the filter cannot condition on them).
class IohmmPredictor final : public ActivityPredictor {
   public:
    explicit IohmmPredictor(const IohmmModel& model) : model_(model) {}
    std::pair<CellId, double> predict(const DaySequence& day, int i) const override;

   private:
    const IohmmModel& model_;
};

/// Markov-chain destination plus linear-regression duration.
class BaselinePredictor final : public ActivityPredictor {
   public:
    BaselinePredictor(const MarkovChainModel& mc, const LinearDurationModel& lr)
        : mc_(mc), lr_(lr) {}
    std::pair<CellId, double> predict(const DaySequence& day, int i) const override;

   private:
    const MarkovChainModel& mc_;
    const LinearDurationModel& lr_;
};

struct VehicleScore {
    std::string vehicle_id;
    double dest_accuracy = 0.0;
    // Missing when test durations have zero variance.
    std::optional<double> duration_r2;
    double duration_mae_h = 0.0;
    double duration_rmse_h = 0.0;
    std::vector<double> abs_errors_h;
    int n_test_activities = 0;
};

/// Replays every test activity through the predictor and scores it. Duration
/// R^2 uses the vehicle's pooled test-duration mean as the reference.
VehicleScore score_vehicle(const ActivityPredictor& predictor,
                           const std::vector<DaySequence>& test_days,
                           const std::string& vehicle_id = {});

/// Per-vehicle regressors of the predictability model.
struct FactorRow {
    double active_days = 0;
    double avg_daily_activities = 0;
    double std_daily_activities = 0;
    double std_first_trip_duration = 0;
    double n_stays_total = 0;
    double nighttime_day_fraction = 0;  // fraction of days with an arrival in [21:00, 05:00)
    double n_hidden_states = 0;

    static constexpr int dim = 7;
    static const std::array<const char*, dim>& names();
    Eigen::VectorXd to_vector() const;
};

/// Factor row over a vehicle's full day history. Standard deviations are
/// population standard deviations (0 for a single day).
FactorRow make_factor_row(const std::vector<ActivityDay>& days, int n_hidden_states);

struct FactorTableEntry {
    std::string variable;
    double coef = 0.0;
    double std_err = 0.0;
    double p_value = 1.0;
    std::string stars;  // "**" p<0.01, "*" p<0.05, else ""
};

struct FactorRegressionResult {
    // intercept first, then the 7 factors in declaration order
    std::vector<FactorTableEntry> destination;
    std::vector<FactorTableEntry> duration;
    int n_vehicles_destination = 0;
    int n_vehicles_duration = 0;
    bool jittered = false;  // a collinear design was stabilized with a ridge term
};

/// Two OLS fits (destination accuracy, duration R^2) over per-vehicle factor
/// rows. Vehicles missing a duration R^2 drop out of the duration fit only.
FactorRegressionResult factor_regression(const std::vector<FactorRow>& rows,
                                         const std::vector<double>& dest_accuracy,
                                         const std::vector<std::optional<double>>& duration_r2);

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;
};

/// Fixed-width histogram of absolute errors starting at zero; covers max(errors).
std::vector<HistogramBin> error_histogram(const std::vector<double>& abs_errors_h,
                                          double bin_width_h = 0.5);

}  // namespace staycast
