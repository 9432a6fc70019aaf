#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "staycast/evaluation.hpp"
#include "staycast/synth.hpp"

using namespace staycast;

namespace {

ActivityDay calendar_day(const std::string& date, int n_stays) {
    ActivityDay day;
    day.vehicle_id = "t";
    day.date = parse_date(date);
    day.day_start = parse_timestamp(date + "T05:00:00+08:00");
    day.stays.resize(static_cast<std::size_t>(n_stays));
    day.trip_durations_h.assign(static_cast<std::size_t>(n_stays), 1.0);
    return day;
}

DaySequence cycle_day(const std::vector<CellId>& cells, double duration) {
    DaySequence day;
    for (CellId c : cells) {
        day.contexts.emplace_back(Eigen::VectorXd::Ones(1));
        day.observations.push_back({c, duration});
    }
    return day;
}

// Predictor under test control: fixed cell, fixed duration.
class ConstantPredictor final : public ActivityPredictor {
   public:
    ConstantPredictor(CellId cell, double duration) : cell_(cell), duration_(duration) {}
    std::pair<CellId, double> predict(const DaySequence&, int) const override {
        return {cell_, duration_};
    }

   private:
    CellId cell_;
    double duration_;
};

}  // namespace

TEST_CASE("split_days is the chronological ceil(0.7 n) rule") {
    std::vector<ActivityDay> days;
    for (int d = 1; d <= 10; ++d)
        days.push_back(calendar_day("2023-03-" + std::string(d < 10 ? "0" : "") +
                                        std::to_string(d), 2));
    const DaySplit split = split_days(days);
    CHECK(split.train.size() == 7);
    CHECK(split.test.size() == 3);
    CHECK(split.train.back().date < split.test.front().date);

    // Three days round up to an empty test side.
    const std::vector<ActivityDay> three(days.begin(), days.begin() + 3);
    const DaySplit tiny = split_days(three);
    CHECK(tiny.train.size() == 3);
    CHECK(tiny.test.empty());

    CHECK_THROWS(split_days({days[0]}));
    CHECK_THROWS(split_days(days, 0.0));
    std::vector<ActivityDay> shuffled = {days[1], days[0]};
    CHECK_THROWS(split_days(shuffled));
}

TEST_CASE("score_vehicle tallies a perfectly predictable cycle as 1.0") {
    const CellId a{0, 0}, b{0, 1};
    const std::vector<DaySequence> train = {cycle_day({a, b, a, b}, 1.5),
                                            cycle_day({a, b, a, b}, 1.5)};
    const std::vector<DaySequence> test = {cycle_day({a, b, a, b}, 1.5)};
    const MarkovChainModel mc = mc_fit(train, 1.0);
    const LinearDurationModel lr = lr_fit(train);
    const VehicleScore score = score_vehicle(BaselinePredictor(mc, lr), test, "t9");

    CHECK(score.vehicle_id == "t9");
    CHECK(score.n_test_activities == 4);
    CHECK(score.dest_accuracy == 1.0);
    CHECK(score.duration_mae_h < 1e-6);  // WLS round-off only
    CHECK(score.duration_rmse_h < 1e-6);
    // Constant test durations leave R^2 undefined.
    CHECK(!score.duration_r2.has_value());
    CHECK(score.abs_errors_h.size() == 4);
}

TEST_CASE("predicting the test mean pins R^2 at zero") {
    const CellId a{0, 0};
    std::vector<DaySequence> test;
    DaySequence day;
    const double durations[4] = {1.0, 2.0, 3.0, 6.0};
    for (double t : durations) {
        day.contexts.emplace_back(Eigen::VectorXd::Ones(1));
        day.observations.push_back({a, t});
    }
    test.push_back(day);
    const double mean = (1.0 + 2.0 + 3.0 + 6.0) / 4.0;
    const VehicleScore score = score_vehicle(ConstantPredictor(a, mean), test);
    REQUIRE(score.duration_r2.has_value());
    CHECK(*score.duration_r2 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(score.dest_accuracy == 1.0);

    // Worse-than-mean predictions go negative.
    const VehicleScore off = score_vehicle(ConstantPredictor(a, mean + 10.0), test);
    CHECK(*off.duration_r2 < 0.0);
}

TEST_CASE("score_vehicle on an empty test side reports zero activities") {
    const VehicleScore score = score_vehicle(ConstantPredictor(CellId{0, 0}, 1.0), {});
    CHECK(score.n_test_activities == 0);
    CHECK(score.dest_accuracy == 0.0);
    CHECK(!score.duration_r2.has_value());
}

TEST_CASE("IohmmPredictor replays causally and skips unknown prefix cells") {
    const IohmmModel truth = fixture_ground_truth();
    const SequenceFixture fixture = sample_sequence_fixture(truth, 1, 6, 4, 6, 21);
    const IohmmPredictor predictor(truth);

    DaySequence day = fixture.vehicles[0][0];
    const int i = 2;
    const auto before = predictor.predict(day, i);
    day.observations[3].duration_h = 99.0;  // future activity
    day.contexts[3].setConstant(7.0);       // context of a later step
    const auto after = predictor.predict(day, i);
    CHECK(before.first == after.first);
    CHECK(before.second == after.second);

    // An unknown cell in the prefix is dropped together with its context.
    DaySequence with_unknown = fixture.vehicles[0][1];
    DaySequence filtered = with_unknown;
    with_unknown.observations[1].cell = CellId{42, 42};
    filtered.observations.erase(filtered.observations.begin() + 1);
    filtered.contexts.erase(filtered.contexts.begin() + 1);
    const auto skipped = predictor.predict(with_unknown, 3);
    const auto direct = predictor.predict(filtered, 2);
    CHECK(skipped.first == direct.first);
    CHECK(skipped.second == direct.second);

    CHECK_THROWS(predictor.predict(day, day.length()));
    CHECK_THROWS(predictor.predict(day, -1));
}

TEST_CASE("make_factor_row computes the hand-built regressors") {
    ActivityDay d1;
    d1.date = parse_date("2023-03-01");
    d1.trip_durations_h = {3.0, 2.0};
    d1.stays = {
        StayActivity{CellId{0, 0}, parse_timestamp("2023-03-01T08:00:00+08:00"),
                     parse_timestamp("2023-03-01T09:00:00+08:00"), 0, 0},
        StayActivity{CellId{0, 1}, parse_timestamp("2023-03-01T22:30:00+08:00"),
                     parse_timestamp("2023-03-01T23:00:00+08:00"), 0, 0},
    };
    ActivityDay d2;
    d2.date = parse_date("2023-03-03");
    d2.trip_durations_h = {4.5};
    d2.stays = {StayActivity{CellId{0, 0}, parse_timestamp("2023-03-03T09:30:00+08:00"),
                             parse_timestamp("2023-03-03T10:30:00+08:00"), 0, 0}};

    const FactorRow row = make_factor_row({d1, d2}, 4);
    CHECK(row.active_days == 2);
    CHECK(row.avg_daily_activities == doctest::Approx(1.5));
    CHECK(row.std_daily_activities == doctest::Approx(0.5));        // population std of {2, 1}
    CHECK(row.std_first_trip_duration == doctest::Approx(0.75));    // population std of {3, 4.5}
    CHECK(row.n_stays_total == 3);
    CHECK(row.nighttime_day_fraction == doctest::Approx(0.5));      // 22:30 arrival counts
    CHECK(row.n_hidden_states == 4);

    const Eigen::VectorXd v = row.to_vector();
    REQUIRE(v.size() == FactorRow::dim);
    CHECK(v(0) == 2);
    CHECK(v(FactorRow::dim - 1) == 4);
    CHECK(FactorRow::names().size() == FactorRow::dim);
}

TEST_CASE("pre-dawn arrivals also count as nighttime") {
    ActivityDay day;
    day.date = parse_date("2023-03-01");
    day.trip_durations_h = {1.0};
    day.stays = {StayActivity{CellId{0, 0}, parse_timestamp("2023-03-02T04:30:00+08:00"),
                              parse_timestamp("2023-03-02T04:50:00+08:00"), 0, 0}};
    CHECK(make_factor_row({day}, 3).nighttime_day_fraction == 1.0);

    day.stays[0].arrival = parse_timestamp("2023-03-01T20:59:00+08:00");
    CHECK(make_factor_row({day}, 3).nighttime_day_fraction == 0.0);
}

TEST_CASE("factor_regression recovers planted coefficients") {
    std::mt19937_64 rng(0x2026);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n = 30;
    std::vector<FactorRow> rows;
    Eigen::MatrixXd X(n, 1 + FactorRow::dim);
    for (int i = 0; i < n; ++i) {
        FactorRow r;
        r.active_days = 20 + 40 * unif(rng);
        r.avg_daily_activities = 2 + 6 * unif(rng);
        r.std_daily_activities = 0.2 + 1.8 * unif(rng);
        r.std_first_trip_duration = 0.1 + 1.4 * unif(rng);
        r.n_stays_total = r.active_days * r.avg_daily_activities + 10 * unif(rng);
        r.nighttime_day_fraction = 0.5 * unif(rng);
        r.n_hidden_states = 3 + static_cast<int>(6 * unif(rng));
        rows.push_back(r);
        X(i, 0) = 1.0;
        X.row(i).tail(FactorRow::dim) = r.to_vector().transpose();
    }
    Eigen::VectorXd planted(1 + FactorRow::dim);
    planted << 0.3, 0.004, 0.02, -0.05, -0.03, -0.0002, 0.08, 0.01;
    Eigen::VectorXd noise(n);
    for (int i = 0; i < n; ++i) noise(i) = 0.02 * gauss(rng);
    // Orthogonalized noise makes the OLS estimate exactly the planted vector.
    const Eigen::VectorXd resid =
        noise - X * (X.transpose() * X).ldlt().solve(X.transpose() * noise);
    const Eigen::VectorXd y = X * planted + resid;

    std::vector<double> acc(y.data(), y.data() + n);
    std::vector<std::optional<double>> r2;
    // Vehicle 0 has no duration R^2 and must drop out of the duration fit only.
    r2.emplace_back(std::nullopt);
    for (int i = 1; i < n; ++i) r2.emplace_back(y(i));

    const FactorRegressionResult result = factor_regression(rows, acc, r2);
    CHECK(result.n_vehicles_destination == n);
    CHECK(result.n_vehicles_duration == n - 1);
    REQUIRE(result.destination.size() == 1 + FactorRow::dim);
    REQUIRE(result.duration.size() == 1 + FactorRow::dim);
    CHECK(result.destination[0].variable == "intercept");
    for (int j = 0; j < FactorRow::dim; ++j)
        CHECK(result.destination[1 + j].variable == FactorRow::names()[j]);
    for (int j = 0; j < 1 + FactorRow::dim; ++j) {
        const FactorTableEntry& e = result.destination[j];
        CHECK(e.coef == doctest::Approx(planted(j)).epsilon(1e-8));
        CHECK(e.std_err > 0);
        const std::string want = e.p_value < 0.01 ? "**" : (e.p_value < 0.05 ? "*" : "");
        CHECK(e.stars == want);
    }

    CHECK_THROWS(factor_regression({rows[0]}, {acc[0]}, {r2[1]}));  // too few vehicles
}

TEST_CASE("error_histogram bins half-open intervals of the given width") {
    const std::vector<double> errors = {0.1, 0.49, 0.5, 0.7, 1.6};
    const auto bins = error_histogram(errors, 0.5);
    REQUIRE(bins.size() == 4);
    CHECK(bins[0].lo == 0.0);
    CHECK(bins[0].hi == 0.5);
    CHECK(bins[0].count == 2);
    CHECK(bins[1].count == 2);  // 0.5 lands in [0.5, 1.0)
    CHECK(bins[2].count == 0);
    CHECK(bins[3].count == 1);
    int total = 0;
    for (const auto& b : bins) total += b.count;
    CHECK(total == 5);

    CHECK(error_histogram({}, 0.5).empty());
    CHECK_THROWS(error_histogram(errors, 0.0));
}
