#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "staycast/baselines.hpp"
#include "staycast/linmodel.hpp"

using namespace staycast;

namespace {

DaySequence day_of(std::vector<CellId> cells) {
    DaySequence d;
    for (CellId c : cells) {
        d.contexts.emplace_back(Eigen::VectorXd::Ones(1));
        d.observations.push_back({c, 1.0});
    }
    return d;
}

const CellId kA{0, 0}, kB{0, 1};

// Day-first counts C(a)=3 of V=4; within-day pairs a->b once, b->a twice.
std::vector<DaySequence> hand_fixture() {
    return {day_of({kA}), day_of({kA}), day_of({kA, kB, kA}), day_of({kB, kA})};
}

}  // namespace

TEST_CASE("mc_fit reproduces the hand-counted smoothed distributions") {
    const MarkovChainModel mc = mc_fit(hand_fixture(), 1.0);
    REQUIRE(mc.n_destinations() == 2);
    const int ia = mc.dest_index(kA), ib = mc.dest_index(kB);

    // Raw counts: start row (3, 1); from a (0, 1); from b (2, 0).
    CHECK(mc.counts(0, ia) == 3.0);
    CHECK(mc.counts(0, ib) == 1.0);
    CHECK(mc.counts(1 + ia, ia) == 0.0);
    CHECK(mc.counts(1 + ia, ib) == 1.0);
    CHECK(mc.counts(1 + ib, ia) == 2.0);
    CHECK(mc.counts(1 + ib, ib) == 0.0);

    // Additive smoothing alpha/|L| = 0.5 per cell.
    CHECK(mc.transition(0, ia) == doctest::Approx(0.7).epsilon(1e-14));          // (3+.5)/5
    CHECK(mc.transition(0, ib) == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(mc.transition(1 + ib, ia) == doctest::Approx(5.0 / 6.0).epsilon(1e-14));  // (2+.5)/3
    CHECK(mc.transition(1 + ia, ib) == doctest::Approx(0.75).epsilon(1e-14));    // (1+.5)/2

    for (int r = 0; r < mc.transition.rows(); ++r)
        CHECK(mc.transition.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mc_predict dispatches between the day-start row and the previous cell") {
    const MarkovChainModel mc = mc_fit(hand_fixture(), 1.0);
    const int ia = mc.dest_index(kA);

    const Eigen::VectorXd first = mc_predict(mc, std::nullopt);
    CHECK(first(ia) == doctest::Approx(0.7).epsilon(1e-14));

    const Eigen::VectorXd from_b = mc_predict(mc, kB);
    CHECK(from_b(ia) == doctest::Approx(5.0 / 6.0).epsilon(1e-14));

    // A previous cell outside the state space falls back to the day-start row.
    const Eigen::VectorXd unknown = mc_predict(mc, CellId{7, 7});
    CHECK((unknown - first).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("a destination superset reserves smoothed mass for unseen cells") {
    const std::vector<CellId> superset = {kA, kB, CellId{5, 5}};
    const MarkovChainModel mc = mc_fit(hand_fixture(), 1.0, &superset);
    REQUIRE(mc.n_destinations() == 3);
    const int unseen = mc.dest_index(CellId{5, 5});
    // (0 + 1/3) / (4 + 1) at the day start.
    CHECK(mc_predict(mc, std::nullopt)(unseen) == doctest::Approx((1.0 / 3.0) / 5.0));
    for (int r = 0; r < mc.transition.rows(); ++r)
        CHECK(mc.transition.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero smoothing keeps empirical frequencies and alpha must be sane") {
    const MarkovChainModel mc = mc_fit(hand_fixture(), 0.0);
    CHECK(mc.transition(0, mc.dest_index(kA)) == doctest::Approx(0.75).epsilon(1e-14));
    CHECK_THROWS(mc_fit(hand_fixture(), -1.0));
    CHECK_THROWS(mc_fit({}, 1.0));  // no days -> empty state space
}

TEST_CASE("mc_point_prediction takes the argmax with lexicographic ties") {
    const std::vector<CellId> superset = {kA, kB, CellId{1, 0}};
    const MarkovChainModel mc = mc_fit(hand_fixture(), 1.0, &superset);
    Eigen::Vector3d tied(0.4, 0.4, 0.2);
    CHECK(mc_point_prediction(mc, tied) == kA);
    Eigen::Vector3d clear(0.1, 0.2, 0.7);
    CHECK(mc_point_prediction(mc, clear) == CellId{1, 0});
    Eigen::Vector2d wrong_size(0.5, 0.5);
    CHECK_THROWS(mc_point_prediction(mc, wrong_size));
}

TEST_CASE("lr_fit solves the same normal equations as ordinary least squares") {
    std::mt19937_64 rng(15);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<DaySequence> days;
    Eigen::MatrixXd Z(40, 3);
    Eigen::VectorXd t(40);
    int row = 0;
    for (int d = 0; d < 10; ++d) {
        DaySequence day;
        for (int i = 0; i < 4; ++i, ++row) {
            Eigen::Vector3d z(gauss(rng), gauss(rng), 1.0);
            const double duration = 1.5 + 0.8 * z(0) - 0.4 * z(1) + 0.05 * gauss(rng);
            day.contexts.push_back(z);
            day.observations.push_back({kA, duration});
            Z.row(row) = z.transpose();
            t(row) = duration;
        }
        days.push_back(day);
    }
    const LinearDurationModel lr = lr_fit(days);
    const WlsFit direct = weighted_least_squares_fit(Z, t, Eigen::VectorXd::Ones(40), 0.0);
    CHECK((lr.coef - direct.coef).cwiseAbs().maxCoeff() < 1e-10);

    Eigen::Vector3d z(0.2, -0.3, 1.0);
    CHECK(lr.predict(z) == doctest::Approx(lr.coef.dot(z)).epsilon(1e-14));
    CHECK_THROWS(lr_fit({}));
}

TEST_CASE("lr_fit recovers an exactly linear duration law") {
    std::vector<DaySequence> days;
    DaySequence day;
    for (int i = 0; i < 6; ++i) {
        Eigen::Vector2d z(static_cast<double>(i), 1.0);
        day.contexts.push_back(z);
        day.observations.push_back({kA, 0.5 * i + 2.0});
    }
    days.push_back(day);
    const LinearDurationModel lr = lr_fit(days);
    CHECK(std::abs(lr.coef(0) - 0.5) < 1e-8);
    CHECK(std::abs(lr.coef(1) - 2.0) < 1e-8);
}
