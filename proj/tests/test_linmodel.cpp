#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "staycast/linmodel.hpp"
#include "staycast/stats.hpp"

using namespace staycast;

namespace {

double logit_objective(const std::vector<LogitRow>& rows, const Eigen::MatrixXd& coef,
                       double l2) {
    double value = 0.0;
    for (const auto& r : rows) value += r.weight * std::log(softmax(coef * r.z)(r.category));
    return value - 0.5 * l2 * coef.squaredNorm();
}

std::vector<LogitRow> sample_logit_rows(const Eigen::MatrixXd& planted, int n,
                                        std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<LogitRow> rows;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd z(planted.cols());
        for (int j = 0; j + 1 < z.size(); ++j) z(j) = gauss(rng);
        z(z.size() - 1) = 1.0;
        const Eigen::VectorXd p = softmax(planted * z);
        std::discrete_distribution<int> cat(p.data(), p.data() + p.size());
        rows.push_back({z, cat(rng), 1.0});
    }
    return rows;
}

}  // namespace

TEST_CASE("softmax matches hand values and is shift invariant") {
    Eigen::Vector3d logits(std::log(1.0), std::log(2.0), std::log(3.0));
    const Eigen::VectorXd p = softmax(logits);
    CHECK(p(0) == doctest::Approx(1.0 / 6).epsilon(1e-14));
    CHECK(p(1) == doctest::Approx(2.0 / 6).epsilon(1e-14));
    CHECK(p(2) == doctest::Approx(3.0 / 6).epsilon(1e-14));

    const Eigen::VectorXd shifted = softmax((logits.array() + 1000.0).matrix());
    CHECK((shifted - p).cwiseAbs().maxCoeff() < 1e-12);

    // Extreme logits stay finite and normalized; exp(-1600) may underflow to 0.
    Eigen::Vector3d extreme(800.0, -800.0, 0.0);
    const Eigen::VectorXd q = softmax(extreme);
    CHECK(q.allFinite());
    CHECK(q.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q.minCoeff() >= 0.0);
}

TEST_CASE("logit fit reaches a stationary point of the penalized objective") {
    Eigen::MatrixXd planted(3, 3);
    planted << 1.2, -0.8, 0.5, -0.6, 0.9, -1.1, 0.0, 0.0, 0.0;
    auto rows = sample_logit_rows(planted, 250, 42);
    std::mt19937_64 rng(43);
    std::uniform_real_distribution<double> wgt(0.5, 2.0);
    for (auto& r : rows) r.weight = wgt(rng);

    const double l2 = 0.1;
    const Eigen::MatrixXd fitted = weighted_multinomial_logit_fit(rows, 3, l2);
    CHECK(fitted.row(2).cwiseAbs().maxCoeff() == 0.0);  // last category pinned

    const double h = 1e-4;
    for (int u = 0; u < 2; ++u)
        for (int j = 0; j < 3; ++j) {
            Eigen::MatrixXd up = fitted, down = fitted;
            up(u, j) += h;
            down(u, j) -= h;
            const double fd =
                (logit_objective(rows, up, l2) - logit_objective(rows, down, l2)) / (2 * h);
            CHECK(std::abs(fd) < 1e-5);
        }
}

TEST_CASE("logit fit recovers planted coefficients from a large sample") {
    Eigen::MatrixXd planted(3, 3);
    planted << 1.2, -0.8, 0.5, -0.6, 0.9, -1.1, 0.0, 0.0, 0.0;
    const auto rows = sample_logit_rows(planted, 10000, 7);
    const Eigen::MatrixXd fitted = weighted_multinomial_logit_fit(rows, 3, 1e-6);
    CHECK((fitted - planted).norm() / planted.norm() < 0.05);
}

TEST_CASE("duplicating a row equals doubling its weight") {
    Eigen::MatrixXd planted(2, 2);
    planted << 0.8, -0.3, 0.0, 0.0;
    auto rows = sample_logit_rows(planted, 60, 11);

    auto doubled = rows;
    doubled[0].weight = 2.0;
    auto duplicated = rows;
    duplicated.push_back(rows[0]);

    const Eigen::MatrixXd a = weighted_multinomial_logit_fit(doubled, 2, 0.05);
    const Eigen::MatrixXd b = weighted_multinomial_logit_fit(duplicated, 2, 0.05);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("warm start at the optimum returns the optimum") {
    Eigen::MatrixXd planted(2, 2);
    planted << 1.0, -0.5, 0.0, 0.0;
    const auto rows = sample_logit_rows(planted, 100, 3);
    const Eigen::MatrixXd cold = weighted_multinomial_logit_fit(rows, 2, 0.1);
    const Eigen::MatrixXd warm = weighted_multinomial_logit_fit(rows, 2, 0.1, &cold);
    CHECK((warm - cold).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("perfect separation throws without a penalty and fits with one") {
    // Positive z always labels category 0: the unpenalized MLE diverges. The
    // tiny margin keeps the gradient above tolerance until the coefficient
    // norm crosses the divergence guard.
    std::vector<LogitRow> rows;
    for (int i = 1; i <= 20; ++i) {
        Eigen::VectorXd z(1);
        z << (i % 2 == 0 ? 0.01 : -0.01);
        rows.push_back({z, i % 2 == 0 ? 0 : 1, 1.0});
    }
    CHECK_THROWS(weighted_multinomial_logit_fit(rows, 2, 0.0));
    const Eigen::MatrixXd fitted = weighted_multinomial_logit_fit(rows, 2, 0.1);
    CHECK(fitted.allFinite());
}

TEST_CASE("weighted least squares reproduces exact-linear data") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> wgt(0.5, 2.0);
    Eigen::MatrixXd Z(60, 3);
    Eigen::VectorXd w(60);
    for (int i = 0; i < 60; ++i) {
        Z(i, 0) = gauss(rng);
        Z(i, 1) = gauss(rng);
        Z(i, 2) = 1.0;
        w(i) = wgt(rng);
    }
    const Eigen::Vector3d truth(0.8, -1.3, 2.1);
    const WlsFit fit = weighted_least_squares_fit(Z, Z * truth, w, 0.01);
    CHECK((fit.coef - truth).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(fit.sigma == 0.01);  // residual-free fit lands on the floor

    // Noisy fit: sigma equals the weighted RMS residual.
    Eigen::VectorXd noisy = Z * truth;
    for (int i = 0; i < 60; ++i) noisy(i) += gauss(rng);
    const WlsFit loose = weighted_least_squares_fit(Z, noisy, w, 0.01);
    const Eigen::VectorXd resid = noisy - Z * loose.coef;
    const double expected =
        std::sqrt((w.array() * resid.array().square()).sum() / w.sum());
    CHECK(loose.sigma == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("weighted least squares treats weights as replication") {
    Eigen::MatrixXd Z(4, 2);
    Z << 1, 1, 2, 1, 3, 1, 4, 1;
    Eigen::VectorXd t(4);
    t << 2.1, 3.9, 6.2, 7.8;
    Eigen::VectorXd w(4);
    w << 2, 1, 1, 1;

    Eigen::MatrixXd Z2(5, 2);
    Z2 << 1, 1, 1, 1, 2, 1, 3, 1, 4, 1;
    Eigen::VectorXd t2(5);
    t2 << 2.1, 2.1, 3.9, 6.2, 7.8;
    const WlsFit a = weighted_least_squares_fit(Z, t, w, 0.01);
    const WlsFit b = weighted_least_squares_fit(Z2, t2, Eigen::VectorXd::Ones(5), 0.01);
    CHECK((a.coef - b.coef).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(a.sigma == doctest::Approx(b.sigma).epsilon(1e-10));
}

TEST_CASE("ols inference recovers coefficients and flags collinearity") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n = 80;
    Eigen::MatrixXd X(n, 3);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = gauss(rng);
        X(i, 2) = gauss(rng);
    }
    const Eigen::Vector3d planted(0.5, 2.0, -1.0);
    Eigen::VectorXd noise(n);
    for (int i = 0; i < n; ++i) noise(i) = 0.3 * gauss(rng);
    // Project the noise off the design so OLS recovers `planted` exactly.
    const Eigen::VectorXd resid =
        noise - X * (X.transpose() * X).ldlt().solve(X.transpose() * noise);
    const OlsInference fit = ols_with_inference(X, X * planted + resid);

    CHECK((fit.coef - planted).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(fit.df == n - 3);
    CHECK(fit.sigma2 == doctest::Approx(resid.squaredNorm() / (n - 3)).epsilon(1e-10));
    CHECK(!fit.jittered);
    for (int j = 0; j < 3; ++j) {
        CHECK(fit.std_err(j) > 0);
        CHECK(fit.t_stat(j) == doctest::Approx(fit.coef(j) / fit.std_err(j)).epsilon(1e-12));
        CHECK(fit.p_value(j) ==
              doctest::Approx(student_t_two_sided_p(fit.t_stat(j), fit.df)).epsilon(1e-12));
    }
    // Strong planted effects are significant; with noise sd 0.3 over 80 rows
    // the slope t statistics are enormous.
    CHECK(fit.p_value(1) < 1e-6);

    Eigen::MatrixXd collinear(n, 3);
    collinear.col(0) = X.col(0);
    collinear.col(1) = X.col(1);
    collinear.col(2) = 2.0 * X.col(1);
    const OlsInference degenerate = ols_with_inference(collinear, X * planted + resid);
    CHECK(degenerate.jittered);
    CHECK(degenerate.coef.allFinite());
}

TEST_CASE("student t p-values match table references") {
    // Classic two-sided critical values.
    CHECK(student_t_two_sided_p(2.228, 10) == doctest::Approx(0.05).epsilon(2e-3));
    CHECK(student_t_two_sided_p(12.706, 1) == doctest::Approx(0.05).epsilon(2e-3));
    CHECK(student_t_two_sided_p(1.96, 2000000) == doctest::Approx(0.05).epsilon(2e-3));
    CHECK(student_t_two_sided_p(0.0, 5) == doctest::Approx(1.0));
    CHECK(student_t_two_sided_p(-2.228, 10) ==
          doctest::Approx(student_t_two_sided_p(2.228, 10)).epsilon(1e-12));
    CHECK(student_t_two_sided_p(50.0, 30) < 1e-10);

    // I_x(1, b) = 1 - (1-x)^b; I_.5(a, a) = .5 by symmetry.
    CHECK(incomplete_beta(1.0, 3.0, 0.2) == doctest::Approx(1 - std::pow(0.8, 3)).epsilon(1e-10));
    CHECK(incomplete_beta(2.5, 2.5, 0.5) == doctest::Approx(0.5).epsilon(1e-10));
}
