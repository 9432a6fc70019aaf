#pragma once

#include <Eigen/Dense>
#include <vector>

namespace staycast {

/// Numerically safe softmax of a logit vector; strictly positive, sums to 1.
Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

/// One training row of a weighted multinomial logit problem.
struct LogitRow {
    Eigen::VectorXd z;
    int category = 0;
    double weight = 1.0;
};

/// Maximize sum_i w_i log P(cat_i | z_i) - (l2/2)||coef||^2 over coefficient
/// matrix (n_categories x d) with the last category's row pinned to zero.
/// Damped Newton; converged when the penalized gradient inf-norm is <= grad_tol.
/// Throws if the coefficient norm diverges with l2 == 0 (perfect separation).
Eigen::MatrixXd weighted_multinomial_logit_fit(const std::vector<LogitRow>& rows,
                                               int n_categories, double l2,
                                               const Eigen::MatrixXd* warm_start = nullptr,
                                               int max_iter = 200, double grad_tol = 1e-6);

struct WlsFit {
    Eigen::VectorXd coef;
    double sigma = 0.0;  // sqrt(weighted mean squared residual), floored
};

/// Weighted least squares via normal equations with a 1e-8 ridge jitter on
/// the Gram matrix. sigma = max(sqrt(sum w r^2 / sum w), sigma_floor).
WlsFit weighted_least_squares_fit(const Eigen::MatrixXd& Z, const Eigen::VectorXd& t,
                                  const Eigen::VectorXd& w, double sigma_floor);

struct OlsInference {
    Eigen::VectorXd coef;
    Eigen::VectorXd std_err;
    Eigen::VectorXd t_stat;
    Eigen::VectorXd p_value;  // two-sided
    double sigma2 = 0.0;      // RSS / (n - p)
    int df = 0;
    bool jittered = false;    // collinear design handled with 1e-8 ridge
};

/// OLS with classic (X^T X)^{-1} sigma^2 standard errors and t-test p-values.
OlsInference ols_with_inference(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

}  // namespace staycast
