#include "staycast/linmodel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "staycast/stats.hpp"

namespace staycast {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    Eigen::VectorXd p = (logits.array() - logits.maxCoeff()).exp();
    return p / p.sum();
}

namespace {

double logit_objective(const std::vector<LogitRow>& rows, const Eigen::MatrixXd& coef,
                       double l2) {
    const int n_free = static_cast<int>(coef.rows()) - 1;
    double f = 0.0;
    for (const auto& row : rows) {
        if (row.weight == 0.0) continue;
        const Eigen::VectorXd logits = coef * row.z;
        const double lse = std::log((logits.array() - logits.maxCoeff()).exp().sum()) +
                           logits.maxCoeff();
        f += row.weight * (logits(row.category) - lse);
    }
    f -= 0.5 * l2 * coef.topRows(n_free).squaredNorm();
    return f;
}

}  // namespace

Eigen::MatrixXd weighted_multinomial_logit_fit(const std::vector<LogitRow>& rows,
                                               int n_categories, double l2,
                                               const Eigen::MatrixXd* warm_start, int max_iter,
                                               double grad_tol) {
    if (rows.empty()) throw std::invalid_argument("logit fit: no rows");
    const int d = static_cast<int>(rows.front().z.size());
    if (n_categories < 1) throw std::invalid_argument("logit fit: n_categories must be >= 1");
    double total_weight = 0.0;
    for (const auto& row : rows) {
        if (row.z.size() != d) throw std::invalid_argument("logit fit: inconsistent row dimension");
        if (row.category < 0 || row.category >= n_categories) {
            throw std::invalid_argument("logit fit: category out of range");
        }
        if (row.weight < 0.0) throw std::invalid_argument("logit fit: negative weight");
        total_weight += row.weight;
    }
    if (total_weight <= 0.0) throw std::invalid_argument("logit fit: total weight must be > 0");

    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(n_categories, d);
    if (warm_start != nullptr && warm_start->rows() == n_categories && warm_start->cols() == d) {
        coef = *warm_start;
        coef.row(n_categories - 1).setZero();
    }
    if (n_categories == 1) return coef;

    const int n_free = n_categories - 1;
    const int n_params = n_free * d;
    double f = logit_objective(rows, coef, l2);

    for (int iter = 0; iter < max_iter; ++iter) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_params);
        Eigen::MatrixXd neg_hess = Eigen::MatrixXd::Zero(n_params, n_params);
        for (const auto& row : rows) {
            if (row.weight == 0.0) continue;
            const Eigen::VectorXd p = softmax(coef * row.z);
            const Eigen::MatrixXd zz = row.z * row.z.transpose();
            for (int k = 0; k < n_free; ++k) {
                const double gk = row.weight * ((row.category == k ? 1.0 : 0.0) - p(k));
                grad.segment(k * d, d) += gk * row.z;
                for (int j = 0; j < n_free; ++j) {
                    const double h = row.weight * p(k) * ((k == j ? 1.0 : 0.0) - p(j));
                    neg_hess.block(k * d, j * d, d, d) += h * zz;
                }
            }
        }
        for (int k = 0; k < n_free; ++k) {
            grad.segment(k * d, d) -= l2 * coef.row(k).transpose();
        }
        neg_hess.diagonal().array() += l2;
        if (grad.lpNorm<Eigen::Infinity>() <= grad_tol) return coef;

        // Keep the solve well posed when l2 == 0.
        const double jitter = 1e-12 * std::max(1.0, neg_hess.diagonal().maxCoeff());
        neg_hess.diagonal().array() += jitter;
        const Eigen::VectorXd direction = neg_hess.ldlt().solve(grad);
        if (!direction.allFinite()) {
            throw std::runtime_error("logit fit: Newton direction is not finite");
        }

        double step = 1.0;
        bool accepted = false;
        for (int half = 0; half < 50; ++half) {
            Eigen::MatrixXd trial = coef;
            for (int k = 0; k < n_free; ++k) {
                trial.row(k) += step * direction.segment(k * d, d).transpose();
            }
            const double f_trial = logit_objective(rows, trial, l2);
            if (std::isfinite(f_trial) && f_trial >= f) {
                coef = std::move(trial);
                f = f_trial;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) return coef;  // at numerical optimum, no ascent step remains
        if (l2 == 0.0 && coef.lpNorm<Eigen::Infinity>() > 1e3) {
            throw std::runtime_error(
                "logit fit: coefficient norm diverging (perfectly separable data); set l2 > 0");
        }
    }
    return coef;
}

WlsFit weighted_least_squares_fit(const Eigen::MatrixXd& Z, const Eigen::VectorXd& t,
                                  const Eigen::VectorXd& w, double sigma_floor) {
    if (Z.rows() != t.size() || Z.rows() != w.size()) {
        throw std::invalid_argument("weighted least squares: shape mismatch");
    }
    const double total_weight = w.sum();
    if (total_weight <= 0.0) {
        throw std::invalid_argument("weighted least squares: total weight must be > 0");
    }
    const Eigen::MatrixXd wz = w.asDiagonal() * Z;
    Eigen::MatrixXd gram = Z.transpose() * wz;
    gram.diagonal().array() += 1e-8;
    const Eigen::VectorXd rhs = wz.transpose() * t;
    WlsFit fit;
    fit.coef = gram.ldlt().solve(rhs);
    const Eigen::VectorXd residual = t - Z * fit.coef;
    const double msr = (w.array() * residual.array().square()).sum() / total_weight;
    fit.sigma = std::max(std::sqrt(std::max(msr, 0.0)), sigma_floor);
    return fit;
}

OlsInference ols_with_inference(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    if (n != y.size()) throw std::invalid_argument("ols: shape mismatch");
    if (n <= p) throw std::invalid_argument("ols: need more rows than parameters");

    OlsInference out;
    Eigen::MatrixXd xtx = X.transpose() * X;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtx);
    if (eig.eigenvalues().minCoeff() < 1e-10 * std::max(1.0, eig.eigenvalues().maxCoeff())) {
        xtx.diagonal().array() += 1e-8;
        out.jittered = true;
    }
    const Eigen::MatrixXd xtx_inv = xtx.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    out.coef = xtx_inv * (X.transpose() * y);
    const double rss = (y - X * out.coef).squaredNorm();
    out.df = n - p;
    out.sigma2 = rss / static_cast<double>(out.df);
    out.std_err = (out.sigma2 * xtx_inv.diagonal().array()).sqrt();
    out.t_stat = out.coef.array() / out.std_err.array();
    out.p_value.resize(p);
    for (int j = 0; j < p; ++j) {
        out.p_value(j) = student_t_two_sided_p(out.t_stat(j), static_cast<double>(out.df));
    }
    return out;
}

}  // namespace staycast
