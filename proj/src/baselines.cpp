#include "staycast/baselines.hpp"

#include <algorithm>
#include <stdexcept>

#include "staycast/linmodel.hpp"

namespace staycast {

int MarkovChainModel::dest_index(CellId cell) const {
    const auto it = std::lower_bound(destinations.begin(), destinations.end(), cell);
    if (it == destinations.end() || *it != cell) throw UnknownDestinationError(cell);
    return static_cast<int>(it - destinations.begin());
}

std::optional<int> MarkovChainModel::try_dest_index(CellId cell) const {
    const auto it = std::lower_bound(destinations.begin(), destinations.end(), cell);
    if (it == destinations.end() || *it != cell) return std::nullopt;
    return static_cast<int>(it - destinations.begin());
}

MarkovChainModel mc_fit(const std::vector<DaySequence>& days, double alpha,
                        const std::vector<CellId>* destinations) {
    if (alpha < 0.0) throw std::invalid_argument("mc_fit: alpha must be non-negative");
    MarkovChainModel model;
    model.alpha = alpha;
    model.destinations = destinations != nullptr ? *destinations : observed_destinations(days);
    std::sort(model.destinations.begin(), model.destinations.end());
    const int n = model.n_destinations();
    if (n == 0) throw std::invalid_argument("mc_fit: empty destination set");

    model.counts = Eigen::MatrixXd::Zero(n + 1, n);
    for (const auto& day : days) {
        int prev_row = 0;  // start-of-day pseudo-state
        for (const auto& o : day.observations) {
            const int l = model.dest_index(o.cell);
            model.counts(prev_row, l) += 1.0;
            prev_row = 1 + l;
        }
    }

    model.transition.resize(n + 1, n);
    const double spread = alpha / n;
    for (int r = 0; r <= n; ++r) {
        const double total = model.counts.row(r).sum() + alpha;
        if (total > 0.0) {
            model.transition.row(r) = (model.counts.row(r).array() + spread) / total;
        } else {
            model.transition.row(r).setConstant(1.0 / n);
        }
    }
    return model;
}

Eigen::VectorXd mc_predict(const MarkovChainModel& model, const std::optional<CellId>& prev) {
    int row = 0;
    if (prev.has_value()) {
        if (const auto l = model.try_dest_index(*prev)) row = 1 + *l;
    }
    return model.transition.row(row).transpose();
}

CellId mc_point_prediction(const MarkovChainModel& model, const Eigen::VectorXd& probs) {
    if (probs.size() != static_cast<Eigen::Index>(model.destinations.size())) {
        throw std::invalid_argument("mc_point_prediction: distribution size mismatch");
    }
    Eigen::Index best = 0;
    for (Eigen::Index l = 1; l < probs.size(); ++l) {
        if (probs(l) > probs(best)) best = l;
    }
    return model.destinations[static_cast<std::size_t>(best)];
}

LinearDurationModel lr_fit(const std::vector<DaySequence>& days) {
    std::size_t n = 0;
    for (const auto& day : days) n += day.observations.size();
    if (n == 0) throw std::invalid_argument("lr_fit: no observations");
    const Eigen::Index dim = days.front().contexts.front().size();
    Eigen::MatrixXd Z(n, dim);
    Eigen::VectorXd t(n);
    Eigen::Index r = 0;
    for (const auto& day : days) {
        for (std::size_t i = 0; i < day.observations.size(); ++i, ++r) {
            Z.row(r) = day.contexts[i].transpose();
            t(r) = day.observations[i].duration_h;
        }
    }
    const WlsFit fit = weighted_least_squares_fit(Z, t, Eigen::VectorXd::Ones(n), 0.0);
    return LinearDurationModel{fit.coef};
}

}  // namespace staycast
