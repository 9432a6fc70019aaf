#include "staycast/predict.hpp"

#include <stdexcept>

namespace staycast {

NextActivityForecast predict_next(const IohmmModel& model,
                                  const std::vector<Observation>& prefix,
                                  const std::vector<Eigen::VectorXd>& contexts, int prefix_len,
                                  int day_index) {
    if (prefix_len < 0 || prefix_len > static_cast<int>(prefix.size())) {
        throw std::invalid_argument("predict_next: prefix_len out of range");
    }
    if (static_cast<int>(contexts.size()) < prefix_len + 1) {
        throw std::invalid_argument("predict_next: need context for the predicted step");
    }
    const Eigen::VectorXd& z_next = contexts[static_cast<std::size_t>(prefix_len)];

    NextActivityForecast out;
    if (prefix_len == 0) {
        out.state_probs = model.initial_probs(z_next);
    } else {
        DaySequence head;
        head.observations.assign(prefix.begin(), prefix.begin() + prefix_len);
        head.contexts.assign(contexts.begin(), contexts.begin() + prefix_len);
        const ForwardFilter filter = forward_filter(head, model, day_index);
        Eigen::VectorXd next =
            model.transition_matrix(z_next).transpose() *
            filter.alpha.row(prefix_len - 1).transpose();
        const double total = next.sum();
        if (!(total > 0.0)) throw NumericalDegeneracyError(day_index, prefix_len + 1);
        out.state_probs = next / total;
    }

    out.dest_probs = Eigen::VectorXd::Zero(model.n_destinations());
    out.duration_h = 0.0;
    for (int u = 0; u < model.n_states; ++u) {
        out.dest_probs += out.state_probs(u) * model.destination_probs(u, z_next);
        out.duration_h += out.state_probs(u) * model.duration_mean(u, z_next);
    }
    const auto point = point_prediction(out, model.destinations);
    out.cell = point.first;
    return out;
}

std::pair<CellId, double> point_prediction(const NextActivityForecast& forecast,
                                           const std::vector<CellId>& destinations) {
    if (destinations.empty() ||
        forecast.dest_probs.size() != static_cast<Eigen::Index>(destinations.size())) {
        throw std::invalid_argument("point_prediction: destination set mismatch");
    }
    // Destinations are sorted by (row, col), so the first maximum is the tie-break winner.
    Eigen::Index best = 0;
    for (Eigen::Index l = 1; l < forecast.dest_probs.size(); ++l) {
        if (forecast.dest_probs(l) > forecast.dest_probs(best)) best = l;
    }
    return {destinations[static_cast<std::size_t>(best)], forecast.duration_h};
}

}  // namespace staycast
