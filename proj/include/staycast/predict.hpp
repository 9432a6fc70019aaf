#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "staycast/iohmm.hpp"

namespace staycast {

/// One-step-ahead forecast of the next activity within a day.
struct NextActivityForecast {
    Eigen::VectorXd state_probs;  ///< predicted hidden-state distribution for step i+1
    Eigen::VectorXd dest_probs;   ///< distribution over the model's destination set
    CellId cell;                  ///< argmax destination (ties -> smallest (row, col))
    double duration_h = 0.0;      ///< expected trip duration in hours
};

/// Predicts activity i+1 from the first `prefix_len` observed activities of a
/// day plus the context z_{i+1}. `prefix_len == 0` uses the initial-state model.
NextActivityForecast predict_next(const IohmmModel& model,
                                  const std::vector<Observation>& prefix,
                                  const std::vector<Eigen::VectorXd>& contexts, int prefix_len,
                                  int day_index = -1);

/// Argmax cell plus expected duration from a forecast's distributions.
std::pair<CellId, double> point_prediction(const NextActivityForecast& forecast,
                                           const std::vector<CellId>& destinations);

}  // namespace staycast
