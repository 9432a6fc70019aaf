#pragma once

#include <Eigen/Dense>
#include <vector>

#include "staycast/geo.hpp"
#include "staycast/iohmm.hpp"

namespace staycast {

/// First-order Markov chain over destination cells with additive smoothing.
/// Row 0 of `transition` conditions on the start-of-day pseudo-state; row
/// 1 + l conditions on cell index l.
struct MarkovChainModel {
    std::vector<CellId> destinations;  ///< sorted state space L
    double alpha = 1.0;                ///< smoothing pseudo-count, spread as alpha / |L|
    Eigen::MatrixXd counts;            ///< raw transition counts, (1 + |L|) x |L|
    Eigen::MatrixXd transition;        ///< smoothed row-stochastic probabilities

    int n_destinations() const { return static_cast<int>(destinations.size()); }
    int dest_index(CellId cell) const;
    std::optional<int> try_dest_index(CellId cell) const;
};

/// Counts day-start and within-day transitions over the training days.
MarkovChainModel mc_fit(const std::vector<DaySequence>& days, double alpha,
                        const std::vector<CellId>* destinations = nullptr);

/// Next-cell distribution given the previous cell (or nothing at day start).
/// Cells outside the state space fall back to the day-start row.
Eigen::VectorXd mc_predict(const MarkovChainModel& model, const std::optional<CellId>& prev);

/// Argmax cell of an MC prediction; ties break to the smallest (row, col).
CellId mc_point_prediction(const MarkovChainModel& model, const Eigen::VectorXd& probs);

/// Ordinary least squares from context vector to trip duration (hours).
struct LinearDurationModel {
    Eigen::VectorXd coef;

    double predict(const Eigen::VectorXd& z) const { return coef.dot(z); }
};

LinearDurationModel lr_fit(const std::vector<DaySequence>& days);

}  // namespace staycast
