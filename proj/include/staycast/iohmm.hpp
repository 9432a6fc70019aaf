#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "staycast/geo.hpp"
#include "staycast/kmeans.hpp"
#include "staycast/sequences.hpp"

namespace staycast {

/// One emitted activity: destination cell and trip duration in hours.
struct Observation {
    CellId cell;
    double duration_h = 0.0;
};

/// One day's aligned inputs and observations (z_1..z_m, o_1..o_m).
struct DaySequence {
    std::vector<Eigen::VectorXd> contexts;
    std::vector<Observation> observations;

    int length() const { return static_cast<int>(observations.size()); }
};

struct UnknownDestinationError : std::runtime_error {
    explicit UnknownDestinationError(CellId cell)
        : std::runtime_error("destination cell (" + std::to_string(cell.row) + ", " +
                             std::to_string(cell.col) + ") is not in the model's destination set"),
          cell(cell) {}
    CellId cell;
};

struct NumericalDegeneracyError : std::runtime_error {
    NumericalDegeneracyError(int day, int step)
        : std::runtime_error("zero total emission mass (day " + std::to_string(day) + ", step " +
                             std::to_string(step) + ")"),
          day(day),
          step(step) {}
    int day, step;
};

/// Per-vehicle model: multinomial-logit initial, transition, and destination
/// distributions plus a Gaussian-linear duration model, all driven by the
/// context vector. Last-category coefficient rows are pinned to zero.
struct IohmmModel {
    int n_states = 0;
    std::vector<CellId> destinations;  // ordered set L
    int context_dim = 0;
    Eigen::MatrixXd lambda_in;                // n_states x d
    std::vector<Eigen::MatrixXd> lambda_tr;   // per previous state: n_states x d
    std::vector<Eigen::MatrixXd> lambda_eml;  // per state: |L| x d
    Eigen::MatrixXd lambda_emt;               // n_states x d
    Eigen::VectorXd sigma;                    // n_states, each >= sigma_floor

    int n_destinations() const { return static_cast<int>(destinations.size()); }

    /// Index of `cell` in L; throws UnknownDestinationError if absent.
    int dest_index(CellId cell) const;
    std::optional<int> try_dest_index(CellId cell) const;

    Eigen::VectorXd initial_probs(const Eigen::VectorXd& z) const;
    Eigen::VectorXd transition_probs(int from_state, const Eigen::VectorXd& z) const;
    /// Row u = transition distribution out of state u.
    Eigen::MatrixXd transition_matrix(const Eigen::VectorXd& z) const;
    Eigen::VectorXd destination_probs(int state, const Eigen::VectorXd& z) const;
    double duration_mean(int state, const Eigen::VectorXd& z) const;
    double duration_density(double t, int state, const Eigen::VectorXd& z) const;
    /// Destination mass times duration density.
    double emission_prob(const Observation& o, int state, const Eigen::VectorXd& z) const;

    /// All-states emission column for one step.
    Eigen::VectorXd emission_vector(const Observation& o, const Eigen::VectorXd& z) const;

    void validate() const;
};

/// Scaled forward/backward tables and posteriors of one day.
struct PosteriorTables {
    Eigen::MatrixXd alpha;  // m x H, each row sums to 1
    Eigen::MatrixXd beta;   // m x H, scaled
    Eigen::MatrixXd gamma;  // m x H, rows sum to 1
    std::vector<Eigen::MatrixXd> xi;  // m-1 matrices, (u, v) = from u at i-1 to v at i
    Eigen::VectorXd scaling;          // m per-step normalizers
    double log_likelihood = 0.0;
};

PosteriorTables forward_backward(const DaySequence& day, const IohmmModel& model,
                                 int day_index = -1);

/// Filtered state distribution P(h_m = . | o_{1:m}, z_{1:m}) plus the day's
/// log-likelihood; the forward half alone.
struct ForwardFilter {
    Eigen::MatrixXd alpha;  // m x H
    double log_likelihood = 0.0;
};
ForwardFilter forward_filter(const DaySequence& day, const IohmmModel& model, int day_index = -1);

struct EmConfig {
    int max_iter = 200;
    double rel_tol = 1e-4;
    double l2 = 1e-4;
    double sigma_floor = 0.01;
};

struct EmTrace {
    std::vector<double> log_likelihood;            // per iteration, before the M-step
    std::vector<double> penalized_log_likelihood;  // log L - (l2/2)||logit coefs||^2
    bool converged = false;
    std::vector<std::string> warnings;
};

/// Soft state assignments used to seed the first M-step: per day, an m x H
/// matrix of responsibilities.
using StateHints = std::vector<Eigen::MatrixXd>;

StateHints hints_from_labels(const std::vector<DaySequence>& days,
                             const std::vector<int>& labels, int n_states,
                             double confidence = 0.9);
StateHints random_hints(const std::vector<DaySequence>& days, int n_states, std::uint64_t seed);

/// EM on one vehicle's day sequences with a fixed state count. The
/// destination set defaults to the cells observed in `days` (sorted); a
/// superset may be supplied.
IohmmModel em_fit(const std::vector<DaySequence>& days, int n_states, const StateHints& init,
                  const EmConfig& config, EmTrace* trace = nullptr,
                  const std::vector<CellId>* destinations = nullptr);

/// Full training recipe: k-means warm start plus one random restart, best
/// final penalized likelihood kept. Deterministic given seed.
IohmmModel fit_vehicle_iohmm(const std::vector<DaySequence>& days,
                             const std::vector<ActivityFeature>& features, int n_states,
                             const EmConfig& config, std::uint64_t seed,
                             EmTrace* trace = nullptr,
                             const std::vector<CellId>* destinations = nullptr);

/// Sorted union of observed destination cells.
std::vector<CellId> observed_destinations(const std::vector<DaySequence>& days);

/// Training view of an ActivityDay: drops the pending-activity context.
DaySequence to_day_sequence(const ActivityDay& day);

double total_log_likelihood(const std::vector<DaySequence>& days, const IohmmModel& model);

}  // namespace staycast
