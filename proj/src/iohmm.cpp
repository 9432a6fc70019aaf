#include "staycast/iohmm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "staycast/linmodel.hpp"

namespace staycast {

namespace {
constexpr double kSqrt2Pi = 2.5066282746310005024;
constexpr double kEmptySupport = 1e-10;
// Keeps far-tail durations from underflowing the filter to exact zero.
constexpr double kEmissionFloor = 1e-290;
}  // namespace

int IohmmModel::dest_index(CellId cell) const {
    const auto it = std::lower_bound(destinations.begin(), destinations.end(), cell);
    if (it == destinations.end() || *it != cell) throw UnknownDestinationError(cell);
    return static_cast<int>(it - destinations.begin());
}

std::optional<int> IohmmModel::try_dest_index(CellId cell) const {
    const auto it = std::lower_bound(destinations.begin(), destinations.end(), cell);
    if (it == destinations.end() || *it != cell) return std::nullopt;
    return static_cast<int>(it - destinations.begin());
}

Eigen::VectorXd IohmmModel::initial_probs(const Eigen::VectorXd& z) const {
    if (z.size() != context_dim) throw std::invalid_argument("initial_probs: context dim mismatch");
    return softmax(lambda_in * z);
}

Eigen::VectorXd IohmmModel::transition_probs(int from_state, const Eigen::VectorXd& z) const {
    if (z.size() != context_dim) {
        throw std::invalid_argument("transition_probs: context dim mismatch");
    }
    return softmax(lambda_tr[static_cast<std::size_t>(from_state)] * z);
}

Eigen::MatrixXd IohmmModel::transition_matrix(const Eigen::VectorXd& z) const {
    Eigen::MatrixXd phi(n_states, n_states);
    for (int u = 0; u < n_states; ++u) phi.row(u) = transition_probs(u, z).transpose();
    return phi;
}

Eigen::VectorXd IohmmModel::destination_probs(int state, const Eigen::VectorXd& z) const {
    if (z.size() != context_dim) {
        throw std::invalid_argument("destination_probs: context dim mismatch");
    }
    return softmax(lambda_eml[static_cast<std::size_t>(state)] * z);
}

double IohmmModel::duration_mean(int state, const Eigen::VectorXd& z) const {
    return lambda_emt.row(state).dot(z);
}

double IohmmModel::duration_density(double t, int state, const Eigen::VectorXd& z) const {
    const double sd = sigma(state);
    const double r = (t - duration_mean(state, z)) / sd;
    return std::exp(-0.5 * r * r) / (kSqrt2Pi * sd);
}

double IohmmModel::emission_prob(const Observation& o, int state, const Eigen::VectorXd& z) const {
    const int l = dest_index(o.cell);
    const double p = destination_probs(state, z)(l) * duration_density(o.duration_h, state, z);
    return std::max(p, kEmissionFloor);
}

Eigen::VectorXd IohmmModel::emission_vector(const Observation& o, const Eigen::VectorXd& z) const {
    const int l = dest_index(o.cell);
    Eigen::VectorXd delta(n_states);
    for (int u = 0; u < n_states; ++u) {
        delta(u) = std::max(destination_probs(u, z)(l) * duration_density(o.duration_h, u, z),
                            kEmissionFloor);
    }
    return delta;
}

void IohmmModel::validate() const {
    if (n_states < 1) throw std::invalid_argument("model: n_states must be >= 1");
    if (destinations.empty()) throw std::invalid_argument("model: empty destination set");
    if (!std::is_sorted(destinations.begin(), destinations.end())) {
        throw std::invalid_argument("model: destination set must be sorted");
    }
    if (lambda_in.rows() != n_states || lambda_in.cols() != context_dim ||
        static_cast<int>(lambda_tr.size()) != n_states ||
        static_cast<int>(lambda_eml.size()) != n_states || lambda_emt.rows() != n_states ||
        lambda_emt.cols() != context_dim || sigma.size() != n_states) {
        throw std::invalid_argument("model: parameter shape mismatch");
    }
    for (const auto& m : lambda_tr) {
        if (m.rows() != n_states || m.cols() != context_dim) {
            throw std::invalid_argument("model: lambda_tr shape mismatch");
        }
    }
    for (const auto& m : lambda_eml) {
        if (m.rows() != n_destinations() || m.cols() != context_dim) {
            throw std::invalid_argument("model: lambda_eml shape mismatch");
        }
    }
    if ((sigma.array() <= 0.0).any()) throw std::invalid_argument("model: sigma must be positive");
}

ForwardFilter forward_filter(const DaySequence& day, const IohmmModel& model, int day_index) {
    const int m = day.length();
    if (m < 1) throw std::invalid_argument("forward_filter: empty day");
    if (static_cast<int>(day.contexts.size()) < m) {
        throw std::invalid_argument("forward_filter: contexts shorter than observations");
    }
    ForwardFilter out;
    out.alpha.resize(m, model.n_states);
    for (int i = 0; i < m; ++i) {
        Eigen::VectorXd unnorm;
        const Eigen::VectorXd delta =
            model.emission_vector(day.observations[static_cast<std::size_t>(i)],
                                  day.contexts[static_cast<std::size_t>(i)]);
        if (i == 0) {
            unnorm = model.initial_probs(day.contexts[0]).cwiseProduct(delta);
        } else {
            const Eigen::MatrixXd phi =
                model.transition_matrix(day.contexts[static_cast<std::size_t>(i)]);
            unnorm = (phi.transpose() * out.alpha.row(i - 1).transpose()).cwiseProduct(delta);
        }
        const double c = unnorm.sum();
        if (!(c > 0.0) || !std::isfinite(c)) throw NumericalDegeneracyError(day_index, i + 1);
        out.alpha.row(i) = (unnorm / c).transpose();
        out.log_likelihood += std::log(c);
    }
    return out;
}

PosteriorTables forward_backward(const DaySequence& day, const IohmmModel& model, int day_index) {
    const int m = day.length();
    const int h = model.n_states;
    if (m < 1) throw std::invalid_argument("forward_backward: empty day");
    if (static_cast<int>(day.contexts.size()) < m) {
        throw std::invalid_argument("forward_backward: contexts shorter than observations");
    }

    PosteriorTables tables;
    tables.alpha.resize(m, h);
    tables.beta.resize(m, h);
    tables.gamma.resize(m, h);
    tables.scaling.resize(m);

    std::vector<Eigen::VectorXd> deltas(static_cast<std::size_t>(m));
    std::vector<Eigen::MatrixXd> phis(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        deltas[static_cast<std::size_t>(i)] =
            model.emission_vector(day.observations[static_cast<std::size_t>(i)],
                                  day.contexts[static_cast<std::size_t>(i)]);
        if (i > 0) {
            phis[static_cast<std::size_t>(i)] =
                model.transition_matrix(day.contexts[static_cast<std::size_t>(i)]);
        }
    }

    for (int i = 0; i < m; ++i) {
        Eigen::VectorXd unnorm;
        if (i == 0) {
            unnorm = model.initial_probs(day.contexts[0]).cwiseProduct(deltas[0]);
        } else {
            unnorm = (phis[static_cast<std::size_t>(i)].transpose() *
                      tables.alpha.row(i - 1).transpose())
                         .cwiseProduct(deltas[static_cast<std::size_t>(i)]);
        }
        const double c = unnorm.sum();
        if (!(c > 0.0) || !std::isfinite(c)) throw NumericalDegeneracyError(day_index, i + 1);
        tables.scaling(i) = c;
        tables.alpha.row(i) = (unnorm / c).transpose();
    }
    tables.log_likelihood = tables.scaling.array().log().sum();

    tables.beta.row(m - 1).setOnes();
    for (int i = m - 2; i >= 0; --i) {
        const Eigen::VectorXd next =
            deltas[static_cast<std::size_t>(i + 1)].cwiseProduct(tables.beta.row(i + 1).transpose());
        tables.beta.row(i) =
            (phis[static_cast<std::size_t>(i + 1)] * next).transpose() / tables.scaling(i + 1);
    }

    tables.gamma = tables.alpha.cwiseProduct(tables.beta);
    for (int i = 0; i < m; ++i) tables.gamma.row(i) /= tables.gamma.row(i).sum();

    tables.xi.reserve(static_cast<std::size_t>(std::max(0, m - 1)));
    for (int i = 1; i < m; ++i) {
        Eigen::MatrixXd x(h, h);
        for (int u = 0; u < h; ++u) {
            for (int v = 0; v < h; ++v) {
                x(u, v) = tables.alpha(i - 1, u) * phis[static_cast<std::size_t>(i)](u, v) *
                          deltas[static_cast<std::size_t>(i)](v) * tables.beta(i, v) /
                          tables.scaling(i);
            }
        }
        tables.xi.push_back(std::move(x));
    }
    return tables;
}

std::vector<CellId> observed_destinations(const std::vector<DaySequence>& days) {
    std::set<CellId> cells;
    for (const auto& day : days) {
        for (const auto& o : day.observations) cells.insert(o.cell);
    }
    return {cells.begin(), cells.end()};
}

DaySequence to_day_sequence(const ActivityDay& day) {
    DaySequence seq;
    const int m = day.n_activities();
    if (static_cast<int>(day.contexts.size()) < m) {
        throw std::invalid_argument("day has no attached contexts");
    }
    seq.contexts.assign(day.contexts.begin(), day.contexts.begin() + m);
    seq.observations.reserve(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        seq.observations.push_back(Observation{day.stays[static_cast<std::size_t>(i)].cell,
                                               day.trip_durations_h[static_cast<std::size_t>(i)]});
    }
    return seq;
}

double total_log_likelihood(const std::vector<DaySequence>& days, const IohmmModel& model) {
    double ll = 0.0;
    for (std::size_t d = 0; d < days.size(); ++d) {
        ll += forward_filter(days[d], model, static_cast<int>(d)).log_likelihood;
    }
    return ll;
}

StateHints hints_from_labels(const std::vector<DaySequence>& days, const std::vector<int>& labels,
                             int n_states, double confidence) {
    StateHints hints;
    hints.reserve(days.size());
    const double off = n_states > 1 ? (1.0 - confidence) / (n_states - 1) : 0.0;
    std::size_t pos = 0;
    for (const auto& day : days) {
        Eigen::MatrixXd r(day.length(), n_states);
        for (int i = 0; i < day.length(); ++i, ++pos) {
            if (pos >= labels.size()) throw std::invalid_argument("hints: label count mismatch");
            const int label = std::min(labels[pos], n_states - 1);
            for (int u = 0; u < n_states; ++u) {
                r(i, u) = n_states == 1 ? 1.0 : (u == label ? confidence : off);
            }
        }
        hints.push_back(std::move(r));
    }
    if (pos != labels.size()) throw std::invalid_argument("hints: label count mismatch");
    return hints;
}

StateHints random_hints(const std::vector<DaySequence>& days, int n_states, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    StateHints hints;
    hints.reserve(days.size());
    for (const auto& day : days) {
        Eigen::MatrixXd r(day.length(), n_states);
        for (int i = 0; i < day.length(); ++i) {
            double total = 0.0;
            for (int u = 0; u < n_states; ++u) {
                r(i, u) = expo(rng) + 1e-3;
                total += r(i, u);
            }
            r.row(i) /= total;
        }
        hints.push_back(std::move(r));
    }
    return hints;
}

namespace {

struct SufficientStats {
    // gamma and xi tables per day, in model form.
    std::vector<Eigen::MatrixXd> gamma;
    std::vector<std::vector<Eigen::MatrixXd>> xi;
};

// Maximize the three terms of the expected complete-data log-likelihood.
void m_step(const std::vector<DaySequence>& days, const SufficientStats& stats,
            const EmConfig& config, IohmmModel& model, EmTrace* trace) {
    const int h = model.n_states;
    const int n_dest = model.n_destinations();

    // Initial model: one logit over every day's first activity.
    {
        std::vector<LogitRow> rows;
        rows.reserve(days.size() * static_cast<std::size_t>(h));
        for (std::size_t d = 0; d < days.size(); ++d) {
            for (int u = 0; u < h; ++u) {
                rows.push_back(LogitRow{days[d].contexts[0], u, stats.gamma[d](0, u)});
            }
        }
        model.lambda_in = weighted_multinomial_logit_fit(rows, h, config.l2, &model.lambda_in);
    }

    // Transition model: one logit per previous state.
    for (int u = 0; u < h; ++u) {
        std::vector<LogitRow> rows;
        double support = 0.0;
        for (std::size_t d = 0; d < days.size(); ++d) {
            for (int i = 1; i < days[d].length(); ++i) {
                for (int v = 0; v < h; ++v) {
                    const double w = stats.xi[d][static_cast<std::size_t>(i - 1)](u, v);
                    rows.push_back(LogitRow{days[d].contexts[static_cast<std::size_t>(i)], v, w});
                    support += w;
                }
            }
        }
        if (rows.empty() || support < kEmptySupport) continue;  // keep previous coefficients
        model.lambda_tr[static_cast<std::size_t>(u)] = weighted_multinomial_logit_fit(
            rows, h, config.l2, &model.lambda_tr[static_cast<std::size_t>(u)]);
    }

    // Emission models: destination logit and duration regression per state.
    for (int u = 0; u < h; ++u) {
        double support = 0.0;
        std::size_t n_rows = 0;
        for (std::size_t d = 0; d < days.size(); ++d) {
            n_rows += static_cast<std::size_t>(days[d].length());
            for (int i = 0; i < days[d].length(); ++i) support += stats.gamma[d](i, u);
        }
        if (support < kEmptySupport) {
            if (trace != nullptr) {
                trace->warnings.push_back("state " + std::to_string(u) +
                                          " has no posterior support; emissions frozen");
            }
            continue;
        }
        std::vector<LogitRow> dest_rows;
        dest_rows.reserve(n_rows);
        Eigen::MatrixXd Z(n_rows, model.context_dim);
        Eigen::VectorXd t(n_rows), w(n_rows);
        std::size_t r = 0;
        for (std::size_t d = 0; d < days.size(); ++d) {
            for (int i = 0; i < days[d].length(); ++i, ++r) {
                const auto& z = days[d].contexts[static_cast<std::size_t>(i)];
                const auto& o = days[d].observations[static_cast<std::size_t>(i)];
                const double g = stats.gamma[d](i, u);
                dest_rows.push_back(LogitRow{z, model.dest_index(o.cell), g});
                Z.row(static_cast<Eigen::Index>(r)) = z.transpose();
                t(static_cast<Eigen::Index>(r)) = o.duration_h;
                w(static_cast<Eigen::Index>(r)) = g;
            }
        }
        model.lambda_eml[static_cast<std::size_t>(u)] = weighted_multinomial_logit_fit(
            dest_rows, n_dest, config.l2, &model.lambda_eml[static_cast<std::size_t>(u)]);
        const WlsFit fit = weighted_least_squares_fit(Z, t, w, config.sigma_floor);
        model.lambda_emt.row(u) = fit.coef.transpose();
        model.sigma(u) = fit.sigma;
    }
}

double logit_penalty(const IohmmModel& model, double l2) {
    double ss = model.lambda_in.topRows(model.n_states - 1).squaredNorm();
    for (const auto& m : model.lambda_tr) ss += m.topRows(model.n_states - 1).squaredNorm();
    for (const auto& m : model.lambda_eml) {
        ss += m.topRows(std::max<Eigen::Index>(0, m.rows() - 1)).squaredNorm();
    }
    return 0.5 * l2 * ss;
}

}  // namespace

IohmmModel em_fit(const std::vector<DaySequence>& days, int n_states, const StateHints& init,
                  const EmConfig& config, EmTrace* trace,
                  const std::vector<CellId>* destinations) {
    if (days.empty()) throw std::invalid_argument("em_fit: no days");
    if (init.size() != days.size()) throw std::invalid_argument("em_fit: hint/day count mismatch");

    IohmmModel model;
    model.n_states = n_states;
    model.destinations = destinations != nullptr ? *destinations : observed_destinations(days);
    std::sort(model.destinations.begin(), model.destinations.end());
    model.context_dim = static_cast<int>(days.front().contexts.front().size());
    model.lambda_in = Eigen::MatrixXd::Zero(n_states, model.context_dim);
    model.lambda_tr.assign(static_cast<std::size_t>(n_states),
                           Eigen::MatrixXd::Zero(n_states, model.context_dim));
    model.lambda_eml.assign(static_cast<std::size_t>(n_states),
                            Eigen::MatrixXd::Zero(model.n_destinations(), model.context_dim));
    model.lambda_emt = Eigen::MatrixXd::Zero(n_states, model.context_dim);
    model.sigma = Eigen::VectorXd::Constant(n_states, 1.0);

    // Every observed cell must be in L.
    for (const auto& day : days) {
        for (const auto& o : day.observations) model.dest_index(o.cell);
    }

    // First M-step from the supplied soft assignments.
    {
        SufficientStats stats;
        stats.gamma = init;
        stats.xi.resize(days.size());
        for (std::size_t d = 0; d < days.size(); ++d) {
            const Eigen::MatrixXd& r = init[d];
            if (r.rows() != days[d].length() || r.cols() != n_states) {
                throw std::invalid_argument("em_fit: hint shape mismatch");
            }
            for (int i = 1; i < days[d].length(); ++i) {
                stats.xi[d].push_back(r.row(i - 1).transpose() * r.row(i));
            }
        }
        m_step(days, stats, config, model, trace);
    }

    double prev_penalized = -std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < config.max_iter; ++iter) {
        SufficientStats stats;
        stats.gamma.reserve(days.size());
        stats.xi.reserve(days.size());
        double ll = 0.0;
        for (std::size_t d = 0; d < days.size(); ++d) {
            PosteriorTables tables = forward_backward(days[d], model, static_cast<int>(d));
            ll += tables.log_likelihood;
            stats.gamma.push_back(std::move(tables.gamma));
            stats.xi.push_back(std::move(tables.xi));
        }
        if (!std::isfinite(ll)) {
            throw std::runtime_error("em_fit: non-finite log-likelihood at iteration " +
                                     std::to_string(iter));
        }
        const double penalized = ll - logit_penalty(model, config.l2);
        if (trace != nullptr) {
            trace->log_likelihood.push_back(ll);
            trace->penalized_log_likelihood.push_back(penalized);
        }
        if (iter > 0) {
            const double improvement =
                (penalized - prev_penalized) / std::max(1.0, std::fabs(prev_penalized));
            if (improvement < config.rel_tol) {
                if (trace != nullptr) trace->converged = true;
                break;
            }
        }
        prev_penalized = penalized;
        m_step(days, stats, config, model, trace);
    }
    return model;
}

IohmmModel fit_vehicle_iohmm(const std::vector<DaySequence>& days,
                             const std::vector<ActivityFeature>& features, int n_states,
                             const EmConfig& config, std::uint64_t seed, EmTrace* trace,
                             const std::vector<CellId>* destinations) {
    std::size_t n_activities = 0;
    for (const auto& day : days) n_activities += static_cast<std::size_t>(day.length());
    if (features.size() != n_activities) {
        throw std::invalid_argument("fit_vehicle_iohmm: feature/activity count mismatch");
    }

    const auto xs = zscore_features(features);
    const KMeansResult clusters = kmeans_multi(xs, n_states, mix_seed(seed, 1));
    const StateHints warm = hints_from_labels(days, clusters.labels, n_states);
    EmTrace warm_trace;
    IohmmModel warm_model = em_fit(days, n_states, warm, config, &warm_trace, destinations);

    EmTrace rand_trace;
    IohmmModel rand_model = em_fit(days, n_states, random_hints(days, n_states, mix_seed(seed, 2)),
                                   config, &rand_trace, destinations);

    const double warm_final = warm_trace.penalized_log_likelihood.empty()
                                  ? -std::numeric_limits<double>::infinity()
                                  : warm_trace.penalized_log_likelihood.back();
    const double rand_final = rand_trace.penalized_log_likelihood.empty()
                                  ? -std::numeric_limits<double>::infinity()
                                  : rand_trace.penalized_log_likelihood.back();
    if (rand_final > warm_final) {
        if (trace != nullptr) *trace = std::move(rand_trace);
        return rand_model;
    }
    if (trace != nullptr) *trace = std::move(warm_trace);
    return warm_model;
}

}  // namespace staycast
