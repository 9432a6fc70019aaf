// Pipeline driver: trajectories CSV -> stays -> sequences -> models ->
// forecasts -> evaluation tables, plus a synthetic-fleet generator.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "staycast/config.hpp"
#include "staycast/evaluation.hpp"
#include "staycast/model_io.hpp"
#include "staycast/predict.hpp"
#include "staycast/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace staycast;

namespace {

std::mutex g_log_mutex;

void log_line(const std::string& stage, const std::string& message) {
    std::scoped_lock lock(g_log_mutex);
    std::cerr << "[" << stage << "] " << message << "\n";
}

struct CommonArgs {
    std::string config_path;
    std::string input;
    std::string out;
    std::string vehicles;  // comma-separated filter
    int jobs = 1;
    std::int64_t seed = -1;  // >= 0 overrides config.seed
};

ToolkitConfig resolve_config(const CommonArgs& args) {
    ToolkitConfig config;
    if (!args.config_path.empty()) config = load_config_file(args.config_path);
    if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
    config.validate();
    return config;
}

std::set<std::string> vehicle_filter(const std::string& csv) {
    std::set<std::string> ids;
    std::stringstream ss(csv);
    std::string id;
    while (std::getline(ss, id, ',')) {
        if (!id.empty()) ids.insert(id);
    }
    return ids;
}

template <typename Map>
void apply_filter(Map& by_vehicle, const std::string& csv) {
    if (csv.empty()) return;
    const auto keep = vehicle_filter(csv);
    for (auto it = by_vehicle.begin(); it != by_vehicle.end();) {
        it = keep.count(it->first) ? std::next(it) : by_vehicle.erase(it);
    }
}

/// Runs fn(id) over ids with a small worker pool; rethrows the first failure.
void parallel_over_vehicles(const std::vector<std::string>& ids, int jobs,
                            const std::function<void(const std::string&)>& fn) {
    jobs = std::clamp<int>(jobs, 1, std::max<int>(1, static_cast<int>(ids.size())));
    if (jobs == 1) {
        for (const auto& id : ids) fn(id);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    std::vector<std::thread> pool;
    for (int w = 0; w < jobs; ++w) {
        pool.emplace_back([&, w] {
            std::size_t i = 0;
            try {
                while ((i = next.fetch_add(1)) < ids.size()) fn(ids[i]);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
                next = ids.size();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::uint64_t vehicle_seed(const ToolkitConfig& config, const std::string& vehicle_id) {
    return mix_seed(config.seed, fnv1a(vehicle_id));
}

// ---------------------------------------------------------------- extract

int cmd_extract_stays(const CommonArgs& args) {
    const ToolkitConfig config = resolve_config(args);
    std::ifstream in(args.input);
    if (!in) throw std::runtime_error("cannot open '" + args.input + "'");
    IngestResult ingest = ingest_trajectories(in);
    apply_filter(ingest.vehicles, args.vehicles);
    if (!ingest.skipped.empty()) {
        log_line("extract-stays", std::to_string(ingest.skipped.size()) + " of " +
                                      std::to_string(ingest.n_rows) + " rows skipped");
        for (std::size_t i = 0; i < std::min<std::size_t>(5, ingest.skipped.size()); ++i) {
            log_line("extract-stays", "  line " + std::to_string(ingest.skipped[i].line_no) +
                                          ": " + ingest.skipped[i].reason);
        }
    }
    if (ingest.vehicles.empty()) throw std::runtime_error("no vehicles in input");

    StaysArtifact artifact;
    artifact.thresholds = config.thresholds;
    if (config.grid.n_rows > 0 && config.grid.n_cols > 0) {
        artifact.grid = config.grid;
    } else {
        std::vector<TrajectoryPoint> all;
        for (const auto& [id, points] : ingest.vehicles) {
            all.insert(all.end(), points.begin(), points.end());
        }
        artifact.grid = grid_covering(all, config.grid.cell_side_m);
        log_line("extract-stays",
                 "derived grid: " + std::to_string(artifact.grid.n_rows) + " x " +
                     std::to_string(artifact.grid.n_cols) + " cells of " +
                     std::to_string(artifact.grid.cell_side_m) + " m");
    }

    std::size_t n_outside = 0;
    for (const auto& [id, points] : ingest.vehicles) {
        auto& stays = artifact.stays[id];
        for (const StayRange& range : detect_stays(points, config.thresholds)) {
            const std::span<const TrajectoryPoint> members(points.data() + range.first,
                                                           range.last - range.first + 1);
            const auto [lat, lon] = stay_centroid(members);
            StayActivity stay;
            try {
                stay.cell = cell_of(lat, lon, artifact.grid);
            } catch (const OutOfGridError&) {
                ++n_outside;
                continue;
            }
            stay.arrival = points[range.first].time;
            stay.departure = points[range.last].time;
            stay.c_lat = lat;
            stay.c_lon = lon;
            stays.push_back(stay);
        }
        log_line("extract-stays", id + ": " + std::to_string(stays.size()) + " stays from " +
                                      std::to_string(points.size()) + " fixes");
    }
    if (n_outside > 0) {
        log_line("extract-stays", std::to_string(n_outside) + " stays outside the grid dropped");
    }
    atomic_write_file(args.out, stays_to_jsonl(artifact));
    return 0;
}

// ---------------------------------------------------------------- sequences

int cmd_build_sequences(const CommonArgs& args, const std::string& weather_path) {
    const ToolkitConfig config = resolve_config(args);
    std::ifstream in(args.input);
    if (!in) throw std::runtime_error("cannot open '" + args.input + "'");
    StaysArtifact stays = stays_from_jsonl(in);
    apply_filter(stays.stays, args.vehicles);
    if (stays.stays.empty()) throw std::runtime_error("no vehicles in input");

    WeatherTable weather;
    if (!weather_path.empty()) {
        std::ifstream win(weather_path);
        if (!win) throw std::runtime_error("cannot open '" + weather_path + "'");
        weather = read_weather_csv(win);
    } else if (config.weather_policy == WeatherPolicy::Error) {
        throw std::runtime_error(
            "no --weather file; use weather_policy = zero-fill to build without one");
    }

    SequencesArtifact artifact;
    artifact.grid = stays.grid;
    for (const auto& [id, vehicle_stays] : stays.stays) {
        std::vector<std::string> warnings;
        auto days = partition_days(id, vehicle_stays, &warnings);
        attach_contexts(days, weather, config.weather_policy, &warnings);
        for (const auto& w : warnings) log_line("build-sequences", id + ": " + w);
        log_line("build-sequences", id + ": " + std::to_string(days.size()) + " active days");
        if (!days.empty()) artifact.fleet[id] = std::move(days);
    }
    if (artifact.fleet.empty()) throw std::runtime_error("no active days for any vehicle");
    atomic_write_file(args.out, sequences_to_jsonl(artifact));
    return 0;
}

// ---------------------------------------------------------------- states

int cmd_select_states(const CommonArgs& args) {
    const ToolkitConfig config = resolve_config(args);
    std::ifstream in(args.input);
    if (!in) throw std::runtime_error("cannot open '" + args.input + "'");
    SequencesArtifact sequences = sequences_from_jsonl(in);
    apply_filter(sequences.fleet, args.vehicles);
    if (sequences.fleet.empty()) throw std::runtime_error("no vehicles in input");

    std::vector<std::string> ids;
    for (const auto& [id, days] : sequences.fleet) ids.push_back(id);
    std::map<std::string, std::pair<int, std::vector<std::pair<int, double>>>> chosen;
    for (const auto& id : ids) chosen[id] = {};

    parallel_over_vehicles(ids, args.jobs, [&](const std::string& id) {
        const auto features = activity_features(sequences.fleet.at(id));
        std::vector<std::pair<int, double>> scores;
        const int k =
            select_state_count(features, config.k_candidates, vehicle_seed(config, id), &scores);
        chosen.at(id) = {k, std::move(scores)};
        log_line("select-states", id + ": K = " + std::to_string(k));
    });

    json states = json::object();
    for (const auto& [id, result] : chosen) {
        json scores = json::object();
        for (const auto& [k, s] : result.second) scores[std::to_string(k)] = s;
        states[id] = json{{"k", result.first}, {"silhouette_by_k", std::move(scores)}};
    }
    const json doc{{"artifact", "state_selection"}, {"states", std::move(states)}};
    atomic_write_file(args.out, doc.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------- fit

struct TrainingView {
    std::vector<DaySequence> train;
    std::vector<ActivityDay> train_days;
    int n_test_days = 0;
};

TrainingView training_view(const std::vector<ActivityDay>& days, double train_frac) {
    TrainingView view;
    DaySplit split = split_days(days, train_frac);
    view.n_test_days = static_cast<int>(split.test.size());
    view.train_days = std::move(split.train);
    for (const auto& day : view.train_days) view.train.push_back(to_day_sequence(day));
    return view;
}

int cmd_fit(const CommonArgs& args, const std::string& states_path) {
    const ToolkitConfig config = resolve_config(args);
    std::ifstream in(args.input);
    if (!in) throw std::runtime_error("cannot open '" + args.input + "'");
    SequencesArtifact sequences = sequences_from_jsonl(in);
    apply_filter(sequences.fleet, args.vehicles);
    if (sequences.fleet.empty()) throw std::runtime_error("no vehicles in input");

    std::map<std::string, int> preselected;
    if (!states_path.empty()) {
        const json doc = json::parse(read_file(states_path));
        for (const auto& [id, entry] : doc.at("states").items()) {
            preselected[id] = entry.at("k").get<int>();
        }
    }

    std::vector<std::string> ids;
    for (const auto& [id, days] : sequences.fleet) ids.push_back(id);
    std::atomic<int> n_fitted{0};

    parallel_over_vehicles(ids, args.jobs, [&](const std::string& id) {
        const auto& days = sequences.fleet.at(id);
        if (days.size() < 2) {
            log_line("fit", id + ": skipped (fewer than 2 active days)");
            return;
        }
        const std::uint64_t seed = vehicle_seed(config, id);
        const TrainingView view = training_view(days, config.train_frac);

        VehicleModelBundle bundle;
        bundle.vehicle_id = id;
        bundle.grid = sequences.grid;
        bundle.seed = seed;
        bundle.n_train_days = static_cast<int>(view.train_days.size());
        bundle.n_test_days = view.n_test_days;
        bundle.config = config;

        const auto features = activity_features(view.train_days);
        int n_states = 0;
        if (const auto it = preselected.find(id); it != preselected.end()) {
            n_states = it->second;
        } else {
            std::vector<std::pair<int, double>> scores;
            n_states = select_state_count(features, config.k_candidates, seed, &scores);
            for (const auto& [k, s] : scores) bundle.silhouette_by_k[k] = s;
        }

        bundle.iohmm =
            fit_vehicle_iohmm(view.train, features, n_states, config.em, seed, &bundle.trace);
        bundle.mc = mc_fit(view.train, config.mc_alpha, &bundle.iohmm.destinations);
        bundle.lr = lr_fit(view.train);

        const fs::path path = fs::path(args.out) / (id + ".json");
        write_model_bundle(path.string(), bundle);
        ++n_fitted;
        log_line("fit", id + ": K = " + std::to_string(n_states) + ", " +
                            std::to_string(bundle.trace.log_likelihood.size()) +
                            " EM iterations, final LL = " +
                            std::to_string(bundle.trace.log_likelihood.empty()
                                               ? 0.0
                                               : bundle.trace.log_likelihood.back()));
    });

    if (n_fitted == 0) throw std::runtime_error("no vehicles could be fitted");
    log_line("fit", std::to_string(n_fitted.load()) + " vehicle models written to " + args.out);
    return 0;
}

// ---------------------------------------------------------------- predict

std::map<std::string, VehicleModelBundle> load_bundles(const std::string& models_dir,
                                                       const std::string& vehicles_csv) {
    std::map<std::string, VehicleModelBundle> bundles;
    const auto keep = vehicle_filter(vehicles_csv);
    for (const auto& entry : fs::directory_iterator(models_dir)) {
        if (entry.path().extension() != ".json") continue;
        VehicleModelBundle bundle = read_model_bundle(entry.path().string());
        if (!keep.empty() && !keep.count(bundle.vehicle_id)) continue;
        bundles.emplace(bundle.vehicle_id, std::move(bundle));
    }
    if (bundles.empty()) throw std::runtime_error("no model bundles under '" + models_dir + "'");
    return bundles;
}

int cmd_predict(const CommonArgs& args, const std::string& models_dir) {
    const ToolkitConfig config = resolve_config(args);
    std::ifstream in(args.input);
    if (!in) throw std::runtime_error("cannot open '" + args.input + "'");
    SequencesArtifact sequences = sequences_from_jsonl(in);
    apply_filter(sequences.fleet, args.vehicles);
    const auto bundles = load_bundles(models_dir, args.vehicles);

    std::vector<ForecastRecord> forecasts;
    for (const auto& [id, bundle] : bundles) {
        const auto it = sequences.fleet.find(id);
        if (it == sequences.fleet.end()) {
            log_line("predict", id + ": no sequences, skipped");
            continue;
        }
        for (const auto& day : it->second) {
            const DaySequence seq = to_day_sequence(day);
            // Pending next activity: condition on the whole day, predict m+1.
            std::vector<Observation> prefix;
            std::vector<Eigen::VectorXd> contexts;
            for (int i = 0; i < seq.length(); ++i) {
                if (bundle.iohmm.try_dest_index(seq.observations[static_cast<std::size_t>(i)].cell)) {
                    prefix.push_back(seq.observations[static_cast<std::size_t>(i)]);
                    contexts.push_back(seq.contexts[static_cast<std::size_t>(i)]);
                }
            }
            contexts.push_back(day.contexts.back());  // z_{m+1}
            const NextActivityForecast forecast =
                predict_next(bundle.iohmm, prefix, contexts, static_cast<int>(prefix.size()));

            ForecastRecord record;
            record.vehicle_id = id;
            record.date = day.date;
            record.after_activity = day.n_activities();
            record.cell = forecast.cell;
            record.duration_h = forecast.duration_h;
            std::vector<std::pair<CellId, double>> ranked;
            for (Eigen::Index l = 0; l < forecast.dest_probs.size(); ++l) {
                ranked.emplace_back(bundle.iohmm.destinations[static_cast<std::size_t>(l)],
                                    forecast.dest_probs(l));
            }
            std::stable_sort(ranked.begin(), ranked.end(),
                             [](const auto& a, const auto& b) { return a.second > b.second; });
            ranked.resize(std::min<std::size_t>(ranked.size(),
                                                static_cast<std::size_t>(config.top_k)));
            record.top_dest_probs = std::move(ranked);
            forecasts.push_back(std::move(record));
        }
        log_line("predict", id + ": " + std::to_string(it->second.size()) + " day forecasts");
    }
    atomic_write_file(args.out, forecasts_to_jsonl(forecasts, config.top_k));
    return 0;
}

// ---------------------------------------------------------------- evaluate

struct VehicleEvaluation {
    std::string vehicle_id;
    VehicleScore iohmm;
    VehicleScore baseline;
    FactorRow factors;
    int n_train_days = 0;
    int n_test_days = 0;
    int n_states = 0;
};

std::string format_csv_double(double x) {
    std::ostringstream out;
    out.precision(10);
    out << x;
    return out.str();
}

std::string score_csv_row(const std::string& id, const std::string& model,
                          const VehicleEvaluation& entry, const VehicleScore& score) {
    std::ostringstream row;
    row << id << ',' << model << ',' << entry.n_train_days << ',' << entry.n_test_days << ','
        << entry.n_states << ',' << score.n_test_activities << ','
        << format_csv_double(score.dest_accuracy) << ','
        << format_csv_double(score.duration_mae_h) << ','
        << format_csv_double(score.duration_rmse_h) << ',';
    if (score.duration_r2.has_value()) row << format_csv_double(*score.duration_r2);
    return row.str();
}

int cmd_evaluate(const CommonArgs& args, const std::string& models_dir) {
    const ToolkitConfig config = resolve_config(args);
    std::ifstream in(args.input);
    if (!in) throw std::runtime_error("cannot open '" + args.input + "'");
    SequencesArtifact sequences = sequences_from_jsonl(in);
    apply_filter(sequences.fleet, args.vehicles);
    const auto bundles = load_bundles(models_dir, args.vehicles);

    std::vector<std::string> ids;
    for (const auto& [id, bundle] : bundles) {
        if (sequences.fleet.count(id)) ids.push_back(id);
    }
    if (ids.empty()) throw std::runtime_error("no vehicles with both sequences and models");

    std::map<std::string, VehicleEvaluation> results;
    for (const auto& id : ids) results[id] = {};

    parallel_over_vehicles(ids, args.jobs, [&](const std::string& id) {
        const auto& bundle = bundles.at(id);
        const auto& days = sequences.fleet.at(id);
        if (days.size() < 2) {
            log_line("evaluate", id + ": fewer than 2 active days, skipped");
            return;
        }
        DaySplit split = split_days(days, config.train_frac);
        VehicleEvaluation entry;
        entry.vehicle_id = id;
        entry.n_train_days = static_cast<int>(split.train.size());
        entry.n_test_days = static_cast<int>(split.test.size());
        entry.n_states = bundle.iohmm.n_states;
        entry.factors = make_factor_row(days, bundle.iohmm.n_states);
        if (split.test.empty()) {
            log_line("evaluate", id + ": no test days (short history), metrics empty");
        } else {
            std::vector<DaySequence> test;
            for (const auto& day : split.test) test.push_back(to_day_sequence(day));
            entry.iohmm = score_vehicle(IohmmPredictor(bundle.iohmm), test, id);
            entry.baseline = score_vehicle(BaselinePredictor(bundle.mc, bundle.lr), test, id);
        }
        results.at(id) = std::move(entry);
        log_line("evaluate", id + ": scored");
    });

    // drop placeholders for skipped vehicles
    for (auto it = results.begin(); it != results.end();) {
        it = it->second.vehicle_id.empty() ? results.erase(it) : std::next(it);
    }
    if (results.empty()) throw std::runtime_error("no vehicles could be evaluated");

    fs::create_directories(args.out);

    std::ostringstream scores_csv;
    scores_csv << "vehicle_id,model,n_train_days,n_test_days,n_hidden_states,n_test_activities,"
                  "dest_accuracy,duration_mae_h,duration_rmse_h,duration_r2\n";
    for (const auto& [id, entry] : results) {
        scores_csv << score_csv_row(id, "iohmm", entry, entry.iohmm) << '\n';
        scores_csv << score_csv_row(id, "mc_lr", entry, entry.baseline) << '\n';
    }
    atomic_write_file((fs::path(args.out) / "vehicle_scores.csv").string(), scores_csv.str());

    const auto aggregate = [&](const char* model,
                               const std::function<const VehicleScore&(const VehicleEvaluation&)>&
                                   pick) -> std::string {
        double acc = 0.0, r2 = 0.0, mae = 0.0, rmse = 0.0;
        int n = 0, n_r2 = 0;
        for (const auto& [id, entry] : results) {
            const VehicleScore& s = pick(entry);
            if (s.n_test_activities == 0) continue;
            acc += s.dest_accuracy;
            mae += s.duration_mae_h;
            rmse += s.duration_rmse_h;
            ++n;
            if (s.duration_r2.has_value()) {
                r2 += *s.duration_r2;
                ++n_r2;
            }
        }
        std::ostringstream row;
        row << model << ',' << n << ',' << (n ? format_csv_double(acc / n) : "") << ','
            << (n ? format_csv_double(mae / n) : "") << ','
            << (n ? format_csv_double(rmse / n) : "") << ','
            << (n_r2 ? format_csv_double(r2 / n_r2) : "");
        return row.str();
    };
    std::ostringstream agg_csv;
    agg_csv << "model,n_vehicles,mean_dest_accuracy,mean_duration_mae_h,mean_duration_rmse_h,"
               "mean_duration_r2\n";
    agg_csv << aggregate("iohmm", [](const VehicleEvaluation& e) -> const VehicleScore& {
        return e.iohmm;
    }) << '\n';
    agg_csv << aggregate("mc_lr", [](const VehicleEvaluation& e) -> const VehicleScore& {
        return e.baseline;
    }) << '\n';
    atomic_write_file((fs::path(args.out) / "aggregate.csv").string(), agg_csv.str());

    std::ostringstream hist_csv;
    hist_csv << "model,bin_lo_h,bin_hi_h,count\n";
    for (const char* model : {"iohmm", "mc_lr"}) {
        std::vector<double> pooled;
        for (const auto& [id, entry] : results) {
            const VehicleScore& s =
                std::string(model) == "iohmm" ? entry.iohmm : entry.baseline;
            pooled.insert(pooled.end(), s.abs_errors_h.begin(), s.abs_errors_h.end());
        }
        for (const HistogramBin& bin : error_histogram(pooled, config.hist_bin_h)) {
            hist_csv << model << ',' << format_csv_double(bin.lo) << ','
                     << format_csv_double(bin.hi) << ',' << bin.count << '\n';
        }
    }
    atomic_write_file((fs::path(args.out) / "error_histogram.csv").string(), hist_csv.str());

    std::vector<FactorRow> rows;
    std::vector<double> acc;
    std::vector<std::optional<double>> r2;
    for (const auto& [id, entry] : results) {
        if (entry.iohmm.n_test_activities == 0) continue;
        rows.push_back(entry.factors);
        acc.push_back(entry.iohmm.dest_accuracy);
        r2.push_back(entry.iohmm.duration_r2);
    }
    if (rows.size() >= 10) {
        const FactorRegressionResult table = factor_regression(rows, acc, r2);
        std::ostringstream factor_csv;
        factor_csv << "response,variable,coefficient,std_error,p_value,stars\n";
        for (const auto& [response, entries] :
             {std::pair{"destination", &table.destination}, {"duration", &table.duration}}) {
            for (const FactorTableEntry& e : *entries) {
                factor_csv << response << ',' << e.variable << ',' << format_csv_double(e.coef)
                           << ',' << format_csv_double(e.std_err) << ','
                           << format_csv_double(e.p_value) << ',' << e.stars << '\n';
            }
        }
        atomic_write_file((fs::path(args.out) / "factor_regression.csv").string(),
                          factor_csv.str());
        if (table.jittered) log_line("evaluate", "factor regression design was near-collinear");
    } else {
        log_line("evaluate", "factor regression skipped: needs >= 10 scored vehicles, have " +
                                 std::to_string(rows.size()));
    }
    log_line("evaluate", "tables written to " + args.out);
    return 0;
}

// ---------------------------------------------------------------- factors

int cmd_analyze_factors(const CommonArgs& args, const std::string& models_dir,
                        const std::string& scores_path) {
    std::ifstream in(args.input);
    if (!in) throw std::runtime_error("cannot open '" + args.input + "'");
    SequencesArtifact sequences = sequences_from_jsonl(in);
    apply_filter(sequences.fleet, args.vehicles);
    const auto bundles = load_bundles(models_dir, args.vehicles);

    // vehicle -> (dest_accuracy, duration_r2) from the iohmm rows of evaluate's CSV
    std::map<std::string, std::pair<double, std::optional<double>>> scored;
    std::ifstream scores(scores_path);
    if (!scores) throw std::runtime_error("cannot open '" + scores_path + "'");
    std::string line;
    if (!std::getline(scores, line)) throw std::runtime_error("empty scores file");
    while (std::getline(scores, line)) {
        std::stringstream ss(line);
        std::vector<std::string> fields;
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        while (fields.size() < 10) fields.emplace_back();
        if (fields[1] != "iohmm" || std::stoi(fields[5]) == 0) continue;
        std::optional<double> r2;
        if (!fields[9].empty()) r2 = std::stod(fields[9]);
        scored[fields[0]] = {std::stod(fields[6]), r2};
    }

    std::vector<FactorRow> rows;
    std::vector<double> acc;
    std::vector<std::optional<double>> r2;
    for (const auto& [id, score] : scored) {
        const auto days_it = sequences.fleet.find(id);
        const auto bundle_it = bundles.find(id);
        if (days_it == sequences.fleet.end() || bundle_it == bundles.end()) continue;
        rows.push_back(make_factor_row(days_it->second, bundle_it->second.iohmm.n_states));
        acc.push_back(score.first);
        r2.push_back(score.second);
    }
    const FactorRegressionResult table = factor_regression(rows, acc, r2);

    std::ostringstream csv;
    csv << "response,variable,coefficient,std_error,p_value,stars\n";
    for (const auto& [response, entries] :
         {std::pair{"destination", &table.destination}, {"duration", &table.duration}}) {
        for (const FactorTableEntry& e : *entries) {
            csv << response << ',' << e.variable << ',' << format_csv_double(e.coef) << ','
                << format_csv_double(e.std_err) << ',' << format_csv_double(e.p_value) << ','
                << e.stars << '\n';
        }
    }
    atomic_write_file(args.out, csv.str());
    log_line("analyze-factors", "regression over " + std::to_string(rows.size()) + " vehicles");
    return 0;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const CommonArgs& args) {
    const ToolkitConfig config = resolve_config(args);

    GridSpec grid;
    grid.origin_lat = 30.50;
    grid.origin_lon = 104.00;
    grid.cell_side_m = config.grid.cell_side_m;
    grid.n_rows = 6;
    grid.n_cols = 6;
    if (config.grid.n_rows > 0 && config.grid.n_cols > 0) grid = config.grid;

    GeneratorSpec spec;
    spec.ground_truth = demo_ground_truth(grid);
    spec.grid = grid;
    spec.n_vehicles = config.sim.n_vehicles;
    spec.days_per_vehicle = config.sim.days_per_vehicle;
    spec.min_daily_activities = config.sim.min_daily_activities;
    spec.max_daily_activities = config.sim.max_daily_activities;
    spec.idle_day_prob = config.sim.idle_day_prob;
    spec.start_date = config.sim.start_date;
    spec.utc_offset_sec = config.sim.utc_offset_h * 3600;
    spec.seed = config.seed;

    const SyntheticFleet fleet = sample_fleet(spec);

    fs::create_directories(args.out);
    std::ostringstream trajectories;
    trajectories << "vehicle_id,timestamp,lat,lon\n";
    trajectories.precision(8);
    trajectories << std::fixed;
    std::size_t n_points = 0;
    for (const auto& vehicle : fleet.vehicles) {
        for (const TrajectoryPoint& p : trajectory_points(vehicle, fleet.grid, config.sim.poll_sec,
                                                          config.sim.jitter_m, spec.seed)) {
            trajectories << p.vehicle_id << ',' << format_timestamp(p.time) << ',' << p.lat << ','
                         << p.lon << '\n';
            ++n_points;
        }
    }
    atomic_write_file((fs::path(args.out) / "trajectories.csv").string(), trajectories.str());

    std::ostringstream weather;
    weather << "date,condition\n";
    for (const auto& [date, condition] : fleet.weather) {
        weather << format_date(date) << ',' << weather_name(condition) << '\n';
    }
    atomic_write_file((fs::path(args.out) / "weather.csv").string(), weather.str());

    SequencesArtifact truth;
    truth.grid = fleet.grid;
    for (const auto& vehicle : fleet.vehicles) truth.fleet[vehicle.vehicle_id] = vehicle.days;
    atomic_write_file((fs::path(args.out) / "truth_sequences.jsonl").string(),
                      sequences_to_jsonl(truth));

    log_line("simulate", std::to_string(fleet.vehicles.size()) + " vehicles, " +
                             std::to_string(n_points) + " fixes written to " + args.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"per-vehicle next-activity prediction toolkit"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string weather_path, models_dir, states_path, scores_path;

    const auto add_common = [&](CLI::App* cmd, bool needs_input) {
        cmd->add_option("--config", args.config_path, "flat key = value config file");
        auto* input = cmd->add_option("--input", args.input, "input artifact path");
        if (needs_input) input->required();
        cmd->add_option("--out", args.out, "output path")->required();
        cmd->add_option("--vehicles", args.vehicles, "comma-separated vehicle filter");
        cmd->add_option("--jobs", args.jobs, "worker threads across vehicles");
        cmd->add_option("--seed", args.seed, "override the config seed");
    };

    auto* extract = app.add_subcommand("extract-stays", "trajectories CSV -> stays JSONL");
    add_common(extract, true);
    auto* sequences =
        app.add_subcommand("build-sequences", "stays JSONL -> contextual day sequences JSONL");
    add_common(sequences, true);
    sequences->add_option("--weather", weather_path, "date,condition CSV");
    auto* states = app.add_subcommand("select-states", "sequences JSONL -> hidden-state counts");
    add_common(states, true);
    auto* fit = app.add_subcommand("fit", "sequences JSONL -> per-vehicle model bundles");
    add_common(fit, true);
    fit->add_option("--states", states_path, "state-selection artifact from select-states");
    auto* predict = app.add_subcommand("predict", "models -> next-activity forecasts JSONL");
    add_common(predict, true);
    predict->add_option("--models", models_dir, "model bundle directory")->required();
    auto* evaluate = app.add_subcommand("evaluate", "models + sequences -> evaluation tables");
    add_common(evaluate, true);
    evaluate->add_option("--models", models_dir, "model bundle directory")->required();
    auto* factors =
        app.add_subcommand("analyze-factors", "scores + sequences -> factor regression CSV");
    add_common(factors, true);
    factors->add_option("--models", models_dir, "model bundle directory")->required();
    factors->add_option("--scores", scores_path, "vehicle_scores.csv from evaluate")->required();
    auto* simulate = app.add_subcommand("simulate", "write a synthetic fleet");
    add_common(simulate, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (extract->parsed()) return cmd_extract_stays(args);
        if (sequences->parsed()) return cmd_build_sequences(args, weather_path);
        if (states->parsed()) return cmd_select_states(args);
        if (fit->parsed()) return cmd_fit(args, states_path);
        if (predict->parsed()) return cmd_predict(args, models_dir);
        if (evaluate->parsed()) return cmd_evaluate(args, models_dir);
        if (factors->parsed()) return cmd_analyze_factors(args, models_dir, scores_path);
        if (simulate->parsed()) return cmd_simulate(args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
