#include "staycast/model_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace staycast {

using nlohmann::json;

void atomic_write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

namespace {

json grid_to_json(const GridSpec& grid) {
    return json{{"origin_lat", grid.origin_lat},
                {"origin_lon", grid.origin_lon},
                {"cell_side_m", grid.cell_side_m},
                {"n_rows", grid.n_rows},
                {"n_cols", grid.n_cols}};
}

GridSpec grid_from_json(const json& j) {
    GridSpec grid;
    grid.origin_lat = j.at("origin_lat").get<double>();
    grid.origin_lon = j.at("origin_lon").get<double>();
    grid.cell_side_m = j.at("cell_side_m").get<double>();
    grid.n_rows = j.at("n_rows").get<int>();
    grid.n_cols = j.at("n_cols").get<int>();
    return grid;
}

json cell_to_json(CellId cell) { return json::array({cell.row, cell.col}); }

CellId cell_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) throw std::runtime_error("bad cell encoding");
    return CellId{j[0].get<int>(), j[1].get<int>()};
}

json cells_to_json(const std::vector<CellId>& cells) {
    json arr = json::array();
    for (const CellId c : cells) arr.push_back(cell_to_json(c));
    return arr;
}

std::vector<CellId> cells_from_json(const json& j) {
    std::vector<CellId> cells;
    for (const auto& c : j) cells.push_back(cell_from_json(c));
    return cells;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    const auto n_rows = static_cast<Eigen::Index>(j.size());
    if (n_rows == 0) return Eigen::MatrixXd(0, 0);
    const auto n_cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(n_rows, n_cols);
    for (Eigen::Index r = 0; r < n_rows; ++r) {
        if (static_cast<Eigen::Index>(j[static_cast<std::size_t>(r)].size()) != n_cols) {
            throw std::runtime_error("ragged matrix encoding");
        }
        for (Eigen::Index c = 0; c < n_cols; ++c) {
            m(r, c) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
        }
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
    return v;
}

json stay_to_json(const StayActivity& stay) {
    return json{{"cell", cell_to_json(stay.cell)},
                {"arrival", format_timestamp(stay.arrival)},
                {"departure", format_timestamp(stay.departure)},
                {"lat", stay.c_lat},
                {"lon", stay.c_lon}};
}

StayActivity stay_from_json(const json& j) {
    StayActivity stay;
    stay.cell = cell_from_json(j.at("cell"));
    stay.arrival = parse_timestamp(j.at("arrival").get<std::string>());
    stay.departure = parse_timestamp(j.at("departure").get<std::string>());
    stay.c_lat = j.at("lat").get<double>();
    stay.c_lon = j.at("lon").get<double>();
    return stay;
}

json meta_line(const char* artifact, const GridSpec& grid) {
    return json{{"type", "meta"}, {"artifact", artifact}, {"grid", grid_to_json(grid)}};
}

json require_meta(std::istream& in, const char* artifact, std::string* first_line = nullptr) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty artifact stream");
    if (first_line != nullptr) *first_line = line;
    const json meta = json::parse(line);
    if (meta.value("type", "") != "meta" || meta.value("artifact", "") != artifact) {
        throw std::runtime_error(std::string("expected a '") + artifact + "' meta line first");
    }
    return meta;
}

}  // namespace

std::string stays_to_jsonl(const StaysArtifact& artifact) {
    std::ostringstream out;
    json meta = meta_line("stays", artifact.grid);
    meta["thresholds"] = json{{"theta_d_m", artifact.thresholds.theta_d_m},
                              {"theta_t_s", artifact.thresholds.theta_t_s}};
    out << meta.dump() << '\n';
    for (const auto& [vehicle_id, stays] : artifact.stays) {
        for (const auto& stay : stays) {
            json j = stay_to_json(stay);
            j["type"] = "stay";
            j["vehicle_id"] = vehicle_id;
            out << j.dump() << '\n';
        }
    }
    return out.str();
}

StaysArtifact stays_from_jsonl(std::istream& in) {
    StaysArtifact artifact;
    const json meta = require_meta(in, "stays");
    artifact.grid = grid_from_json(meta.at("grid"));
    artifact.thresholds.theta_d_m = meta.at("thresholds").at("theta_d_m").get<double>();
    artifact.thresholds.theta_t_s = meta.at("thresholds").at("theta_t_s").get<double>();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (j.value("type", "") != "stay") throw std::runtime_error("unexpected record type");
        artifact.stays[j.at("vehicle_id").get<std::string>()].push_back(stay_from_json(j));
    }
    return artifact;
}

std::string sequences_to_jsonl(const SequencesArtifact& artifact) {
    std::ostringstream out;
    json meta = meta_line("sequences", artifact.grid);
    meta["context_fields"] = json::array();
    for (const char* name : ContextVector::field_names) meta["context_fields"].push_back(name);
    out << meta.dump() << '\n';
    for (const auto& [vehicle_id, days] : artifact.fleet) {
        for (const auto& day : days) {
            json j{{"type", "day"},
                   {"vehicle_id", vehicle_id},
                   {"date", format_date(day.date)},
                   {"day_start", format_timestamp(day.day_start)}};
            json stays = json::array();
            for (const auto& stay : day.stays) stays.push_back(stay_to_json(stay));
            j["stays"] = std::move(stays);
            j["trip_durations_h"] = day.trip_durations_h;
            json contexts = json::array();
            for (const auto& z : day.contexts) contexts.push_back(vector_to_json(z));
            j["contexts"] = std::move(contexts);
            out << j.dump() << '\n';
        }
    }
    return out.str();
}

SequencesArtifact sequences_from_jsonl(std::istream& in) {
    SequencesArtifact artifact;
    const json meta = require_meta(in, "sequences");
    artifact.grid = grid_from_json(meta.at("grid"));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (j.value("type", "") != "day") throw std::runtime_error("unexpected record type");
        ActivityDay day;
        day.vehicle_id = j.at("vehicle_id").get<std::string>();
        day.date = parse_date(j.at("date").get<std::string>());
        day.day_start = parse_timestamp(j.at("day_start").get<std::string>());
        for (const auto& stay : j.at("stays")) day.stays.push_back(stay_from_json(stay));
        day.trip_durations_h = j.at("trip_durations_h").get<std::vector<double>>();
        for (const auto& z : j.at("contexts")) day.contexts.push_back(vector_from_json(z));
        if (day.trip_durations_h.size() != day.stays.size()) {
            throw std::runtime_error("day record: stay/duration length mismatch");
        }
        artifact.fleet[day.vehicle_id].push_back(std::move(day));
    }
    return artifact;
}

namespace {

json config_to_json(const ToolkitConfig& config) {
    return json{
        {"grid", grid_to_json(config.grid)},
        {"thresholds",
         {{"theta_d_m", config.thresholds.theta_d_m}, {"theta_t_s", config.thresholds.theta_t_s}}},
        {"k_candidates", config.k_candidates},
        {"em",
         {{"max_iter", config.em.max_iter},
          {"rel_tol", config.em.rel_tol},
          {"l2", config.em.l2},
          {"sigma_floor", config.em.sigma_floor}}},
        {"mc_alpha", config.mc_alpha},
        {"train_frac", config.train_frac},
        {"seed", config.seed},
        {"weather_policy", config.weather_policy == WeatherPolicy::Error ? "error" : "zero-fill"},
        {"hist_bin_h", config.hist_bin_h},
        {"top_k", config.top_k}};
}

ToolkitConfig config_from_json(const json& j) {
    ToolkitConfig config;
    config.grid = grid_from_json(j.at("grid"));
    config.thresholds.theta_d_m = j.at("thresholds").at("theta_d_m").get<double>();
    config.thresholds.theta_t_s = j.at("thresholds").at("theta_t_s").get<double>();
    config.k_candidates = j.at("k_candidates").get<std::vector<int>>();
    config.em.max_iter = j.at("em").at("max_iter").get<int>();
    config.em.rel_tol = j.at("em").at("rel_tol").get<double>();
    config.em.l2 = j.at("em").at("l2").get<double>();
    config.em.sigma_floor = j.at("em").at("sigma_floor").get<double>();
    config.mc_alpha = j.at("mc_alpha").get<double>();
    config.train_frac = j.at("train_frac").get<double>();
    config.seed = j.at("seed").get<std::uint64_t>();
    config.weather_policy = j.at("weather_policy").get<std::string>() == "error"
                                ? WeatherPolicy::Error
                                : WeatherPolicy::ZeroFill;
    config.hist_bin_h = j.at("hist_bin_h").get<double>();
    config.top_k = j.at("top_k").get<int>();
    return config;
}

}  // namespace

std::string bundle_to_json(const VehicleModelBundle& bundle) {
    json iohmm{{"type", "iohmm"},
               {"n_states", bundle.iohmm.n_states},
               {"context_dim", bundle.iohmm.context_dim},
               {"destinations", cells_to_json(bundle.iohmm.destinations)},
               {"lambda_in", matrix_to_json(bundle.iohmm.lambda_in)},
               {"lambda_emt", matrix_to_json(bundle.iohmm.lambda_emt)},
               {"sigma", vector_to_json(bundle.iohmm.sigma)}};
    json tr = json::array();
    for (const auto& m : bundle.iohmm.lambda_tr) tr.push_back(matrix_to_json(m));
    iohmm["lambda_tr"] = std::move(tr);
    json eml = json::array();
    for (const auto& m : bundle.iohmm.lambda_eml) eml.push_back(matrix_to_json(m));
    iohmm["lambda_eml"] = std::move(eml);
    iohmm["trace"] = json{{"log_likelihood", bundle.trace.log_likelihood},
                          {"penalized_log_likelihood", bundle.trace.penalized_log_likelihood},
                          {"converged", bundle.trace.converged},
                          {"warnings", bundle.trace.warnings}};

    json mc{{"type", "markov_chain"},
            {"alpha", bundle.mc.alpha},
            {"destinations", cells_to_json(bundle.mc.destinations)},
            {"counts", matrix_to_json(bundle.mc.counts)}};

    json lr{{"type", "linear_duration"}, {"coef", vector_to_json(bundle.lr.coef)}};

    json silhouettes = json::object();
    for (const auto& [k, s] : bundle.silhouette_by_k) silhouettes[std::to_string(k)] = s;

    const json doc{{"artifact", "vehicle_models"},
                   {"vehicle_id", bundle.vehicle_id},
                   {"grid", grid_to_json(bundle.grid)},
                   {"seed", bundle.seed},
                   {"n_train_days", bundle.n_train_days},
                   {"n_test_days", bundle.n_test_days},
                   {"silhouette_by_k", silhouettes},
                   {"config", config_to_json(bundle.config)},
                   {"payloads", {{"iohmm", iohmm}, {"markov_chain", mc}, {"linear_duration", lr}}}};
    return doc.dump(2) + "\n";
}

VehicleModelBundle bundle_from_json(const std::string& text) {
    const json doc = json::parse(text);
    if (doc.value("artifact", "") != "vehicle_models") {
        throw std::runtime_error("not a vehicle_models document");
    }
    VehicleModelBundle bundle;
    bundle.vehicle_id = doc.at("vehicle_id").get<std::string>();
    bundle.grid = grid_from_json(doc.at("grid"));
    bundle.seed = doc.at("seed").get<std::uint64_t>();
    bundle.n_train_days = doc.at("n_train_days").get<int>();
    bundle.n_test_days = doc.at("n_test_days").get<int>();
    for (const auto& [k, s] : doc.at("silhouette_by_k").items()) {
        bundle.silhouette_by_k[std::stoi(k)] = s.get<double>();
    }
    bundle.config = config_from_json(doc.at("config"));

    const json& iohmm = doc.at("payloads").at("iohmm");
    if (iohmm.value("type", "") != "iohmm") throw std::runtime_error("bad iohmm payload tag");
    bundle.iohmm.n_states = iohmm.at("n_states").get<int>();
    bundle.iohmm.context_dim = iohmm.at("context_dim").get<int>();
    bundle.iohmm.destinations = cells_from_json(iohmm.at("destinations"));
    bundle.iohmm.lambda_in = matrix_from_json(iohmm.at("lambda_in"));
    for (const auto& m : iohmm.at("lambda_tr")) {
        bundle.iohmm.lambda_tr.push_back(matrix_from_json(m));
    }
    for (const auto& m : iohmm.at("lambda_eml")) {
        bundle.iohmm.lambda_eml.push_back(matrix_from_json(m));
    }
    bundle.iohmm.lambda_emt = matrix_from_json(iohmm.at("lambda_emt"));
    bundle.iohmm.sigma = vector_from_json(iohmm.at("sigma"));
    bundle.iohmm.validate();
    bundle.trace.log_likelihood = iohmm.at("trace").at("log_likelihood").get<std::vector<double>>();
    bundle.trace.penalized_log_likelihood =
        iohmm.at("trace").at("penalized_log_likelihood").get<std::vector<double>>();
    bundle.trace.converged = iohmm.at("trace").at("converged").get<bool>();
    bundle.trace.warnings = iohmm.at("trace").at("warnings").get<std::vector<std::string>>();

    const json& mc = doc.at("payloads").at("markov_chain");
    if (mc.value("type", "") != "markov_chain") throw std::runtime_error("bad markov payload tag");
    bundle.mc.alpha = mc.at("alpha").get<double>();
    bundle.mc.destinations = cells_from_json(mc.at("destinations"));
    bundle.mc.counts = matrix_from_json(mc.at("counts"));
    // Probabilities are derived, not stored: rebuild the smoothed rows.
    const int n = bundle.mc.n_destinations();
    bundle.mc.transition.resize(n + 1, n);
    for (int r = 0; r <= n; ++r) {
        const double total = bundle.mc.counts.row(r).sum() + bundle.mc.alpha;
        if (total > 0.0) {
            bundle.mc.transition.row(r) =
                (bundle.mc.counts.row(r).array() + bundle.mc.alpha / n) / total;
        } else {
            bundle.mc.transition.row(r).setConstant(1.0 / n);
        }
    }

    const json& lr = doc.at("payloads").at("linear_duration");
    if (lr.value("type", "") != "linear_duration") throw std::runtime_error("bad lr payload tag");
    bundle.lr.coef = vector_from_json(lr.at("coef"));
    return bundle;
}

void write_model_bundle(const std::string& path, const VehicleModelBundle& bundle) {
    atomic_write_file(path, bundle_to_json(bundle));
}

VehicleModelBundle read_model_bundle(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model bundle '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return bundle_from_json(buf.str());
}

std::string forecasts_to_jsonl(const std::vector<ForecastRecord>& forecasts, int top_k) {
    std::ostringstream out;
    out << json{{"type", "meta"}, {"artifact", "forecasts"}, {"top_k", top_k}}.dump() << '\n';
    for (const auto& f : forecasts) {
        json probs = json::array();
        for (const auto& [cell, p] : f.top_dest_probs) {
            probs.push_back(json{{"cell", cell_to_json(cell)}, {"p", p}});
        }
        const json j{{"type", "forecast"},
                     {"vehicle_id", f.vehicle_id},
                     {"date", format_date(f.date)},
                     {"after_activity", f.after_activity},
                     {"cell", cell_to_json(f.cell)},
                     {"duration_h", f.duration_h},
                     {"dest_probs", std::move(probs)}};
        out << j.dump() << '\n';
    }
    return out.str();
}

std::vector<ForecastRecord> forecasts_from_jsonl(std::istream& in) {
    require_meta(in, "forecasts");
    std::vector<ForecastRecord> forecasts;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line);
        if (j.value("type", "") != "forecast") throw std::runtime_error("unexpected record type");
        ForecastRecord f;
        f.vehicle_id = j.at("vehicle_id").get<std::string>();
        f.date = parse_date(j.at("date").get<std::string>());
        f.after_activity = j.at("after_activity").get<int>();
        f.cell = cell_from_json(j.at("cell"));
        f.duration_h = j.at("duration_h").get<double>();
        for (const auto& p : j.at("dest_probs")) {
            f.top_dest_probs.emplace_back(cell_from_json(p.at("cell")), p.at("p").get<double>());
        }
        forecasts.push_back(std::move(f));
    }
    return forecasts;
}

}  // namespace staycast
