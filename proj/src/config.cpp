#include "staycast/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace staycast {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw std::invalid_argument("config: bad value '" + value + "' for key '" + key + "'");
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double x = std::stod(value, &used);
        if (used != value.size()) bad_value(key, value);
        return x;
    } catch (const std::invalid_argument&) {
        bad_value(key, value);
    } catch (const std::out_of_range&) {
        bad_value(key, value);
    }
}

std::int64_t to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const std::int64_t x = std::stoll(value, &used);
        if (used != value.size()) bad_value(key, value);
        return x;
    } catch (const std::invalid_argument&) {
        bad_value(key, value);
    } catch (const std::out_of_range&) {
        bad_value(key, value);
    }
}

std::vector<int> to_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) bad_value(key, value);
        out.push_back(static_cast<int>(to_int(key, item)));
    }
    if (out.empty()) bad_value(key, value);
    return out;
}

}  // namespace

void ToolkitConfig::validate() const {
    if (!(thresholds.theta_d_m > 0.0)) throw std::invalid_argument("config: thresholds.theta_d_m must be > 0");
    if (!(thresholds.theta_t_s > 0.0)) throw std::invalid_argument("config: thresholds.theta_t_s must be > 0");
    if (!(grid.cell_side_m > 0.0)) throw std::invalid_argument("config: grid.cell_side_m must be > 0");
    if (grid.n_rows < 0 || grid.n_cols < 0) {
        throw std::invalid_argument("config: grid dimensions must be non-negative");
    }
    if (k_candidates.empty()) throw std::invalid_argument("config: k_candidates must be non-empty");
    for (const int k : k_candidates) {
        if (k < 1) throw std::invalid_argument("config: k_candidates entries must be >= 1");
    }
    if (em.max_iter < 1) throw std::invalid_argument("config: em.max_iter must be >= 1");
    if (!(em.rel_tol > 0.0)) throw std::invalid_argument("config: em.rel_tol must be > 0");
    if (em.l2 < 0.0) throw std::invalid_argument("config: em.l2 must be >= 0");
    if (!(em.sigma_floor > 0.0)) throw std::invalid_argument("config: em.sigma_floor must be > 0");
    if (mc_alpha < 0.0) throw std::invalid_argument("config: mc_alpha must be >= 0");
    if (!(train_frac > 0.0 && train_frac <= 1.0)) {
        throw std::invalid_argument("config: train_frac must be in (0, 1]");
    }
    if (!(hist_bin_h > 0.0)) throw std::invalid_argument("config: hist_bin_h must be > 0");
    if (top_k < 1) throw std::invalid_argument("config: top_k must be >= 1");
    if (sim.n_vehicles < 1 || sim.days_per_vehicle < 1) {
        throw std::invalid_argument("config: sim fleet dimensions must be >= 1");
    }
    if (sim.min_daily_activities < 1 || sim.max_daily_activities < sim.min_daily_activities) {
        throw std::invalid_argument("config: bad sim daily activity range");
    }
    if (sim.idle_day_prob < 0.0 || sim.idle_day_prob >= 1.0) {
        throw std::invalid_argument("config: sim.idle_day_prob must be in [0, 1)");
    }
    if (!(sim.poll_sec >= 1.0)) throw std::invalid_argument("config: sim.poll_sec must be >= 1");
    if (sim.jitter_m < 0.0) throw std::invalid_argument("config: sim.jitter_m must be >= 0");
}

ToolkitConfig parse_config(std::istream& in) {
    ToolkitConfig config;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                        " is not 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                        " is not 'key = value'");
        }

        if (key == "grid.origin_lat") config.grid.origin_lat = to_double(key, value);
        else if (key == "grid.origin_lon") config.grid.origin_lon = to_double(key, value);
        else if (key == "grid.cell_side_m") config.grid.cell_side_m = to_double(key, value);
        else if (key == "grid.n_rows") config.grid.n_rows = static_cast<int>(to_int(key, value));
        else if (key == "grid.n_cols") config.grid.n_cols = static_cast<int>(to_int(key, value));
        else if (key == "thresholds.theta_d_m") config.thresholds.theta_d_m = to_double(key, value);
        else if (key == "thresholds.theta_t_s") config.thresholds.theta_t_s = to_double(key, value);
        else if (key == "k_candidates") config.k_candidates = to_int_list(key, value);
        else if (key == "em.max_iter") config.em.max_iter = static_cast<int>(to_int(key, value));
        else if (key == "em.rel_tol") config.em.rel_tol = to_double(key, value);
        else if (key == "em.l2") config.em.l2 = to_double(key, value);
        else if (key == "em.sigma_floor") config.em.sigma_floor = to_double(key, value);
        else if (key == "mc_alpha") config.mc_alpha = to_double(key, value);
        else if (key == "train_frac") config.train_frac = to_double(key, value);
        else if (key == "seed") config.seed = static_cast<std::uint64_t>(to_int(key, value));
        else if (key == "weather_policy") {
            if (value == "error") config.weather_policy = WeatherPolicy::Error;
            else if (value == "zero-fill") config.weather_policy = WeatherPolicy::ZeroFill;
            else bad_value(key, value);
        }
        else if (key == "hist_bin_h") config.hist_bin_h = to_double(key, value);
        else if (key == "top_k") config.top_k = static_cast<int>(to_int(key, value));
        else if (key == "sim.n_vehicles") config.sim.n_vehicles = static_cast<int>(to_int(key, value));
        else if (key == "sim.days_per_vehicle") {
            config.sim.days_per_vehicle = static_cast<int>(to_int(key, value));
        }
        else if (key == "sim.min_daily_activities") {
            config.sim.min_daily_activities = static_cast<int>(to_int(key, value));
        }
        else if (key == "sim.max_daily_activities") {
            config.sim.max_daily_activities = static_cast<int>(to_int(key, value));
        }
        else if (key == "sim.idle_day_prob") config.sim.idle_day_prob = to_double(key, value);
        else if (key == "sim.poll_sec") config.sim.poll_sec = to_double(key, value);
        else if (key == "sim.jitter_m") config.sim.jitter_m = to_double(key, value);
        else if (key == "sim.start_date") config.sim.start_date = parse_date(value);
        else if (key == "sim.utc_offset_h") config.sim.utc_offset_h = static_cast<int>(to_int(key, value));
        else {
            throw std::invalid_argument("config: unknown key '" + key + "' at line " +
                                        std::to_string(line_no));
        }
    }
    config.validate();
    return config;
}

ToolkitConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    return parse_config(in);
}

}  // namespace staycast
