#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "staycast/baselines.hpp"
#include "staycast/config.hpp"
#include "staycast/iohmm.hpp"
#include "staycast/sequences.hpp"

namespace staycast {

/// Write `content` to `path` via a temp file + rename so readers never see a
/// partial artifact.
void atomic_write_file(const std::string& path, const std::string& content);

/// --- stays artifact (JSON lines; first line is a meta record) ---

struct StaysArtifact {
    GridSpec grid;
    StayThresholds thresholds;
    std::map<std::string, std::vector<StayActivity>> stays;  // per vehicle, time-ordered
};

std::string stays_to_jsonl(const StaysArtifact& artifact);
StaysArtifact stays_from_jsonl(std::istream& in);

/// --- sequences artifact (JSON lines; one ActivityDay per line) ---

struct SequencesArtifact {
    GridSpec grid;
    std::map<std::string, std::vector<ActivityDay>> fleet;  // days chronological
};

std::string sequences_to_jsonl(const SequencesArtifact& artifact);
SequencesArtifact sequences_from_jsonl(std::istream& in);

/// --- per-vehicle model bundle (one JSON document) ---

struct VehicleModelBundle {
    std::string vehicle_id;
    GridSpec grid;
    std::uint64_t seed = 0;  // per-vehicle derived seed used in fitting
    int n_train_days = 0;
    int n_test_days = 0;
    std::map<int, double> silhouette_by_k;  // state-count selection detail
    IohmmModel iohmm;
    MarkovChainModel mc;
    LinearDurationModel lr;
    EmTrace trace;
    ToolkitConfig config;  // echo of the fitting configuration
};

std::string bundle_to_json(const VehicleModelBundle& bundle);
VehicleModelBundle bundle_from_json(const std::string& text);
void write_model_bundle(const std::string& path, const VehicleModelBundle& bundle);
VehicleModelBundle read_model_bundle(const std::string& path);

/// --- forecasts artifact (JSON lines) ---

struct ForecastRecord {
    std::string vehicle_id;
    std::int64_t date = 0;    // operational-day civil date
    int after_activity = 0;   // number of observed activities conditioned on
    CellId cell;
    double duration_h = 0.0;
    std::vector<std::pair<CellId, double>> top_dest_probs;  // descending probability
};

std::string forecasts_to_jsonl(const std::vector<ForecastRecord>& forecasts, int top_k);
std::vector<ForecastRecord> forecasts_from_jsonl(std::istream& in);

}  // namespace staycast
