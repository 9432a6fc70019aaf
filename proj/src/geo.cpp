#include "staycast/geo.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace staycast {

namespace {
constexpr double kDegToRad = 3.141592653589793238462643383279502884 / 180.0;
}

double haversine_m(double lat_a, double lon_a, double lat_b, double lon_b) {
    const double phi1 = lat_a * kDegToRad;
    const double phi2 = lat_b * kDegToRad;
    const double dphi = (lat_b - lat_a) * kDegToRad;
    const double dlam = (lon_b - lon_a) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlam / 2.0);
    const double a = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(a)));
}

std::pair<double, double> project_local_m(double lat, double lon, const GridSpec& grid) {
    const double east = (lon - grid.origin_lon) * kDegToRad * kEarthRadiusM *
                        std::cos(grid.origin_lat * kDegToRad);
    const double north = (lat - grid.origin_lat) * kDegToRad * kEarthRadiusM;
    return {east, north};
}

OutOfGridError::OutOfGridError(double lat_, double lon_)
    : std::runtime_error("point (" + std::to_string(lat_) + ", " + std::to_string(lon_) +
                         ") outside grid bounding box"),
      lat(lat_),
      lon(lon_) {}

CellId cell_of(double lat, double lon, const GridSpec& grid) {
    const auto [east, north] = project_local_m(lat, lon, grid);
    if (east < 0.0 || north < 0.0) throw OutOfGridError(lat, lon);
    const int row = static_cast<int>(std::floor(north / grid.cell_side_m));
    const int col = static_cast<int>(std::floor(east / grid.cell_side_m));
    if (row >= grid.n_rows || col >= grid.n_cols) throw OutOfGridError(lat, lon);
    return CellId{row, col};
}

std::pair<double, double> cell_center(CellId cell, const GridSpec& grid) {
    const double north = (cell.row + 0.5) * grid.cell_side_m;
    const double east = (cell.col + 0.5) * grid.cell_side_m;
    const double lat = grid.origin_lat + north / (kEarthRadiusM * kDegToRad);
    const double lon = grid.origin_lon +
                       east / (kEarthRadiusM * kDegToRad * std::cos(grid.origin_lat * kDegToRad));
    return {lat, lon};
}

GridSpec grid_covering(std::span<const TrajectoryPoint> points, double cell_side_m) {
    if (points.empty()) throw std::invalid_argument("grid_covering: no points");
    double min_lat = points[0].lat, max_lat = points[0].lat;
    double min_lon = points[0].lon, max_lon = points[0].lon;
    for (const auto& p : points) {
        min_lat = std::min(min_lat, p.lat);
        max_lat = std::max(max_lat, p.lat);
        min_lon = std::min(min_lon, p.lon);
        max_lon = std::max(max_lon, p.lon);
    }
    GridSpec grid;
    grid.origin_lat = min_lat;
    grid.origin_lon = min_lon;
    grid.cell_side_m = cell_side_m;
    const auto [east, north] = project_local_m(max_lat, max_lon, grid);
    grid.n_rows = static_cast<int>(std::floor(north / cell_side_m)) + 1;
    grid.n_cols = static_cast<int>(std::floor(east / cell_side_m)) + 1;
    return grid;
}

std::vector<StayRange> detect_stays(std::span<const TrajectoryPoint> points,
                                    const StayThresholds& th) {
    if (th.theta_d_m <= 0.0 || th.theta_t_s <= 0.0) {
        throw std::invalid_argument("stay thresholds must be strictly positive");
    }
    std::vector<StayRange> stays;
    const std::size_t n = points.size();
    std::size_t a = 0;
    while (a < n) {
        std::size_t b = a;
        while (b + 1 < n &&
               haversine_m(points[a].lat, points[a].lon, points[b + 1].lat, points[b + 1].lon) <=
                   th.theta_d_m) {
            ++b;
        }
        const double span = static_cast<double>(points[b].time.epoch_sec - points[a].time.epoch_sec);
        if (span >= th.theta_t_s) {
            stays.push_back(StayRange{a, b});
            a = b + 1;
        } else {
            ++a;
        }
    }
    return stays;
}

std::pair<double, double> stay_centroid(std::span<const TrajectoryPoint> members) {
    if (members.empty()) throw std::invalid_argument("stay_centroid: empty member set");
    double lat = 0.0, lon = 0.0;
    for (const auto& p : members) {
        lat += p.lat;
        lon += p.lon;
    }
    const double n = static_cast<double>(members.size());
    return {lat / n, lon / n};
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

IngestResult ingest_trajectories(std::istream& in) {
    IngestResult result;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (!header_seen) {
            header_seen = true;
            if (t.find("vehicle_id") != std::string::npos) continue;  // header row
        }
        const auto fields = split_csv(t);
        if (fields.size() != 4) {
            result.skipped.push_back({line_no, "expected 4 fields, got " +
                                                   std::to_string(fields.size())});
            continue;
        }
        TrajectoryPoint p;
        p.vehicle_id = trim(fields[0]);
        try {
            p.time = parse_timestamp(trim(fields[1]));
            std::size_t used = 0;
            p.lat = std::stod(trim(fields[2]), &used);
            if (used != trim(fields[2]).size()) throw std::invalid_argument("trailing junk in lat");
            p.lon = std::stod(trim(fields[3]), &used);
            if (used != trim(fields[3]).size()) throw std::invalid_argument("trailing junk in lon");
        } catch (const std::exception& e) {
            result.skipped.push_back({line_no, e.what()});
            continue;
        }
        if (p.vehicle_id.empty()) {
            result.skipped.push_back({line_no, "empty vehicle_id"});
            continue;
        }
        if (!(p.lat >= -90.0 && p.lat <= 90.0) || !(p.lon >= -180.0 && p.lon <= 180.0)) {
            result.skipped.push_back({line_no, "coordinate out of range"});
            continue;
        }
        ++result.n_rows;
        result.vehicles[p.vehicle_id].push_back(std::move(p));
    }
    for (auto& [id, pts] : result.vehicles) {
        std::stable_sort(pts.begin(), pts.end(), [](const TrajectoryPoint& a, const TrajectoryPoint& b) {
            return a.time.epoch_sec < b.time.epoch_sec;
        });
        std::vector<TrajectoryPoint> kept;
        kept.reserve(pts.size());
        for (auto& p : pts) {
            if (!kept.empty() && kept.back().time.epoch_sec == p.time.epoch_sec) {
                if (kept.back().lat == p.lat && kept.back().lon == p.lon) continue;  // exact dup
                result.skipped.push_back(
                    {0, "vehicle " + id + ": conflicting fixes at " + format_timestamp(p.time) +
                            ", kept first"});
                continue;
            }
            kept.push_back(std::move(p));
        }
        pts = std::move(kept);
    }
    return result;
}

}  // namespace staycast
