#pragma once

#include <compare>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "staycast/util.hpp"

namespace staycast {

/// One timestamped GPS fix of one vehicle.
struct TrajectoryPoint {
    std::string vehicle_id;
    double lat = 0.0;  // degrees, WGS-84
    double lon = 0.0;
    Timestamp time;
};

/// Stay detection thresholds: max radius around the window anchor and
/// minimum time span. Both strictly positive.
struct StayThresholds {
    double theta_d_m = 200.0;
    double theta_t_s = 600.0;
};

/// Axis-aligned planar grid anchored at (origin_lat, origin_lon); cells are
/// cell_side_m squares under a local equirectangular projection.
struct GridSpec {
    double origin_lat = 0.0;
    double origin_lon = 0.0;
    double cell_side_m = 2000.0;
    int n_rows = 0;
    int n_cols = 0;
};

struct CellId {
    int row = 0;
    int col = 0;
    auto operator<=>(const CellId&) const = default;
};

constexpr double kEarthRadiusM = 6371000.0;

/// Great-circle distance in meters.
double haversine_m(double lat_a, double lon_a, double lat_b, double lon_b);

/// Meters east/north of the grid origin (local equirectangular projection).
std::pair<double, double> project_local_m(double lat, double lon, const GridSpec& grid);

/// Thrown by cell_of for points outside the grid bounding box.
struct OutOfGridError : std::runtime_error {
    OutOfGridError(double lat, double lon);
    double lat, lon;
};

CellId cell_of(double lat, double lon, const GridSpec& grid);

/// (lat, lon) of a cell's center; inverse of cell_of up to half a cell side.
std::pair<double, double> cell_center(CellId cell, const GridSpec& grid);

/// Smallest grid whose min-lat/min-lon corner is the points' bounding box
/// corner, expanded to a whole number of cells.
GridSpec grid_covering(std::span<const TrajectoryPoint> points, double cell_side_m);

/// Inclusive index range [first, last] of the member points of one stay.
struct StayRange {
    std::size_t first = 0;
    std::size_t last = 0;
};

/// Scan a time-sorted point stream for maximal windows whose members all lie
/// within theta_d of the window's first point and whose span is at least
/// theta_t. After an accepted stay the scan resumes past its last member.
std::vector<StayRange> detect_stays(std::span<const TrajectoryPoint> points,
                                    const StayThresholds& th);

/// Unweighted mean of member latitudes and longitudes. Throws on empty input.
std::pair<double, double> stay_centroid(std::span<const TrajectoryPoint> members);

struct IngestResult {
    std::map<std::string, std::vector<TrajectoryPoint>> vehicles;  // time-sorted, deduped
    struct SkippedRow {
        std::size_t line_no = 0;
        std::string reason;
    };
    std::vector<SkippedRow> skipped;
    std::size_t n_rows = 0;
};

/// Read a `vehicle_id,timestamp,lat,lon` CSV. Malformed or out-of-range rows
/// are recorded and skipped; exact duplicate fixes are dropped; same-time
/// conflicting fixes keep the first occurrence and log the conflict.
IngestResult ingest_trajectories(std::istream& in);

}  // namespace staycast
