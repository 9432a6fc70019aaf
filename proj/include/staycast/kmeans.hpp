#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "staycast/sequences.hpp"

namespace staycast {

/// Spatiotemporal signature of one stay activity, z-scored per vehicle.
struct ActivityFeature {
    double arrival_hour = 0.0;
    double duration_h = 0.0;  // dwell time
    double cell_row = 0.0;
    double cell_col = 0.0;
};

std::vector<ActivityFeature> activity_features(const std::vector<ActivityDay>& days);

/// Z-score each dimension with the population std; constant dimensions map to 0.
std::vector<Eigen::Vector4d> zscore_features(const std::vector<ActivityFeature>& raw);

struct KMeansResult {
    std::vector<int> labels;
    std::vector<Eigen::Vector4d> centroids;
    double inertia = 0.0;  // within-cluster sum of squares
    int k = 0;             // may be reduced below the requested k
};

/// Lloyd's algorithm with k-means++ seeding; deterministic given seed. If the
/// input has fewer distinct points than k, k is reduced to the distinct count.
KMeansResult kmeans(const std::vector<Eigen::Vector4d>& points, int k, std::uint64_t seed,
                    int max_iter = 300);

/// Best of `restarts` seeded runs by inertia.
KMeansResult kmeans_multi(const std::vector<Eigen::Vector4d>& points, int k, std::uint64_t seed,
                          int restarts = 10);

/// Mean silhouette coefficient; singleton clusters score 0. Requires at least
/// two non-empty clusters.
double silhouette(const std::vector<Eigen::Vector4d>& points, const std::vector<int>& labels);

/// Hidden-state count: argmax of the mean silhouette over the candidate set,
/// ties toward smaller k. Vehicles with at most max(candidates) activities
/// fall back to min(candidates).
int select_state_count(const std::vector<ActivityFeature>& activities,
                       const std::vector<int>& candidates, std::uint64_t seed,
                       std::vector<std::pair<int, double>>* scores = nullptr);

}  // namespace staycast
