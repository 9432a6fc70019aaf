#include "staycast/kmeans.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>

namespace staycast {

std::vector<ActivityFeature> activity_features(const std::vector<ActivityDay>& days) {
    std::vector<ActivityFeature> out;
    for (const auto& day : days) {
        for (const auto& stay : day.stays) {
            ActivityFeature f;
            f.arrival_hour = local_hour(stay.arrival);
            f.duration_h = stay.dwell_h();
            f.cell_row = static_cast<double>(stay.cell.row);
            f.cell_col = static_cast<double>(stay.cell.col);
            out.push_back(f);
        }
    }
    return out;
}

std::vector<Eigen::Vector4d> zscore_features(const std::vector<ActivityFeature>& raw) {
    const std::size_t n = raw.size();
    std::vector<Eigen::Vector4d> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] << raw[i].arrival_hour, raw[i].duration_h, raw[i].cell_row, raw[i].cell_col;
    }
    if (n == 0) return xs;
    Eigen::Vector4d mean = Eigen::Vector4d::Zero();
    for (const auto& x : xs) mean += x;
    mean /= static_cast<double>(n);
    Eigen::Vector4d var = Eigen::Vector4d::Zero();
    for (const auto& x : xs) var += (x - mean).cwiseProduct(x - mean);
    var /= static_cast<double>(n);
    for (int j = 0; j < 4; ++j) {
        const double sd = std::sqrt(var(j));
        for (auto& x : xs) x(j) = sd > 0.0 ? (x(j) - mean(j)) / sd : 0.0;
    }
    return xs;
}

KMeansResult kmeans(const std::vector<Eigen::Vector4d>& points, int k, std::uint64_t seed,
                    int max_iter) {
    if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
    if (points.empty()) throw std::invalid_argument("kmeans: no points");

    std::set<std::array<double, 4>> distinct;
    for (const auto& p : points) distinct.insert({p(0), p(1), p(2), p(3)});
    const int k_eff = std::min<int>(k, static_cast<int>(distinct.size()));

    std::mt19937_64 rng(seed);
    const std::size_t n = points.size();
    std::vector<Eigen::Vector4d> centroids;
    centroids.reserve(static_cast<std::size_t>(k_eff));

    // k-means++ seeding
    std::uniform_int_distribution<std::size_t> uni(0, n - 1);
    centroids.push_back(points[uni(rng)]);
    std::vector<double> d2(n);
    while (static_cast<int>(centroids.size()) < k_eff) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, (points[i] - c).squaredNorm());
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) break;  // remaining points coincide with centroids
        std::uniform_real_distribution<double> pick(0.0, total);
        double r = pick(rng);
        std::size_t chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            r -= d2[i];
            if (r <= 0.0) {
                chosen = i;
                break;
            }
        }
        centroids.push_back(points[chosen]);
    }

    KMeansResult result;
    result.k = static_cast<int>(centroids.size());
    result.labels.assign(n, 0);
    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = (points[i] - centroids[0]).squaredNorm();
            for (int c = 1; c < result.k; ++c) {
                const double d = (points[i] - centroids[static_cast<std::size_t>(c)]).squaredNorm();
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (result.labels[i] != best) {
                result.labels[i] = best;
                changed = true;
            }
        }
        std::vector<Eigen::Vector4d> sums(static_cast<std::size_t>(result.k),
                                          Eigen::Vector4d::Zero());
        std::vector<int> counts(static_cast<std::size_t>(result.k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums[static_cast<std::size_t>(result.labels[i])] += points[i];
            ++counts[static_cast<std::size_t>(result.labels[i])];
        }
        for (int c = 0; c < result.k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centroids[static_cast<std::size_t>(c)] =
                    sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)];
            }
        }
        if (!changed && iter > 0) break;
    }
    result.centroids = std::move(centroids);
    result.inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        result.inertia +=
            (points[i] - result.centroids[static_cast<std::size_t>(result.labels[i])]).squaredNorm();
    }
    return result;
}

KMeansResult kmeans_multi(const std::vector<Eigen::Vector4d>& points, int k, std::uint64_t seed,
                          int restarts) {
    KMeansResult best;
    bool first = true;
    for (int r = 0; r < restarts; ++r) {
        KMeansResult run = kmeans(points, k, mix_seed(seed, static_cast<std::uint64_t>(r)));
        if (first || run.inertia < best.inertia) {
            best = std::move(run);
            first = false;
        }
    }
    return best;
}

double silhouette(const std::vector<Eigen::Vector4d>& points, const std::vector<int>& labels) {
    const std::size_t n = points.size();
    if (labels.size() != n) throw std::invalid_argument("silhouette: size mismatch");
    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    int non_empty = 0;
    for (int c : counts) non_empty += c > 0 ? 1 : 0;
    if (non_empty < 2) throw std::invalid_argument("silhouette: needs at least two clusters");

    double total = 0.0;
    std::vector<double> dist_sum(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            dist_sum[static_cast<std::size_t>(labels[j])] += (points[i] - points[j]).norm();
        }
        const int own = labels[i];
        if (counts[static_cast<std::size_t>(own)] <= 1) continue;  // singleton: s = 0
        const double a =
            dist_sum[static_cast<std::size_t>(own)] / (counts[static_cast<std::size_t>(own)] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
            if (c == own || counts[static_cast<std::size_t>(c)] == 0) continue;
            b = std::min(b, dist_sum[static_cast<std::size_t>(c)] /
                                counts[static_cast<std::size_t>(c)]);
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

int select_state_count(const std::vector<ActivityFeature>& activities,
                       const std::vector<int>& candidates, std::uint64_t seed,
                       std::vector<std::pair<int, double>>* scores) {
    if (candidates.empty()) throw std::invalid_argument("select_state_count: no candidates");
    const int k_min = *std::min_element(candidates.begin(), candidates.end());
    const int k_max = *std::max_element(candidates.begin(), candidates.end());
    if (static_cast<int>(activities.size()) < k_max + 1) return k_min;

    const auto xs = zscore_features(activities);
    int best_k = k_min;
    double best_score = -std::numeric_limits<double>::infinity();
    std::vector<int> sorted_candidates = candidates;
    std::sort(sorted_candidates.begin(), sorted_candidates.end());
    for (int k : sorted_candidates) {
        const KMeansResult run = kmeans_multi(xs, k, mix_seed(seed, static_cast<std::uint64_t>(k)));
        double score;
        try {
            score = silhouette(xs, run.labels);
        } catch (const std::invalid_argument&) {
            continue;  // degenerate clustering collapsed to one cluster
        }
        if (scores != nullptr) scores->emplace_back(k, score);
        if (score > best_score) {
            best_score = score;
            best_k = k;
        }
    }
    return best_k;
}

}  // namespace staycast
