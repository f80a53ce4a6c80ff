#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "faceclust/kmeans.hpp"

namespace faceclust {

struct ElbowPoint {
    std::size_t k;
    double sse;
};

struct ElbowCurve {
    std::vector<ElbowPoint> points;
    std::size_t k_min = 1;
    std::size_t k_max = 1;
};

// Per k: best SSE over random restarts plus one warm start from the previous
// k's centroids and the sample farthest from them.
ElbowCurve elbow_curve(const Matrix& x, std::size_t k_min, std::size_t k_max, const KMeansOptions& options);

// Interior k with the largest distance to the chord between the normalized
// endpoints; ties go to the smaller k.
std::size_t suggest_knee(const ElbowCurve& curve);

double silhouette_sample(const Matrix& x, std::span<const std::size_t> labels, std::size_t i);

struct SilhouetteReport {
    std::vector<double> per_sample;
    std::vector<double> per_cluster_mean;
    std::vector<std::size_t> cluster_sizes;
    double overall_mean = 0.0;
};

SilhouetteReport silhouette_report(const Matrix& x, std::span<const std::size_t> labels);

struct KCandidate {
    std::size_t k = 0;
    double overall_mean = 0.0;
    std::vector<double> per_cluster_mean;
    std::vector<std::size_t> cluster_sizes;
    // Every cluster mean at or above the overall mean. Since the overall mean
    // is the size-weighted mean of the cluster means, this only holds when
    // they are all equal; it is reported but does not drive selection.
    bool all_above_overall = false;
    // Every cluster has two or more members and a positive mean silhouette.
    bool all_clusters_cohesive = false;
    double size_imbalance = 0.0;
};

struct KSelection {
    std::vector<KCandidate> candidates;
    std::size_t chosen_k = 0;
    std::vector<std::string> rationale;
};

// Rule order: every cluster cohesive (two or more members, positive mean
// silhouette), then higher overall mean, then lower max/min size ratio, then
// smaller k. Each k is fit with seed + k.
KSelection select_k(const Matrix& x, std::size_t k_min, std::size_t k_max, const KMeansOptions& options);

}  // namespace faceclust
