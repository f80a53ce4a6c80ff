#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "faceclust/matrix.hpp"

namespace faceclust {

struct KMeansOptions {
    std::uint64_t seed = 0;
    int restarts = 10;
    int max_iter = 300;
    double tol = 1e-8;
};

struct KMeansModel {
    std::size_t k = 0;
    Matrix centroids;
    double inertia = 0.0;
    int iterations = 0;
    std::uint64_t seed = 0;
    int restarts = 1;
    // Index of the restart that produced the centroids; -1 for a warm start.
    int best_restart = 0;
    bool operator==(const KMeansModel&) const = default;
};

struct Assignment {
    std::vector<std::size_t> labels;
    std::vector<double> distances;  // squared distance to own centroid
};

struct KMeansRun {
    KMeansModel model;
    Assignment assignment;
    // SSE after every (assign, update) pair of the winning restart.
    std::vector<double> trace;
};

// Nearest centroid by squared Euclidean distance; ties go to the lowest index.
std::pair<std::size_t, double> assign(const KMeansModel& model, std::span<const double> x);
Assignment assign_all(const Matrix& centroids, const Matrix& x);

double sse(const Matrix& x, std::span<const std::size_t> labels, const Matrix& centroids);

// Lloyd iteration from explicit initial centroids.
KMeansRun lloyd(const Matrix& x, Matrix initial, int max_iter, double tol);

// Best of `restarts` random initializations (k distinct rows each).
KMeansRun kmeans_fit_detailed(const Matrix& x, std::size_t k, const KMeansOptions& options);
KMeansModel kmeans_fit(const Matrix& x, std::size_t k, const KMeansOptions& options);

}  // namespace faceclust
