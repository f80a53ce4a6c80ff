#include "faceclust/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "faceclust/error.hpp"
#include "faceclust/rng.hpp"

namespace faceclust {

std::pair<std::size_t, double> assign(const KMeansModel& model, std::span<const double> x) {
    if (x.size() != model.centroids.cols())
        fail(ErrorCode::Argument, "assign: expected dimension " + std::to_string(model.centroids.cols()) +
                                      ", got " + std::to_string(x.size()));
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < model.centroids.rows(); ++c) {
        const double d = squared_distance(x, model.centroids.row(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return {best, best_d};
}

Assignment assign_all(const Matrix& centroids, const Matrix& x) {
    require(centroids.cols() == x.cols(), "assign: centroid and sample dimensions differ");
    Assignment a{std::vector<std::size_t>(x.rows()), std::vector<double>(x.rows())};
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.rows(); ++c) {
            const double d = squared_distance(x.row(i), centroids.row(c));
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        a.labels[i] = best;
        a.distances[i] = best_d;
    }
    return a;
}

double sse(const Matrix& x, std::span<const std::size_t> labels, const Matrix& centroids) {
    require(labels.size() == x.rows(), "sse: label count differs from sample count");
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) total += squared_distance(x.row(i), centroids.row(labels[i]));
    return total;
}

namespace {

// Moves each empty cluster's centroid onto the sample farthest from its own
// centroid, taken only from clusters that keep at least one member.
bool repair_empty(const Matrix& x, Matrix& centroids, Assignment& a) {
    const std::size_t k = centroids.rows();
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t l : a.labels) ++sizes[l];
    bool repaired = false;
    for (std::size_t c = 0; c < k; ++c) {
        if (sizes[c] != 0) continue;
        std::size_t far = x.rows();
        for (std::size_t i = 0; i < x.rows(); ++i) {
            if (sizes[a.labels[i]] < 2) continue;
            if (far == x.rows() || a.distances[i] > a.distances[far]) far = i;
        }
        if (far == x.rows()) fail(ErrorCode::Degenerate, "k-means: cannot repopulate an empty cluster");
        std::copy(x.row(far).begin(), x.row(far).end(), centroids.row(c).begin());
        --sizes[a.labels[far]];
        ++sizes[c];
        a.labels[far] = c;
        a.distances[far] = 0.0;
        repaired = true;
    }
    return repaired;
}

Matrix cluster_means(const Matrix& x, std::span<const std::size_t> labels, std::size_t k) {
    Matrix sums(k, x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto dst = sums.row(labels[i]);
        const auto src = x.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j) dst[j] += src[j];
        ++counts[labels[i]];
    }
    for (std::size_t c = 0; c < k; ++c)
        for (double& v : sums.row(c)) v /= static_cast<double>(counts[c]);
    return sums;
}

std::vector<std::size_t> distinct_rows(const Matrix& x) {
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto row_less = [&](std::size_t a, std::size_t b) {
        const auto ra = x.row(a), rb = x.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    };
    std::stable_sort(idx.begin(), idx.end(), row_less);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < idx.size(); ++i)
        if (i == 0 || row_less(idx[i - 1], idx[i])) out.push_back(idx[i]);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

KMeansRun lloyd(const Matrix& x, Matrix initial, int max_iter, double tol) {
    const std::size_t k = initial.rows();
    require(k >= 1 && k <= x.rows(), "k-means: k must be in [1, n]");
    require(initial.cols() == x.cols(), "k-means: initial centroid dimension mismatch");

    KMeansRun run;
    Matrix centroids = std::move(initial);
    Assignment a = assign_all(centroids, x);
    bool repaired = repair_empty(x, centroids, a);
    run.trace.push_back(sse(x, a.labels, centroids));

    int iterations = 0;
    for (int it = 1; it <= max_iter; ++it) {
        Matrix next = cluster_means(x, a.labels, k);
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            shift = std::max(shift, std::sqrt(squared_distance(next.row(c), centroids.row(c))));
        centroids = std::move(next);

        Assignment b = assign_all(centroids, x);
        const bool reseeded = repair_empty(x, centroids, b);
        const bool changed = reseeded || b.labels != a.labels;
        a = std::move(b);
        run.trace.push_back(sse(x, a.labels, centroids));
        iterations = it;
        repaired = reseeded;
        if (!changed || (shift < tol && !repaired)) break;
    }

    run.model.k = k;
    run.model.centroids = std::move(centroids);
    run.model.inertia = run.trace.back();
    run.model.iterations = iterations;
    run.assignment = std::move(a);
    return run;
}

KMeansRun kmeans_fit_detailed(const Matrix& x, std::size_t k, const KMeansOptions& options) {
    if (k < 1 || k > x.rows())
        fail(ErrorCode::Argument, "k-means: k = " + std::to_string(k) + " outside [1, " +
                                      std::to_string(x.rows()) + "]");
    require(options.restarts >= 1, "k-means: restarts must be >= 1");
    require(options.max_iter >= 1, "k-means: max_iter must be >= 1");
    const auto unique = distinct_rows(x);
    if (unique.size() < k)
        fail(ErrorCode::Argument, "k-means: only " + std::to_string(unique.size()) +
                                      " distinct samples for k = " + std::to_string(k));

    Rng rng(options.seed);
    KMeansRun best;
    bool have = false;
    for (int r = 0; r < options.restarts; ++r) {
        std::vector<std::size_t> pool = unique;
        Matrix init(k, x.cols());
        for (std::size_t c = 0; c < k; ++c) {
            std::swap(pool[c], pool[c + rng.index(pool.size() - c)]);
            std::copy(x.row(pool[c]).begin(), x.row(pool[c]).end(), init.row(c).begin());
        }
        KMeansRun run = lloyd(x, std::move(init), options.max_iter, options.tol);
        if (!have || run.model.inertia < best.model.inertia) {
            best = std::move(run);
            best.model.best_restart = r;
            have = true;
        }
    }
    best.model.seed = options.seed;
    best.model.restarts = options.restarts;
    return best;
}

KMeansModel kmeans_fit(const Matrix& x, std::size_t k, const KMeansOptions& options) {
    return kmeans_fit_detailed(x, k, options).model;
}

}  // namespace faceclust
