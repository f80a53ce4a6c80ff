#include "faceclust/model_select.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "faceclust/error.hpp"

namespace faceclust {

namespace {

constexpr double kTieTolerance = 1e-12;

KMeansOptions seeded_for(const KMeansOptions& options, std::size_t k) {
    KMeansOptions o = options;
    o.seed = options.seed + k;
    return o;
}

Matrix warm_start(const Matrix& x, const Matrix& previous) {
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < previous.rows(); ++c)
            nearest = std::min(nearest, squared_distance(x.row(i), previous.row(c)));
        if (nearest > far_d) {
            far_d = nearest;
            far = i;
        }
    }
    Matrix init(previous.rows() + 1, x.cols());
    std::copy(previous.data().begin(), previous.data().end(), init.data().begin());
    std::copy(x.row(far).begin(), x.row(far).end(), init.row(previous.rows()).begin());
    return init;
}

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

}  // namespace

ElbowCurve elbow_curve(const Matrix& x, std::size_t k_min, std::size_t k_max, const KMeansOptions& options) {
    if (!(k_min >= 1 && k_min <= k_max && k_max <= x.rows()))
        fail(ErrorCode::Argument, "elbow: need 1 <= k_min <= k_max <= n (n = " + std::to_string(x.rows()) + ")");
    ElbowCurve curve;
    curve.k_min = k_min;
    curve.k_max = k_max;
    Matrix previous;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        KMeansRun best = kmeans_fit_detailed(x, k, seeded_for(options, k));
        if (!previous.empty()) {
            KMeansRun warm = lloyd(x, warm_start(x, previous), options.max_iter, options.tol);
            if (warm.model.inertia < best.model.inertia) best = std::move(warm);
        }
        curve.points.push_back({k, best.model.inertia});
        previous = best.model.centroids;
    }
    return curve;
}

std::size_t suggest_knee(const ElbowCurve& curve) {
    const auto& pts = curve.points;
    if (pts.size() < 3) fail(ErrorCode::Argument, "knee detection needs at least 3 curve points");
    double lo = pts.front().sse, hi = pts.front().sse;
    for (const auto& p : pts) {
        lo = std::min(lo, p.sse);
        hi = std::max(hi, p.sse);
    }
    const double kspan = static_cast<double>(pts.back().k - pts.front().k);
    const double yspan = hi - lo;
    auto nx = [&](const ElbowPoint& p) { return static_cast<double>(p.k - pts.front().k) / kspan; };
    auto ny = [&](const ElbowPoint& p) { return yspan > 0.0 ? (p.sse - lo) / yspan : 0.0; };

    const double x0 = nx(pts.front()), y0 = ny(pts.front());
    const double x1 = nx(pts.back()), y1 = ny(pts.back());
    const double len = std::hypot(x1 - x0, y1 - y0);
    std::size_t best_k = pts[1].k;
    double best_d = -1.0;
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
        const double d = std::abs((y1 - y0) * nx(pts[i]) - (x1 - x0) * ny(pts[i]) + x1 * y0 - y1 * x0) / len;
        if (d > best_d + kTieTolerance) {
            best_d = d;
            best_k = pts[i].k;
        }
    }
    return best_k;
}

namespace {

std::size_t cluster_count(std::span<const std::size_t> labels) {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

void require_two_clusters(std::span<const std::size_t> labels) {
    for (std::size_t l : labels)
        if (l != labels.front()) return;
    fail(ErrorCode::Degenerate, "silhouette is undefined for a single cluster");
}

// Mean Euclidean distance from sample i to every cluster (its own excluding i).
std::vector<double> mean_distances(const Matrix& x, std::span<const std::size_t> labels,
                                   std::span<const std::size_t> sizes, std::size_t i) {
    std::vector<double> sum(sizes.size(), 0.0);
    for (std::size_t j = 0; j < x.rows(); ++j) {
        if (j == i) continue;
        sum[labels[j]] += std::sqrt(squared_distance(x.row(i), x.row(j)));
    }
    for (std::size_t c = 0; c < sizes.size(); ++c) {
        const std::size_t members = c == labels[i] ? sizes[c] - 1 : sizes[c];
        sum[c] = members > 0 ? sum[c] / static_cast<double>(members) : 0.0;
    }
    return sum;
}

double silhouette_from(const std::vector<double>& means, std::span<const std::size_t> sizes, std::size_t own) {
    if (sizes[own] <= 1) return 0.0;
    const double a = means[own];
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sizes.size(); ++c)
        if (c != own && sizes[c] > 0) b = std::min(b, means[c]);
    const double denom = std::max(a, b);
    return denom > 0.0 ? (b - a) / denom : 0.0;
}

std::vector<std::size_t> sizes_of(std::span<const std::size_t> labels) {
    std::vector<std::size_t> sizes(cluster_count(labels), 0);
    for (std::size_t l : labels) ++sizes[l];
    return sizes;
}

}  // namespace

double silhouette_sample(const Matrix& x, std::span<const std::size_t> labels, std::size_t i) {
    require(labels.size() == x.rows(), "silhouette: label count differs from sample count");
    require(i < x.rows(), "silhouette: sample index out of range");
    require_two_clusters(labels);
    const auto sizes = sizes_of(labels);
    return silhouette_from(mean_distances(x, labels, sizes, i), sizes, labels[i]);
}

SilhouetteReport silhouette_report(const Matrix& x, std::span<const std::size_t> labels) {
    require(labels.size() == x.rows(), "silhouette: label count differs from sample count");
    require_two_clusters(labels);
    SilhouetteReport r;
    r.cluster_sizes = sizes_of(labels);
    r.per_sample.resize(x.rows());
    r.per_cluster_mean.assign(r.cluster_sizes.size(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        r.per_sample[i] = silhouette_from(mean_distances(x, labels, r.cluster_sizes, i), r.cluster_sizes, labels[i]);
        r.per_cluster_mean[labels[i]] += r.per_sample[i];
    }
    double total = 0.0;
    for (double s : r.per_sample) total += s;
    r.overall_mean = total / static_cast<double>(x.rows());
    for (std::size_t c = 0; c < r.cluster_sizes.size(); ++c)
        if (r.cluster_sizes[c] > 0) r.per_cluster_mean[c] /= static_cast<double>(r.cluster_sizes[c]);
    return r;
}

KSelection select_k(const Matrix& x, std::size_t k_min, std::size_t k_max, const KMeansOptions& options) {
    if (!(k_min >= 2 && k_min <= k_max && k_max <= x.rows()))
        fail(ErrorCode::Argument, "select_k: need 2 <= k_min <= k_max <= n (n = " + std::to_string(x.rows()) + ")");
    KSelection sel;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        const KMeansRun run = kmeans_fit_detailed(x, k, seeded_for(options, k));
        const SilhouetteReport rep = silhouette_report(x, run.assignment.labels);
        KCandidate c;
        c.k = k;
        c.overall_mean = rep.overall_mean;
        c.per_cluster_mean = rep.per_cluster_mean;
        c.cluster_sizes = rep.cluster_sizes;
        c.all_above_overall = true;
        c.all_clusters_cohesive = true;
        std::size_t smallest = x.rows(), largest = 0;
        for (std::size_t j = 0; j < rep.cluster_sizes.size(); ++j) {
            if (rep.cluster_sizes[j] == 0) continue;
            smallest = std::min(smallest, rep.cluster_sizes[j]);
            largest = std::max(largest, rep.cluster_sizes[j]);
            if (rep.per_cluster_mean[j] < rep.overall_mean - kTieTolerance) c.all_above_overall = false;
            if (rep.cluster_sizes[j] < 2 || rep.per_cluster_mean[j] <= 0.0) c.all_clusters_cohesive = false;
        }
        c.size_imbalance = static_cast<double>(largest) / static_cast<double>(smallest);
        sel.candidates.push_back(std::move(c));

        const KCandidate& last = sel.candidates.back();
        double min_mean = std::numeric_limits<double>::infinity();
        std::size_t min_size = std::numeric_limits<std::size_t>::max();
        for (std::size_t j = 0; j < last.per_cluster_mean.size(); ++j) {
            if (last.cluster_sizes[j] == 0) continue;
            min_mean = std::min(min_mean, last.per_cluster_mean[j]);
            min_size = std::min(min_size, last.cluster_sizes[j]);
        }
        sel.rationale.push_back("k=" + std::to_string(k) + ": overall mean " + fmt(last.overall_mean) +
                                ", lowest cluster mean " + fmt(min_mean) + ", smallest cluster " +
                                std::to_string(min_size) + ", every cluster cohesive: " +
                                (last.all_clusters_cohesive ? "yes" : "no") + ", size imbalance " +
                                fmt(last.size_imbalance));
    }

    sel.rationale.push_back(
        "selection rules (a formalization of choosing k by silhouette plots): 1) every cluster has two or more "
        "members and a positive mean, 2) highest overall mean, 3) lowest size imbalance, 4) smallest k");

    std::vector<const KCandidate*> pool;
    for (const auto& c : sel.candidates)
        if (c.all_clusters_cohesive) pool.push_back(&c);
    auto list = [](const std::vector<const KCandidate*>& v) {
        std::string s;
        for (const auto* c : v) s += (s.empty() ? "" : ",") + std::to_string(c->k);
        return "{" + s + "}";
    };
    if (pool.empty()) {
        for (const auto& c : sel.candidates) pool.push_back(&c);
        sel.rationale.push_back("rule 1: no k satisfies it; fallback to rule 2 over all candidates " + list(pool));
    } else {
        sel.rationale.push_back("rule 1: satisfied by k in " + list(pool));
    }

    auto keep_best = [&](auto key, bool maximize) {
        double best = maximize ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
        for (const auto* c : pool) best = maximize ? std::max(best, key(*c)) : std::min(best, key(*c));
        std::vector<const KCandidate*> next;
        for (const auto* c : pool)
            if (std::abs(key(*c) - best) <= kTieTolerance) next.push_back(c);
        pool = std::move(next);
        return best;
    };
    const double best_mean = keep_best([](const KCandidate& c) { return c.overall_mean; }, true);
    sel.rationale.push_back("rule 2: highest overall mean " + fmt(best_mean) + " at k in " + list(pool));
    if (pool.size() > 1) {
        const double best_imb = keep_best([](const KCandidate& c) { return c.size_imbalance; }, false);
        sel.rationale.push_back("rule 3: lowest size imbalance " + fmt(best_imb) + " at k in " + list(pool));
    }
    if (pool.size() > 1) sel.rationale.push_back("rule 4: smallest k among " + list(pool));
    sel.chosen_k = pool.front()->k;
    sel.rationale.push_back("chosen k=" + std::to_string(sel.chosen_k));
    return sel;
}

}  // namespace faceclust
