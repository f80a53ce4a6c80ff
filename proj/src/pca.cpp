#include "faceclust/pca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "faceclust/error.hpp"

namespace faceclust {

StandardizationParams fit_standardizer(const Matrix& x) {
    if (x.rows() < 2) fail(ErrorCode::InsufficientData, "standardizer needs at least 2 samples");
    const std::size_t n = x.rows(), d = x.cols();
    StandardizationParams p{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    for (std::size_t j = 0; j < d; ++j) {
        double lo = x(0, j), hi = x(0, j), sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            lo = std::min(lo, x(i, j));
            hi = std::max(hi, x(i, j));
            sum += x(i, j);
        }
        if (lo == hi) {
            // Constant column: exact mean, unit scale, so it standardizes to 0.
            p.mean[j] = lo;
            continue;
        }
        const double mu = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (x(i, j) - mu) * (x(i, j) - mu);
        const double sigma = std::sqrt(ss / static_cast<double>(n));
        p.mean[j] = mu;
        p.scale[j] = sigma > 0.0 ? sigma : 1.0;
    }
    return p;
}

Matrix standardize(const Matrix& x, const StandardizationParams& params) {
    if (x.cols() != params.mean.size())
        fail(ErrorCode::Argument, "standardize: expected " + std::to_string(params.mean.size()) +
                                      " columns, got " + std::to_string(x.cols()));
    Matrix z(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) z(i, j) = (x(i, j) - params.mean[j]) / params.scale[j];
    return z;
}

Matrix unstandardize(const Matrix& z, const StandardizationParams& params) {
    require(z.cols() == params.mean.size(), "unstandardize: dimension mismatch");
    Matrix x(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.cols(); ++j) x(i, j) = z(i, j) * params.scale[j] + params.mean[j];
    return x;
}

namespace {

Matrix centered(const Matrix& z) {
    Matrix c = z;
    const double n = static_cast<double>(z.rows());
    for (std::size_t j = 0; j < z.cols(); ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < z.rows(); ++i) mu += z(i, j);
        mu /= n;
        for (std::size_t i = 0; i < z.rows(); ++i) c(i, j) -= mu;
    }
    return c;
}

// rows . rows^T / n, filled symmetrically so the result is exactly symmetric.
Matrix symmetric_products(const Matrix& rows, double n) {
    const std::size_t m = rows.rows();
    Matrix out(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) out(i, j) = out(j, i) = dot(rows.row(i), rows.row(j)) / n;
    return out;
}

void fix_sign(std::span<double> v) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
    if (v[arg] < 0.0)
        for (double& e : v) e = -e;
}

}  // namespace

Matrix covariance(const Matrix& z) {
    if (z.rows() < 2) fail(ErrorCode::InsufficientData, "covariance needs at least 2 samples");
    return symmetric_products(centered(z).transposed(), static_cast<double>(z.rows()));
}

Matrix gram(const Matrix& z) {
    if (z.rows() < 2) fail(ErrorCode::InsufficientData, "Gram matrix needs at least 2 samples");
    return symmetric_products(centered(z), static_cast<double>(z.rows()));
}

EigenDecomposition eigendecompose(const Matrix& symmetric) {
    require(symmetric.rows() == symmetric.cols(), "eigendecompose: matrix must be square");
    const std::size_t n = symmetric.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(symmetric(i, j) - symmetric(j, i)) > 1e-9)
                fail(ErrorCode::Argument, "eigendecompose: matrix is not symmetric");

    Matrix a = symmetric;
    Matrix v = Matrix::identity(n);  // eigenvectors in columns while iterating
    constexpr double kOffDiagonalTolerance = 1e-12;
    constexpr int kMaxSweeps = 100;

    auto max_off = [&] {
        double m = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) m = std::max(m, std::abs(a(p, q)));
        return m;
    };

    int sweeps = 0;
    while (max_off() >= kOffDiagonalTolerance) {
        if (sweeps == kMaxSweeps) fail(ErrorCode::Degenerate, "Jacobi iteration did not converge");
        ++sweeps;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p), aqq = a(q, q);
                // Below rounding level of both diagonal entries: drop it.
                if (sweeps > 4 && std::abs(app) + 100.0 * std::abs(apq) == std::abs(app) &&
                    std::abs(aqq) + 100.0 * std::abs(apq) == std::abs(aqq)) {
                    a(p, q) = a(q, p) = 0.0;
                    continue;
                }
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                a(p, q) = a(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

    EigenDecomposition out{std::vector<double>(n), Matrix(n, n), sweeps};
    for (std::size_t r = 0; r < n; ++r) {
        out.values[r] = a(order[r], order[r]);
        for (std::size_t k = 0; k < n; ++k) out.vectors(r, k) = v(k, order[r]);
        fix_sign(out.vectors.row(r));
    }
    return out;
}

namespace {

std::size_t retained_count(const Retention& retention, const std::vector<double>& spectrum,
                           double total, std::size_t rank, std::size_t n, std::size_t d) {
    std::ostringstream rank_msg;
    rank_msg << " (available rank " << rank << ")";
    if (const auto* count = std::get_if<ComponentCount>(&retention)) {
        const std::size_t cap = std::min(n - 1, d);
        if (count->count < 1 || count->count > cap || count->count > rank)
            fail(ErrorCode::Argument, "PCA retention of " + std::to_string(count->count) +
                                          " components exceeds what the data supports" + rank_msg.str());
        return count->count;
    }
    const double fraction = std::get<VarianceFraction>(retention).fraction;
    if (!(fraction > 0.0 && fraction <= 1.0))
        fail(ErrorCode::Argument, "PCA variance fraction must be in (0, 1]");
    double cumulative = 0.0;
    for (std::size_t r = 0; r < rank; ++r) {
        cumulative += spectrum[r] / total;
        if (cumulative >= fraction - 1e-12) return r + 1;
    }
    return rank;
}

}  // namespace

PcaFit fit_pca_detailed(const Matrix& x, Retention retention, PcaSolver solver) {
    if (x.rows() < 2) fail(ErrorCode::InsufficientData, "PCA needs at least 2 samples");
    const std::size_t n = x.rows(), d = x.cols();
    if (solver == PcaSolver::Auto) solver = d > 4 * n ? PcaSolver::Gram : PcaSolver::Direct;

    PcaFit fit;
    fit.solver_used = solver;
    fit.model.standardization = fit_standardizer(x);
    const Matrix zc = centered(standardize(x, fit.model.standardization));

    const Matrix target = solver == PcaSolver::Gram ? symmetric_products(zc, static_cast<double>(n))
                                                    : symmetric_products(zc.transposed(), static_cast<double>(n));
    EigenDecomposition eig = eigendecompose(target);
    for (double& l : eig.values) l = std::max(l, 0.0);

    const double total = std::accumulate(eig.values.begin(), eig.values.end(), 0.0);
    if (!(total > 0.0)) fail(ErrorCode::Degenerate, "PCA input has no variance");
    const double tol = 1e-10 * eig.values.front();
    std::size_t rank = 0;
    while (rank < eig.values.size() && eig.values[rank] > tol) ++rank;
    fit.rank = rank;
    fit.spectrum.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(rank));

    const std::size_t r = retained_count(retention, eig.values, total, rank, n, d);
    PcaModel& m = fit.model;
    m.total_variance = total;
    m.retained = r;
    m.eigenvalues.assign(eig.values.begin(), eig.values.begin() + static_cast<std::ptrdiff_t>(r));
    m.components = Matrix(r, d);
    if (solver == PcaSolver::Direct) {
        for (std::size_t i = 0; i < r; ++i)
            std::copy(eig.vectors.row(i).begin(), eig.vectors.row(i).end(), m.components.row(i).begin());
    } else {
        // v = Zc^T u / |Zc^T u|
        for (std::size_t i = 0; i < r; ++i) {
            auto v = m.components.row(i);
            const auto u = eig.vectors.row(i);
            for (std::size_t s = 0; s < n; ++s) {
                const double us = u[s];
                const auto zrow = zc.row(s);
                for (std::size_t j = 0; j < d; ++j) v[j] += us * zrow[j];
            }
            const double norm = std::sqrt(dot(v, v));
            for (double& e : v) e /= norm;
            fix_sign(v);
        }
    }
    return fit;
}

PcaModel fit_pca(const Matrix& x, Retention retention, PcaSolver solver) {
    return fit_pca_detailed(x, retention, solver).model;
}

Matrix project(const PcaModel& model, const Matrix& x) {
    if (x.cols() != model.dimension())
        fail(ErrorCode::Argument, "project: expected " + std::to_string(model.dimension()) +
                                      " features, got " + std::to_string(x.cols()));
    return multiply_transposed(standardize(x, model.standardization), model.components);
}

std::vector<double> project(const PcaModel& model, std::span<const double> x) {
    const Matrix scores = project(model, Matrix(1, x.size(), std::vector<double>(x.begin(), x.end())));
    return scores.data();
}

Matrix reconstruct(const PcaModel& model, const Matrix& scores) {
    require(scores.cols() == model.retained, "reconstruct: score width does not match the model");
    return unstandardize(multiply(scores, model.components), model.standardization);
}

std::vector<ExplainedVariance> explained_variance(const PcaModel& model) {
    std::vector<ExplainedVariance> out;
    double cumulative = 0.0;
    for (std::size_t i = 0; i < model.eigenvalues.size(); ++i) {
        const double f = model.eigenvalues[i] / model.total_variance;
        cumulative += f;
        out.push_back({i, f, cumulative});
    }
    return out;
}

}  // namespace faceclust
