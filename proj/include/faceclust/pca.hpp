#pragma once

#include <cstddef>
#include <variant>
#include <vector>

#include "faceclust/matrix.hpp"

namespace faceclust {

struct StandardizationParams {
    std::vector<double> mean;
    std::vector<double> scale;
    bool operator==(const StandardizationParams&) const = default;
};

// Column means and population standard deviations; zero deviations become 1.
StandardizationParams fit_standardizer(const Matrix& x);
Matrix standardize(const Matrix& x, const StandardizationParams& params);
Matrix unstandardize(const Matrix& z, const StandardizationParams& params);

// Population covariance of the column-centered input (divides by n).
Matrix covariance(const Matrix& z);

// Inner products of the column-centered rows, divided by n.
Matrix gram(const Matrix& z);

struct EigenDecomposition {
    std::vector<double> values;  // descending
    Matrix vectors;              // one eigenvector per row
    int sweeps = 0;
};

// Cyclic Jacobi. Each eigenvector's largest-magnitude entry is made positive.
EigenDecomposition eigendecompose(const Matrix& symmetric);

struct ComponentCount {
    std::size_t count;
};
struct VarianceFraction {
    double fraction;
};
using Retention = std::variant<ComponentCount, VarianceFraction>;

enum class PcaSolver { Auto, Direct, Gram };

struct PcaModel {
    StandardizationParams standardization;
    Matrix components;  // retained x d, orthonormal rows
    std::vector<double> eigenvalues;
    double total_variance = 0.0;
    std::size_t retained = 0;

    std::size_t dimension() const { return standardization.mean.size(); }
    bool operator==(const PcaModel&) const = default;
};

struct PcaFit {
    PcaModel model;
    PcaSolver solver_used = PcaSolver::Direct;
    // Every positive eigenvalue found, before retention.
    std::vector<double> spectrum;
    std::size_t rank = 0;
};

// Auto takes the Gram path when d > 4n and the direct path otherwise.
PcaFit fit_pca_detailed(const Matrix& x, Retention retention, PcaSolver solver = PcaSolver::Auto);
PcaModel fit_pca(const Matrix& x, Retention retention, PcaSolver solver = PcaSolver::Auto);

Matrix project(const PcaModel& model, const Matrix& x);
std::vector<double> project(const PcaModel& model, std::span<const double> x);

// Scores back to the input space: unstandardize(scores * components).
Matrix reconstruct(const PcaModel& model, const Matrix& scores);

struct ExplainedVariance {
    std::size_t component;
    double fraction;
    double cumulative;
};

std::vector<ExplainedVariance> explained_variance(const PcaModel& model);

}  // namespace faceclust
