#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fsir/curve.hpp"
#include "fsir/errors.hpp"

namespace fsir {

/// Orthonormal basis (under the grid inner product) with the training mean
/// attached; scores are always computed from centered curves.
struct Basis {
    GridPtr grid;
    Curve mean;
    std::vector<Curve> functions;   // nonincreasing eigenvalue order
    std::vector<double> eigenvalues;

    std::size_t size() const { return functions.size(); }
};

/// Dense n x r score matrix, row i holding the coefficients of curve i.
class ScoreMatrix {
public:
    ScoreMatrix(std::size_t n, std::size_t r) : n_(n), r_(r), data_(n * r, 0.0) {}

    std::size_t rows() const { return n_; }
    std::size_t cols() const { return r_; }
    double& at(std::size_t i, std::size_t k) { return data_[i * r_ + k]; }
    double at(std::size_t i, std::size_t k) const { return data_[i * r_ + k]; }
    const double* row(std::size_t i) const { return data_.data() + i * r_; }

    ScoreMatrix truncated(std::size_t r) const {
        if (r > r_) throw DimensionError("ScoreMatrix: cannot widen truncation");
        ScoreMatrix out(n_, r);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t k = 0; k < r; ++k)
                out.at(i, k) = at(i, k);
        return out;
    }

    ScoreMatrix subset(const std::vector<std::size_t>& rows_idx) const {
        ScoreMatrix out(rows_idx.size(), r_);
        for (std::size_t i = 0; i < rows_idx.size(); ++i)
            for (std::size_t k = 0; k < r_; ++k)
                out.at(i, k) = at(rows_idx[i], k);
        return out;
    }

private:
    std::size_t n_, r_;
    std::vector<double> data_;
};

inline Curve estimate_mean(const CurveSet& data) {
    const std::size_t m = data.grid()->size();
    std::vector<double> v(m, 0.0);
    for (const auto& c : data.curves())
        for (std::size_t i = 0; i < m; ++i)
            v[i] += c[i];
    for (double& x : v) x /= static_cast<double>(data.size());
    return Curve(data.grid(), std::move(v));
}

/// Eigenfunctions of the empirical covariance of centered curves, discretized
/// with quadrature weights (eigenproblem of W^{1/2} C W^{1/2}). Each function
/// is sign-normalized so its entry of largest absolute value is positive,
/// which makes the basis deterministic for fixed data.
inline Basis estimate_eigenbasis(const CurveSet& data, std::size_t r_max) {
    const std::size_t n = data.size();
    const std::size_t m = data.grid()->size();
    if (r_max > std::min(n > 0 ? n - 1 : 0, m))
        throw DimensionError("estimate_eigenbasis: r_max exceeds min(n-1, grid length)");
    if (r_max == 0) throw DimensionError("estimate_eigenbasis: r_max must be positive");

    Curve mean = estimate_mean(data);

    Eigen::MatrixXd xc(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            xc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                data.curve(i)[j] - mean[j];

    const double denom = (n > 1) ? static_cast<double>(n - 1) : 1.0;
    Eigen::MatrixXd cov = (xc.transpose() * xc) / denom;

    Eigen::VectorXd sw(m);
    for (std::size_t j = 0; j < m; ++j)
        sw(static_cast<Eigen::Index>(j)) = std::sqrt(data.grid()->weight(j));
    Eigen::MatrixXd weighted = sw.asDiagonal() * cov * sw.asDiagonal();
    weighted = 0.5 * (weighted + weighted.transpose()); // enforce exact symmetry

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(weighted);
    if (solver.info() != Eigen::Success)
        throw FitError("estimate_eigenbasis: eigendecomposition failed");

    Basis basis;
    basis.grid = data.grid();
    basis.mean = std::move(mean);
    basis.functions.reserve(r_max);
    basis.eigenvalues.reserve(r_max);
    // Eigen returns ascending eigenvalues; take the top r_max in descending order.
    for (std::size_t k = 0; k < r_max; ++k) {
        const Eigen::Index col = static_cast<Eigen::Index>(m - 1 - k);
        double ev = solver.eigenvalues()(col);
        if (ev < -1e-10)
            throw FitError("estimate_eigenbasis: covariance eigenvalue below -1e-10");
        if (ev < 0.0) ev = 0.0;
        std::vector<double> psi(m);
        for (std::size_t j = 0; j < m; ++j)
            psi[j] = solver.eigenvectors()(static_cast<Eigen::Index>(j), col) /
                     sw(static_cast<Eigen::Index>(j));
        // sign rule: entry of largest absolute value positive, first such on ties
        std::size_t arg = 0;
        for (std::size_t j = 1; j < m; ++j)
            if (std::abs(psi[j]) > std::abs(psi[arg])) arg = j;
        if (psi[arg] < 0.0)
            for (double& v : psi) v = -v;
        basis.functions.emplace_back(data.grid(), std::move(psi));
        basis.eigenvalues.push_back(ev);
    }
    return basis;
}

/// Score of a single (already compatible) curve on basis function k.
inline double score_of(const Curve& x, const Basis& basis, std::size_t k) {
    const auto& w = basis.grid->weights();
    const Curve& psi = basis.functions[k];
    double s = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j)
        s += w[j] * psi[j] * (x[j] - basis.mean[j]);
    return s;
}

inline ScoreMatrix project_scores(const CurveSet& data, const Basis& basis, std::size_t r) {
    if (r > basis.size()) throw DimensionError("project_scores: r exceeds basis size");
    if (data.grid() != basis.grid && !data.grid()->same_as(*basis.grid))
        throw GridMismatchError("project_scores: data grid differs from basis grid");
    ScoreMatrix s(data.size(), r);
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t k = 0; k < r; ++k)
            s.at(i, k) = score_of(data.curve(i), basis, k);
    return s;
}

} // namespace fsir
