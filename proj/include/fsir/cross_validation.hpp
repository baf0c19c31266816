#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <vector>

#include "fsir/curve.hpp"
#include "fsir/errors.hpp"
#include "fsir/fpca.hpp"
#include "fsir/index_model.hpp"
#include "fsir/parallel.hpp"

namespace fsir {

struct CvGrid {
    std::vector<double> h_candidates;
    std::vector<std::size_t> r_candidates;
    std::size_t folds = 10;
    std::uint64_t seed = 0;
};

struct CvResult {
    struct Cell {
        std::size_t r;
        double h;
        double score;
    };
    std::vector<Cell> table; ///< row-major over (r, h) in candidate order
    std::size_t selected = 0;

    double selected_h() const { return table[selected].h; }
    std::size_t selected_r() const { return table[selected].r; }
    double selected_score() const { return table[selected].score; }
};

/// Disjoint cover of {0,...,n-1}: seeded Fisher-Yates shuffle, then
/// contiguous blocks whose sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds,
                                                        std::uint64_t seed) {
    if (folds < 2 || folds > n)
        throw std::invalid_argument("make_folds: need 2 <= folds <= n");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    for (std::size_t i = n - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
        std::swap(perm[i], perm[j]);
    }
    std::vector<std::vector<std::size_t>> out(folds);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < folds; ++f) {
        const std::size_t size = n / folds + (f < n % folds ? 1 : 0);
        out[f].assign(perm.begin() + static_cast<long>(pos),
                      perm.begin() + static_cast<long>(pos + size));
        pos += size;
    }
    return out;
}

namespace detail {

/// CV prediction error for one (h, r) cell over precomputed folds. A fold
/// whose fit fails scores the whole cell as +infinity.
inline double cv_score_cell(const CurveSet& data, const Basis& basis, double h, std::size_t r,
                            const SmootherConfig& cfg,
                            const std::vector<std::vector<std::size_t>>& folds) {
    const std::size_t n = data.size();
    const auto& y = data.responses();
    double total = 0.0;
    for (const auto& holdout : folds) {
        std::vector<char> held(n, 0);
        for (std::size_t i : holdout) held[i] = 1;
        std::vector<std::size_t> train_rows;
        train_rows.reserve(n - holdout.size());
        for (std::size_t i = 0; i < n; ++i)
            if (!held[i]) train_rows.push_back(i);

        CurveSet train = data.subset(train_rows);
        IndexModel model;
        try {
            model = fit_single_index(train, basis, h, r, cfg).first;
        } catch (const FitError&) {
            return std::numeric_limits<double>::infinity();
        }
        for (std::size_t i : holdout) {
            const double u = model.index_of(data.curve(i));
            const auto v = link_evaluate(u, model.training_index, model.training_targets,
                                         model.smoother);
            const double pred = v ? *v : model.training_target_mean();
            const double e = y[i] - pred;
            total += e * e;
        }
    }
    return total / static_cast<double>(n);
}

} // namespace detail

/// 10-fold (by default) cross-validated prediction error of one (h, r) pair.
/// The basis is taken as given (estimated once on the full data); each fold
/// refits only the index coefficients, as in the reference procedure.
inline double cv_score(const CurveSet& data, const Basis& basis, double h, std::size_t r,
                       const SmootherConfig& cfg, std::size_t folds, std::uint64_t seed) {
    if (!data.has_responses()) throw std::invalid_argument("cv_score: data has no responses");
    const auto fold_idx = make_folds(data.size(), folds, seed);
    return detail::cv_score_cell(data, basis, h, r, cfg, fold_idx);
}

/// Evaluate the full Cartesian (r, h) grid and pick the minimizer
/// (smallest table index on ties). Cells are independent and are evaluated
/// in parallel when threads > 1; the result does not depend on thread count.
inline CvResult select_tuning(const CurveSet& data, const Basis& basis, const CvGrid& grid,
                              const SmootherConfig& cfg, unsigned threads = 1) {
    if (grid.h_candidates.empty() || grid.r_candidates.empty())
        throw std::invalid_argument("select_tuning: empty candidate grid");
    if (!data.has_responses()) throw std::invalid_argument("select_tuning: data has no responses");

    const auto fold_idx = make_folds(data.size(), grid.folds, grid.seed);

    CvResult result;
    result.table.reserve(grid.r_candidates.size() * grid.h_candidates.size());
    for (std::size_t r : grid.r_candidates)
        for (double h : grid.h_candidates)
            result.table.push_back({r, h, std::numeric_limits<double>::infinity()});

    parallel_for(result.table.size(), threads, [&](std::size_t c) {
        auto& cell = result.table[c];
        cell.score = detail::cv_score_cell(data, basis, cell.h, cell.r, cfg, fold_idx);
    });

    std::size_t best = result.table.size();
    for (std::size_t c = 0; c < result.table.size(); ++c) {
        if (!std::isfinite(result.table[c].score)) continue;
        if (best == result.table.size() || result.table[c].score < result.table[best].score)
            best = c;
    }
    if (best == result.table.size())
        throw FitError("select_tuning: every grid point failed (all scores infinite)");
    result.selected = best;
    return result;
}

/// Default candidate grid: r in {1,...,6} (capped by the basis) and ten
/// log-spaced bandwidth multiples in [0.25, 4] of a pilot scale, the sample
/// standard deviation of first-component scores times n^{-1/5}.
inline CvGrid default_cv_grid(const CurveSet& data, const Basis& basis, std::size_t folds = 10,
                              std::uint64_t seed = 0) {
    const std::size_t n = data.size();
    ScoreMatrix s1 = project_scores(data, basis, 1);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += s1.at(i, 0);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = s1.at(i, 0) - mean;
        var += d * d;
    }
    var /= static_cast<double>(n > 1 ? n - 1 : 1);
    const double sd = std::sqrt(var);
    const double pilot = (sd > 0.0 ? sd : 1.0) * std::pow(static_cast<double>(n), -0.2);

    CvGrid grid;
    grid.folds = folds;
    grid.seed = seed;
    const std::size_t n_h = 10;
    for (std::size_t i = 0; i < n_h; ++i) {
        const double mult =
            0.25 * std::pow(16.0, static_cast<double>(i) / static_cast<double>(n_h - 1));
        grid.h_candidates.push_back(mult * pilot);
    }
    const std::size_t r_top = std::min<std::size_t>(6, basis.size());
    for (std::size_t r = 1; r <= r_top; ++r) grid.r_candidates.push_back(r);
    return grid;
}

} // namespace fsir
