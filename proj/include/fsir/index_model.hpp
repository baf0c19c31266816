#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fsir/curve.hpp"
#include "fsir/errors.hpp"
#include "fsir/fpca.hpp"
#include "fsir/kernel.hpp"
#include "fsir/nelder_mead.hpp"

namespace fsir {

struct FitReport {
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::size_t dropped = 0;     ///< points failing the lambda threshold at the optimum
    std::size_t evals = 0;       ///< objective evaluations spent by the optimizer
    std::size_t iterations = 0;  ///< simplex iterations
    std::vector<double> start;   ///< starting coefficients used
};

enum class IdentifiabilityMode {
    Constrained, ///< optimize with iterates projected to the unit sphere
    Rescale      ///< optimize unconstrained, then rescale (b, h) -> (b/|b|, h/|b|)
};

namespace detail {

/// Reusable evaluator of the leave-one-out least squares criterion
/// S(b) = (1/n') sum over kept j of (Y_j - loo prediction at z_j)^2,
/// where z = scores * b and n' counts points passing the lambda threshold.
/// Returns +infinity when every point is dropped. Not thread-safe; each
/// concurrent caller should own one instance.
class Criterion {
public:
    Criterion(const ScoreMatrix& scores, std::span<const double> y, const SmootherConfig& cfg)
        : scores_(scores), y_(y), cfg_(cfg) {
        cfg_.validate();
        const std::size_t n = scores.rows();
        if (y.size() != n) throw DimensionError("objective: scores and Y sizes differ");
        if (n < 2) throw DimensionError("objective: need at least 2 observations");
        z_.resize(n);
        order_.resize(n);
        zs_.resize(n);
        ys_.resize(n);
    }

    double operator()(std::span<const double> b) {
        evaluate(b);
        return value_;
    }

    double value() const { return value_; }
    std::size_t dropped() const { return dropped_; }

    void evaluate(std::span<const double> b) {
        const std::size_t n = scores_.rows();
        const std::size_t r = scores_.cols();
        if (b.size() != r) throw DimensionError("objective: coefficient length differs from r");
        for (std::size_t j = 0; j < n; ++j) {
            const double* row = scores_.row(j);
            double z = 0.0;
            for (std::size_t k = 0; k < r; ++k) z += b[k] * row[k];
            z_[j] = z;
        }
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t c) {
            if (z_[a] != z_[c]) return z_[a] < z_[c];
            return a < c;
        });
        for (std::size_t k = 0; k < n; ++k) {
            zs_[k] = z_[order_[k]];
            ys_[k] = y_[order_[k]];
        }

        const double h = cfg_.bandwidth;
        const bool linear = cfg_.kind == SmootherKind::LocalLinear;
        double sse = 0.0;
        std::size_t kept = 0;
        std::size_t lo = 0, hi = 0;
        for (std::size_t jj = 0; jj < n; ++jj) {
            const double zj = zs_[jj];
            while (lo < n && zs_[lo] <= zj - h) ++lo;
            while (hi < n && zs_[hi] < zj + h) ++hi;
            double s0 = 0.0, sy = 0.0, sd = 0.0, sdd = 0.0, sdy = 0.0;
            for (std::size_t i = lo; i < hi; ++i) {
                if (i == jj) continue;
                const double d = zs_[i] - zj;
                const double u = d / h;
                const double k = 0.75 * (1.0 - u * u); // in-window by construction
                s0 += k;
                sy += k * ys_[i];
                if (linear) {
                    sd += k * d;
                    sdd += k * d * d;
                    sdy += k * d * ys_[i];
                }
            }
            if (!(s0 > 0.0) || s0 < cfg_.lambda) continue;
            double pred;
            if (!linear) {
                pred = sy / s0;
            } else {
                const double m = sd / s0;
                const double denom = sdd - sd * m;
                if (!(denom > 0.0)) continue; // degenerate window: dropped
                const double slope = (sdy - m * sy) / denom;
                pred = sy / s0 - slope * m;
            }
            const double resid = ys_[jj] - pred;
            sse += resid * resid;
            ++kept;
        }
        dropped_ = n - kept;
        value_ = kept == 0 ? std::numeric_limits<double>::infinity()
                           : sse / static_cast<double>(kept);
    }

private:
    const ScoreMatrix& scores_;
    std::span<const double> y_;
    SmootherConfig cfg_;
    std::vector<double> z_;
    std::vector<std::size_t> order_;
    std::vector<double> zs_, ys_;
    double value_ = std::numeric_limits<double>::infinity();
    std::size_t dropped_ = 0;
};

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

/// Flip signs so the first nonzero coefficient is positive.
inline void apply_sign_rule(std::vector<double>& b) {
    for (double v : b) {
        if (v == 0.0) continue;
        if (v < 0.0)
            for (double& x : b) x = -x;
        return;
    }
}

} // namespace detail

/// Leave-one-out least squares criterion over basis coefficients.
/// Throws FitError when every point fails the lambda threshold, which
/// signals a bandwidth/lambda misconfiguration.
inline double objective(std::span<const double> b, const ScoreMatrix& scores,
                        std::span<const double> y, const SmootherConfig& cfg) {
    detail::Criterion crit(scores, y, cfg);
    const double s = crit(b);
    if (!std::isfinite(s))
        throw FitError("objective: every point was dropped (bandwidth/lambda too strict)");
    return s;
}

/// Coordinate-wise grid search for a starting point: b_1 over a grid on
/// [0,1] with the rest zero, then b_2 over [-1,1] holding b_1, and so on.
/// A stage whose finite values are all equal is non-informative and keeps
/// the coordinate at zero; if every stage is flat (or undefined) the search
/// falls back to e_1. Ties otherwise go to the smallest grid index.
inline std::vector<double> coordinate_grid_start(const ScoreMatrix& scores,
                                                 std::span<const double> y,
                                                 const SmootherConfig& cfg,
                                                 std::size_t grid_size = 21) {
    if (grid_size < 2) throw std::invalid_argument("coordinate_grid_start: grid_size must be >= 2");
    const std::size_t r = scores.cols();
    detail::Criterion crit(scores, y, cfg);
    std::vector<double> b(r, 0.0);
    bool any_informative = false;
    for (std::size_t k = 0; k < r; ++k) {
        const double lo = (k == 0) ? 0.0 : -1.0;
        const double hi = 1.0;
        double best_val = std::numeric_limits<double>::infinity();
        double best_coord = 0.0;
        double vmin = std::numeric_limits<double>::infinity();
        double vmax = -std::numeric_limits<double>::infinity();
        bool any_finite = false;
        for (std::size_t g = 0; g < grid_size; ++g) {
            const double coord =
                lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(grid_size - 1);
            b[k] = coord;
            const double v = crit(b);
            if (!std::isfinite(v)) continue;
            any_finite = true;
            vmin = std::min(vmin, v);
            vmax = std::max(vmax, v);
            if (v < best_val) {
                best_val = v;
                best_coord = coord;
            }
        }
        if (!any_finite || vmin == vmax) {
            b[k] = 0.0; // non-informative stage; keep neutral value
            continue;
        }
        any_informative = true;
        b[k] = best_coord;
    }
    if (!any_informative) {
        std::fill(b.begin(), b.end(), 0.0);
        b[0] = 1.0;
        return b;
    }
    bool all_zero = true;
    for (double v : b) all_zero = all_zero && v == 0.0;
    if (all_zero) b[0] = 1.0;
    return b;
}

struct MinimizeResult {
    std::vector<double> coefficients; ///< unit norm, first nonzero coordinate positive
    double bandwidth = 0.0;           ///< cfg bandwidth, rescaled in Rescale mode
    FitReport report;
};

/// Simplex descent on the criterion under one of the two identifiability
/// options: Constrained evaluates every iterate projected to the unit
/// sphere; Rescale minimizes unconstrained and maps (b, h) to (b/|b|, h/|b|).
inline MinimizeResult minimize(std::vector<double> b0, const ScoreMatrix& scores,
                               std::span<const double> y, const SmootherConfig& cfg,
                               IdentifiabilityMode mode = IdentifiabilityMode::Constrained) {
    const std::size_t r = scores.cols();
    if (b0.size() != r) throw DimensionError("minimize: start length differs from r");
    for (double v : b0)
        if (!std::isfinite(v)) throw FitError("minimize: non-finite start point");

    detail::Criterion crit(scores, y, cfg);
    const bool constrained = mode == IdentifiabilityMode::Constrained;

    std::vector<double> start = b0;
    if (constrained) {
        const double nrm = detail::norm2(start);
        if (nrm > 0.0)
            for (double& v : start) v /= nrm;
        else {
            std::fill(start.begin(), start.end(), 0.0);
            start[0] = 1.0;
        }
    }

    std::vector<double> scratch(r);
    auto f = [&](const std::vector<double>& x) {
        if (!constrained) return crit(x);
        const double nrm = detail::norm2(x);
        if (!(nrm > 0.0)) return std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < r; ++k) scratch[k] = x[k] / nrm;
        return crit(scratch);
    };

    if (!std::isfinite(f(start)))
        throw FitError("minimize: objective not finite at the start point");

    SimplexOptions opts;
    opts.max_evals = 500 * r;
    auto sim = nelder_mead(f, start, opts);

    MinimizeResult out;
    out.report.evals = sim.evals + 1; // including the start check
    out.report.iterations = sim.iterations;
    out.report.start = std::move(b0);
    out.report.objective = sim.value;

    const double nrm = detail::norm2(sim.x);
    if (!(nrm > 0.0)) throw FitError("minimize: optimizer returned the zero vector");
    out.coefficients.resize(r);
    for (std::size_t k = 0; k < r; ++k) out.coefficients[k] = sim.x[k] / nrm;
    detail::apply_sign_rule(out.coefficients);
    out.bandwidth = constrained ? cfg.bandwidth : cfg.bandwidth / nrm;

    // dropped count at the optimum, under the bandwidth actually returned
    SmootherConfig final_cfg = cfg;
    final_cfg.bandwidth = out.bandwidth;
    detail::Criterion final_crit(scores, y, final_cfg);
    final_crit.evaluate(out.coefficients);
    out.report.objective = final_crit.value();
    out.report.dropped = final_crit.dropped();
    return out;
}

/// Fitted single-index component: direction coefficients over a stored basis
/// slice plus the training pairs that define the link estimate.
struct IndexModel {
    GridPtr grid;
    Curve mean;                        ///< centering curve for score computation
    std::vector<Curve> functions;      ///< first r basis functions
    std::vector<double> coefficients;  ///< unit norm, first nonzero positive
    SmootherConfig smoother;
    std::vector<double> training_index;   ///< z_j at the fitted direction
    std::vector<double> training_targets;
    Curve beta_curve;                  ///< cached sum of coefficient-weighted basis functions

    std::size_t rank() const { return coefficients.size(); }

    double index_of(const Curve& x) const {
        if (x.grid() != grid && !x.grid()->same_as(*grid))
            throw GridMismatchError("IndexModel: curve grid differs from model grid");
        const auto& w = grid->weights();
        double u = 0.0;
        for (std::size_t k = 0; k < functions.size(); ++k) {
            const Curve& psi = functions[k];
            double s = 0.0;
            for (std::size_t j = 0; j < w.size(); ++j)
                s += w[j] * psi[j] * (x[j] - mean[j]);
            u += coefficients[k] * s;
        }
        return u;
    }

    double training_target_mean() const {
        double s = 0.0;
        for (double v : training_targets) s += v;
        return s / static_cast<double>(training_targets.size());
    }
};

inline Curve combine_basis(const GridPtr& grid, const std::vector<Curve>& functions,
                           std::span<const double> coefficients) {
    std::vector<double> v(grid->size(), 0.0);
    for (std::size_t k = 0; k < functions.size(); ++k)
        for (std::size_t j = 0; j < v.size(); ++j)
            v[j] += coefficients[k] * functions[k][j];
    return Curve(grid, std::move(v));
}

inline IndexModel make_index_model(GridPtr grid, Curve mean, std::vector<Curve> functions,
                                   std::vector<double> coefficients, SmootherConfig smoother,
                                   std::vector<double> training_index,
                                   std::vector<double> training_targets) {
    if (functions.size() != coefficients.size())
        throw DimensionError("IndexModel: coefficient count differs from basis slice");
    if (training_index.size() != training_targets.size())
        throw DimensionError("IndexModel: training pairs length mismatch");
    smoother.validate();
    IndexModel m;
    m.grid = std::move(grid);
    m.mean = std::move(mean);
    m.functions = std::move(functions);
    m.coefficients = std::move(coefficients);
    m.smoother = smoother;
    m.training_index = std::move(training_index);
    m.training_targets = std::move(training_targets);
    m.beta_curve = combine_basis(m.grid, m.functions, m.coefficients);
    return m;
}

/// Full single-index fit: scores, coordinate-wise start, simplex descent,
/// then the training pairs for link evaluation are stored on the model.
inline std::pair<IndexModel, FitReport> fit_single_index(
    const CurveSet& data, const Basis& basis, double h, std::size_t r,
    const SmootherConfig& cfg, IdentifiabilityMode mode = IdentifiabilityMode::Constrained,
    std::size_t grid_size = 21) {
    if (data.size() < 3) throw DimensionError("fit_single_index: need at least 3 curves");
    if (r > basis.size()) throw DimensionError("fit_single_index: r exceeds basis size");
    if (!data.has_responses()) throw std::invalid_argument("fit_single_index: data has no responses");

    SmootherConfig fit_cfg = cfg;
    fit_cfg.bandwidth = h;
    fit_cfg.validate();

    const ScoreMatrix scores = project_scores(data, basis, r);
    const auto& y = data.responses();

    std::vector<double> b0 = coordinate_grid_start(scores, y, fit_cfg, grid_size);
    MinimizeResult min = minimize(std::move(b0), scores, y, fit_cfg, mode);

    std::vector<double> z(data.size());
    for (std::size_t j = 0; j < data.size(); ++j) {
        const double* row = scores.row(j);
        double s = 0.0;
        for (std::size_t k = 0; k < r; ++k) s += min.coefficients[k] * row[k];
        z[j] = s;
    }

    SmootherConfig model_cfg = fit_cfg;
    model_cfg.bandwidth = min.bandwidth;
    std::vector<Curve> funcs(basis.functions.begin(),
                             basis.functions.begin() + static_cast<long>(r));
    IndexModel model = make_index_model(basis.grid, basis.mean, std::move(funcs),
                                        min.coefficients, model_cfg, std::move(z),
                                        std::vector<double>(y.begin(), y.end()));
    return {std::move(model), std::move(min.report)};
}

struct Predictions {
    std::vector<double> values;
    std::vector<char> fallback; ///< 1 where the query was outside the link support
};

/// Link prediction for new curves; queries outside the kernel support return
/// the training-target mean (flagged).
inline Predictions predict(const IndexModel& model, const CurveSet& newdata) {
    Predictions out;
    out.values.reserve(newdata.size());
    out.fallback.reserve(newdata.size());
    const double fallback_value = model.training_target_mean();
    for (std::size_t i = 0; i < newdata.size(); ++i) {
        const double u = model.index_of(newdata.curve(i));
        const auto v = link_evaluate(u, model.training_index, model.training_targets, model.smoother);
        out.values.push_back(v ? *v : fallback_value);
        out.fallback.push_back(v ? 0 : 1);
    }
    return out;
}

/// Leave-one-out link predictions at the training points (pair j excluded
/// when predicting at z_j). The lambda threshold is an estimation-criterion
/// device and is not applied here; empty or degenerate windows fall back to
/// the training-target mean.
inline std::vector<double> training_loo_predictions(const IndexModel& model) {
    SmootherConfig cfg = model.smoother;
    cfg.lambda = 0.0;
    LooFit fit = loo_fit(model.training_index, model.training_targets, cfg);
    const double fallback_value = model.training_target_mean();
    std::vector<double> out(fit.predictions);
    for (std::size_t j = 0; j < out.size(); ++j)
        if (fit.dropped[j]) out[j] = fallback_value;
    return out;
}

} // namespace fsir
