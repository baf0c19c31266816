#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fsir/cross_validation.hpp"
#include "fsir/curve.hpp"
#include "fsir/errors.hpp"
#include "fsir/fpca.hpp"
#include "fsir/index_model.hpp"

namespace fsir {

/// Additive multi-index model: ordered components fit against successive
/// residuals, optionally refined by iterative backfitting.
struct MultiIndexModel {
    std::vector<IndexModel> components;
    std::size_t iterations_used = 0; ///< backfitting passes run
    bool converged = false;
    double final_delta = std::numeric_limits<double>::infinity(); ///< last |beta_1 change|

    std::size_t index_count() const { return components.size(); }
};

/// How each component's (h, r) is chosen during recursive fitting.
struct Tuning {
    std::optional<CvGrid> grid;          ///< explicit CV grid; default grid when absent
    std::optional<double> fixed_h;       ///< with fixed_r: skip CV entirely
    std::optional<std::size_t> fixed_r;
    std::size_t folds = 10;
    std::uint64_t seed = 0;

    bool fixed() const { return fixed_h.has_value() && fixed_r.has_value(); }
};

namespace detail {

inline ScoreMatrix component_scores(const IndexModel& component, const CurveSet& data) {
    const std::size_t n = data.size();
    const std::size_t r = component.rank();
    const auto& w = component.grid->weights();
    ScoreMatrix s(n, r);
    for (std::size_t i = 0; i < n; ++i) {
        const Curve& x = data.curve(i);
        for (std::size_t k = 0; k < r; ++k) {
            const Curve& psi = component.functions[k];
            double v = 0.0;
            for (std::size_t j = 0; j < w.size(); ++j)
                v += w[j] * psi[j] * (x[j] - component.mean[j]);
            s.at(i, k) = v;
        }
    }
    return s;
}

} // namespace detail

/// Recursive fitting: component k is a full single-index fit (CV tuning plus
/// criterion minimization) against the residuals of components 1..k-1, with
/// residuals formed from leave-one-out link predictions at the training
/// points. Components are nested: refitting with larger p extends the list.
inline MultiIndexModel fit_recursive(const CurveSet& data, const Basis& basis, std::size_t p,
                                     const Tuning& tuning, const SmootherConfig& cfg,
                                     IdentifiabilityMode mode = IdentifiabilityMode::Constrained,
                                     unsigned threads = 1,
                                     std::vector<CvResult>* cv_out = nullptr) {
    if (p < 1) throw std::invalid_argument("fit_recursive: p must be >= 1");
    if (!data.has_responses()) throw std::invalid_argument("fit_recursive: data has no responses");

    MultiIndexModel model;
    std::vector<double> residual = data.responses();
    for (std::size_t k = 0; k < p; ++k) {
        CurveSet current = data.with_responses(residual);
        double h = 0.0;
        std::size_t r = 0;
        try {
            if (tuning.fixed()) {
                h = *tuning.fixed_h;
                r = *tuning.fixed_r;
            } else {
                CvGrid grid = tuning.grid
                                  ? *tuning.grid
                                  : default_cv_grid(data, basis, tuning.folds, tuning.seed);
                CvResult cv = select_tuning(current, basis, grid, cfg, threads);
                h = cv.selected_h();
                r = cv.selected_r();
                if (cv_out) cv_out->push_back(std::move(cv));
            }
            model.components.push_back(
                fit_single_index(current, basis, h, r, cfg, mode).first);
        } catch (const FitError& e) {
            throw FitError("fit_recursive: component " + std::to_string(k + 1) + " of " +
                           std::to_string(p) + " failed after " +
                           std::to_string(model.components.size()) +
                           " fitted components: " + e.what());
        }
        const std::vector<double> preds = training_loo_predictions(model.components.back());
        for (std::size_t i = 0; i < residual.size(); ++i)
            residual[i] -= preds[i];
    }
    return model;
}

/// Iterative backfitting refinement (partial residuals against all other
/// components). Tuning (h, r) stays fixed per component; only coefficients,
/// index values and targets are updated. Convergence is monitored on the
/// first component's beta curve.
inline MultiIndexModel backfit(const CurveSet& data, const Basis& basis,
                               const MultiIndexModel& initial, const SmootherConfig& cfg,
                               double tol = 0.01, std::size_t max_iter = 10) {
    (void)basis; // components carry their own basis slices
    if (initial.components.empty())
        throw std::invalid_argument("backfit: initial model has no components");
    if (!data.has_responses()) throw std::invalid_argument("backfit: data has no responses");

    MultiIndexModel model = initial;
    if (max_iter == 0) return model;

    const std::size_t p = model.components.size();
    const auto& y = data.responses();
    const std::size_t n = data.size();

    // score matrices are fixed across passes (directions move, bases do not)
    std::vector<ScoreMatrix> scores;
    scores.reserve(p);
    for (const auto& c : model.components)
        scores.push_back(detail::component_scores(c, data));

    // cache per-component LOO predictions at the current state
    std::vector<std::vector<double>> preds(p);
    for (std::size_t k = 0; k < p; ++k)
        preds[k] = training_loo_predictions(model.components[k]);

    for (std::size_t d = 1; d <= max_iter; ++d) {
        const Curve beta1_prev = model.components[0].beta_curve;
        for (std::size_t k = 0; k < p; ++k) {
            std::vector<double> partial(y.begin(), y.end());
            for (std::size_t j = 0; j < p; ++j) {
                if (j == k) continue;
                for (std::size_t i = 0; i < n; ++i) partial[i] -= preds[j][i];
            }
            IndexModel& comp = model.components[k];
            SmootherConfig comp_cfg = comp.smoother;
            MinimizeResult min =
                minimize(comp.coefficients, scores[k], partial, comp_cfg,
                         IdentifiabilityMode::Constrained);
            std::vector<double> z(n);
            for (std::size_t i = 0; i < n; ++i) {
                const double* row = scores[k].row(i);
                double s = 0.0;
                for (std::size_t q = 0; q < comp.rank(); ++q) s += min.coefficients[q] * row[q];
                z[i] = s;
            }
            comp = make_index_model(comp.grid, comp.mean, comp.functions, min.coefficients,
                                    comp_cfg, std::move(z), std::move(partial));
            preds[k] = training_loo_predictions(comp);
        }
        model.iterations_used = d;
        model.final_delta = l2_distance(beta1_prev, model.components[0].beta_curve);
        if (model.final_delta < tol) {
            model.converged = true;
            break;
        }
    }
    return model;
}

/// Sum of component predictions; the fallback flag is set when any component
/// fell back to its training-target mean for that curve.
inline Predictions predict_multi(const MultiIndexModel& model, const CurveSet& newdata) {
    Predictions out;
    out.values.assign(newdata.size(), 0.0);
    out.fallback.assign(newdata.size(), 0);
    for (const auto& comp : model.components) {
        Predictions part = predict(comp, newdata);
        for (std::size_t i = 0; i < newdata.size(); ++i) {
            out.values[i] += part.values[i];
            out.fallback[i] = out.fallback[i] || part.fallback[i];
        }
    }
    return out;
}

/// Cumulative leave-one-out training predictions of the first k components.
inline std::vector<double> training_loo_predictions(const MultiIndexModel& model,
                                                    std::size_t k) {
    if (k > model.components.size())
        throw DimensionError("training_loo_predictions: k exceeds component count");
    std::vector<double> out(model.components.empty()
                                ? 0
                                : model.components[0].training_index.size(),
                            0.0);
    for (std::size_t j = 0; j < k; ++j) {
        const auto part = training_loo_predictions(model.components[j]);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += part[i];
    }
    return out;
}

} // namespace fsir
