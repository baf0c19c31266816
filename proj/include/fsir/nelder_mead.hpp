#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace fsir {

struct SimplexOptions {
    std::size_t max_evals = 0;   ///< hard budget; 0 means 500 * dimension
    double diameter_tol = 1e-6;  ///< stop when max vertex distance to best falls below
    double initial_step = 0.1;   ///< per-coordinate offset for the starting simplex
    bool restart = true;         ///< re-seed a fresh simplex at the incumbent while budget remains
};

struct SimplexResult {
    std::vector<double> x;
    double value = std::numeric_limits<double>::infinity();
    std::size_t evals = 0;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Derivative-free Nelder-Mead simplex descent. The objective may return
/// +infinity for infeasible points. Deterministic: ties in the vertex
/// ordering are broken by insertion order (stable sort), so the same start
/// always yields the same result. The best vertex never worsens, hence the
/// returned value is never above the value at the start point.
template <class F>
SimplexResult nelder_mead(F&& f, const std::vector<double>& x0, const SimplexOptions& opts = {}) {
    const std::size_t dim = x0.size();
    const std::size_t max_evals = opts.max_evals ? opts.max_evals : 500 * dim;

    SimplexResult res;
    res.x = x0;

    auto eval = [&](const std::vector<double>& x) {
        ++res.evals;
        return f(x);
    };

    std::vector<std::vector<double>> pts;
    std::vector<double> vals;

    auto seed_simplex = [&](const std::vector<double>& center, double step) {
        pts.assign(1, center);
        for (std::size_t k = 0; k < dim; ++k) {
            auto p = center;
            p[k] += step;
            pts.push_back(std::move(p));
        }
        vals.assign(pts.size(), std::numeric_limits<double>::infinity());
        for (std::size_t i = 0; i < pts.size() && res.evals < max_evals; ++i)
            vals[i] = eval(pts[i]);
    };

    seed_simplex(x0, opts.initial_step);
    res.value = vals[0];

    double step = opts.initial_step;
    while (res.evals < max_evals) {
        // order vertices best-first; stable so exact ties keep insertion order
        std::vector<std::size_t> ord(pts.size());
        std::iota(ord.begin(), ord.end(), std::size_t{0});
        std::stable_sort(ord.begin(), ord.end(),
                         [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        std::vector<std::vector<double>> p2;
        std::vector<double> v2;
        for (std::size_t i : ord) {
            p2.push_back(pts[i]);
            v2.push_back(vals[i]);
        }
        pts.swap(p2);
        vals.swap(v2);

        double diam = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i)
            for (std::size_t k = 0; k < dim; ++k)
                diam = std::max(diam, std::abs(pts[i][k] - pts[0][k]));
        if (diam < opts.diameter_tol) {
            res.converged = true;
            if (!opts.restart || res.evals + 2 * (dim + 1) > max_evals) break;
            // restart around the incumbent with a smaller simplex; keeps
            // monotonicity since the incumbent stays a vertex
            step *= 0.5;
            if (step < opts.diameter_tol * 10.0) break;
            seed_simplex(pts[0], step);
            continue;
        }

        ++res.iterations;

        std::vector<double> centroid(dim, 0.0);
        for (std::size_t i = 0; i + 1 < pts.size(); ++i)
            for (std::size_t k = 0; k < dim; ++k)
                centroid[k] += pts[i][k];
        for (double& c : centroid) c /= static_cast<double>(pts.size() - 1);

        auto blend = [&](double t) {
            std::vector<double> p(dim);
            for (std::size_t k = 0; k < dim; ++k)
                p[k] = centroid[k] + t * (centroid[k] - pts.back()[k]);
            return p;
        };

        auto xr = blend(1.0); // reflection
        const double fr = eval(xr);
        if (fr < vals[0]) {
            auto xe = blend(2.0); // expansion
            const double fe = res.evals < max_evals ? eval(xe) : std::numeric_limits<double>::infinity();
            if (fe < fr) {
                pts.back() = std::move(xe);
                vals.back() = fe;
            } else {
                pts.back() = std::move(xr);
                vals.back() = fr;
            }
        } else if (fr < vals[vals.size() - 2]) {
            pts.back() = std::move(xr);
            vals.back() = fr;
        } else {
            const bool outside = fr < vals.back();
            auto xc = blend(outside ? 0.5 : -0.5); // contraction
            const double fc = res.evals < max_evals ? eval(xc) : std::numeric_limits<double>::infinity();
            if (fc < (outside ? fr : vals.back())) {
                pts.back() = std::move(xc);
                vals.back() = fc;
            } else {
                // shrink toward the best vertex
                for (std::size_t i = 1; i < pts.size(); ++i) {
                    for (std::size_t k = 0; k < dim; ++k)
                        pts[i][k] = pts[0][k] + 0.5 * (pts[i][k] - pts[0][k]);
                    if (res.evals >= max_evals) {
                        vals[i] = std::numeric_limits<double>::infinity();
                        continue;
                    }
                    vals[i] = eval(pts[i]);
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        if (vals[i] < vals[best]) best = i;
    res.x = pts[best];
    res.value = vals[best];
    return res;
}

} // namespace fsir
