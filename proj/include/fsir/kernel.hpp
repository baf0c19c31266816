#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "fsir/errors.hpp"

namespace fsir {

/// Epanechnikov kernel, 0.75*(1-u^2) on [-1,1].
inline double epanechnikov(double u) {
    const double a = std::abs(u);
    return a < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
}

enum class SmootherKind { LocalConstant, LocalLinear };

struct SmootherConfig {
    SmootherKind kind = SmootherKind::LocalConstant;
    double bandwidth = 0.0;
    double lambda = 0.1; ///< minimum leave-one-out kernel mass; points below it are dropped

    void validate() const {
        if (!(bandwidth > 0.0)) throw std::invalid_argument("SmootherConfig: bandwidth must be > 0");
        if (!(lambda >= 0.0)) throw std::invalid_argument("SmootherConfig: lambda must be >= 0");
    }
};

/// Leave-one-out fitted values at the training index values. Dropped entries
/// (kernel mass below lambda, or a degenerate local-linear window) hold NaN.
struct LooFit {
    std::vector<double> predictions;
    std::vector<char> dropped;
    std::vector<double> slopes; ///< local-linear only, on the index scale
    std::size_t dropped_count = 0;
};

namespace detail {

// Order that sorts z ascending with index as tie-break; deterministic.
inline std::vector<std::size_t> sort_order(std::span<const double> z) {
    std::vector<std::size_t> idx(z.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (z[a] != z[b]) return z[a] < z[b];
        return a < b;
    });
    return idx;
}

} // namespace detail

/// Leave-one-out smoother over scalar index values. For each j the fit uses
/// kernel weights K{(z_i - z_j)/h} over i != j; windows are located through a
/// sorted sweep so the cost is n times the typical window size.
inline LooFit loo_fit(std::span<const double> z, std::span<const double> y,
                      const SmootherConfig& cfg) {
    cfg.validate();
    const std::size_t n = z.size();
    if (n < 2 || y.size() != n)
        throw DimensionError("loo_fit: need z and y of equal length >= 2");

    const double h = cfg.bandwidth;
    const bool linear = cfg.kind == SmootherKind::LocalLinear;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    LooFit fit;
    fit.predictions.assign(n, nan);
    fit.dropped.assign(n, 0);
    if (linear) fit.slopes.assign(n, nan);

    const auto order = detail::sort_order(z);
    std::vector<double> zs(n), ys(n);
    for (std::size_t k = 0; k < n; ++k) {
        zs[k] = z[order[k]];
        ys[k] = y[order[k]];
    }

    std::size_t lo = 0, hi = 0;
    for (std::size_t jj = 0; jj < n; ++jj) {
        const double zj = zs[jj];
        while (lo < n && zs[lo] <= zj - h) ++lo;
        while (hi < n && zs[hi] < zj + h) ++hi;

        double s0 = 0.0, sy = 0.0, sd = 0.0, sdd = 0.0, sdy = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            if (i == jj) continue;
            const double d = zs[i] - zj;
            const double k = epanechnikov(d / h);
            s0 += k;
            sy += k * ys[i];
            if (linear) {
                sd += k * d;
                sdd += k * d * d;
                sdy += k * d * ys[i];
            }
        }

        const std::size_t j = order[jj];
        if (!(s0 > 0.0) || s0 < cfg.lambda) {
            fit.dropped[j] = 1;
            ++fit.dropped_count;
            continue;
        }
        const double ybar = sy / s0;
        if (!linear) {
            fit.predictions[j] = ybar;
            continue;
        }
        const double m = sd / s0;           // kernel-weighted mean of z - z_j
        const double denom = sdd - sd * m;  // sum K (d - m)^2
        if (!(denom > 0.0)) {
            fit.dropped[j] = 1; // degenerate window, never divide by zero
            ++fit.dropped_count;
            continue;
        }
        const double slope = (sdy - m * sy) / denom;
        fit.predictions[j] = ybar - slope * m; // value at z_j
        fit.slopes[j] = slope;
    }
    return fit;
}

/// Link function estimate at a query point u from all n training pairs.
/// Returns nullopt when the kernel window at u is empty; a degenerate
/// local-linear window falls back to the local-constant value.
inline std::optional<double> link_evaluate(double u, std::span<const double> z,
                                           std::span<const double> y,
                                           const SmootherConfig& cfg) {
    cfg.validate();
    const std::size_t n = z.size();
    if (n == 0 || y.size() != n)
        throw DimensionError("link_evaluate: need nonempty z and y of equal length");

    const double h = cfg.bandwidth;
    double s0 = 0.0, sy = 0.0, sd = 0.0, sdd = 0.0, sdy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = z[i] - u;
        if (d <= -h || d >= h) continue;
        const double k = epanechnikov(d / h);
        s0 += k;
        sy += k * y[i];
        if (cfg.kind == SmootherKind::LocalLinear) {
            sd += k * d;
            sdd += k * d * d;
            sdy += k * d * y[i];
        }
    }
    if (!(s0 > 0.0)) return std::nullopt;
    const double ybar = sy / s0;
    if (cfg.kind == SmootherKind::LocalConstant) return ybar;
    const double m = sd / s0;
    const double denom = sdd - sd * m;
    if (!(denom > 0.0)) return ybar; // fall back to local constant at u
    const double slope = (sdy - m * sy) / denom;
    return ybar - slope * m;
}

} // namespace fsir
