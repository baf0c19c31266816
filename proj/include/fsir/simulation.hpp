#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fsir/curve.hpp"
#include "fsir/errors.hpp"
#include "fsir/fpca.hpp"
#include "fsir/index_model.hpp"
#include "fsir/multi_index.hpp"
#include "fsir/parallel.hpp"

namespace fsir {

enum class SimModel { I, II, III, IV, V, VI, VII, VIII, IX, X };

inline SimModel parse_sim_model(const std::string& id) {
    if (id == "i") return SimModel::I;
    if (id == "ii") return SimModel::II;
    if (id == "iii") return SimModel::III;
    if (id == "iv") return SimModel::IV;
    if (id == "v") return SimModel::V;
    if (id == "vi") return SimModel::VI;
    if (id == "vii") return SimModel::VII;
    if (id == "viii") return SimModel::VIII;
    if (id == "ix") return SimModel::IX;
    if (id == "x") return SimModel::X;
    throw std::invalid_argument("unknown simulation model id '" + id + "' (expected i..x)");
}

inline std::string sim_model_name(SimModel m) {
    switch (m) {
        case SimModel::I: return "i";
        case SimModel::II: return "ii";
        case SimModel::III: return "iii";
        case SimModel::IV: return "iv";
        case SimModel::V: return "v";
        case SimModel::VI: return "vi";
        case SimModel::VII: return "vii";
        case SimModel::VIII: return "viii";
        case SimModel::IX: return "ix";
        case SimModel::X: return "x";
    }
    return "?";
}

/// Number of additive index components in the generating model.
inline std::size_t sim_index_count(SimModel m) {
    switch (m) {
        case SimModel::VI:
        case SimModel::VII:
        case SimModel::VIII: return 2;
        case SimModel::IX:
        case SimModel::X: return 3;
        default: return 1;
    }
}

/// Everything needed to regenerate one synthetic dataset.
struct SimScenario {
    SimModel model = SimModel::I;
    std::size_t n = 200;
    double noise_ratio = 0.1; ///< ignored for models iv and v (intrinsic noise)
    std::uint64_t seed = 1;
    std::size_t grid_size = 50;
};

namespace detail {

inline std::vector<Curve> sim_eigenfunctions(const GridPtr& grid) {
    const double pi = std::numbers::pi;
    const double rt2 = std::sqrt(2.0);
    const std::size_t m = grid->size();
    std::vector<std::vector<double>> f(4, std::vector<double>(m));
    for (std::size_t j = 0; j < m; ++j) {
        const double t = grid->point(j);
        f[0][j] = rt2 * std::sin(2.0 * pi * t);
        f[1][j] = rt2 * std::cos(2.0 * pi * t);
        f[2][j] = rt2 * std::sin(4.0 * pi * t);
        f[3][j] = rt2 * std::cos(4.0 * pi * t);
    }
    std::vector<Curve> out;
    out.reserve(4);
    for (auto& v : f) out.emplace_back(grid, std::move(v));
    return out;
}

inline Curve combine(const GridPtr& grid, const std::vector<Curve>& phi,
                     const std::array<double, 4>& c) {
    std::vector<double> v(grid->size(), 0.0);
    for (std::size_t k = 0; k < 4; ++k)
        for (std::size_t j = 0; j < v.size(); ++j)
            v[j] += c[k] * phi[k][j];
    return Curve(grid, std::move(v));
}

inline double sample_variance(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return s / static_cast<double>(v.size() - 1);
}

} // namespace detail

/// True direction functions beta_1..beta_p of the generating model on a grid.
inline std::vector<Curve> true_betas(SimModel model, const GridPtr& grid) {
    const auto phi = detail::sim_eigenfunctions(grid);
    const double a = 1.0 / std::sqrt(3.0);
    const double b = 1.0 / std::sqrt(6.0);
    const Curve beta1 = detail::combine(grid, phi, {a, a, b, b});
    const Curve beta2 = detail::combine(grid, phi, {a, -a, -b, b});
    const Curve beta3 = detail::combine(grid, phi, {-a, a, b, b});
    switch (sim_index_count(model)) {
        case 1: return {beta1};
        case 2: return {beta1, beta2};
        default: return {beta1, beta2, beta3};
    }
}

/// Predictor curves X_i = mu + sum_k xi_ik phi_k with mu(t) = t and
/// xi_ik ~ N(0, lambda_k), lambda = (1, 1/2, 1/4, 1/8). Deterministic in the
/// scenario seed; responses are not set.
inline CurveSet generate_predictors(const SimScenario& scn) {
    if (scn.n < 2) throw std::invalid_argument("generate_predictors: n must be >= 2");
    const GridPtr grid = TimeGrid::equispaced(0.0, 1.0, scn.grid_size);
    const auto phi = detail::sim_eigenfunctions(grid);
    const std::array<double, 4> sd = {1.0, std::sqrt(0.5), std::sqrt(0.25), std::sqrt(0.125)};

    std::mt19937_64 rng(scn.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Curve> curves;
    curves.reserve(scn.n);
    const std::size_t m = grid->size();
    for (std::size_t i = 0; i < scn.n; ++i) {
        std::array<double, 4> xi{};
        for (std::size_t k = 0; k < 4; ++k) xi[k] = sd[k] * gauss(rng);
        std::vector<double> v(m);
        for (std::size_t j = 0; j < m; ++j) {
            double x = grid->point(j); // mu(t) = t
            for (std::size_t k = 0; k < 4; ++k) x += xi[k] * phi[k][j];
            v[j] = x;
        }
        curves.emplace_back(grid, std::move(v));
    }
    return CurveSet(grid, std::move(curves));
}

/// Noiseless regression surface g evaluated at the sample curves, with index
/// values taken by quadrature against the true beta curves so that generator
/// and estimator share one integration convention.
inline std::vector<double> true_signal(SimModel model, const CurveSet& data) {
    const auto betas = true_betas(model, data.grid());
    std::vector<std::vector<double>> z(betas.size(), std::vector<double>(data.size()));
    for (std::size_t j = 0; j < betas.size(); ++j)
        for (std::size_t i = 0; i < data.size(); ++i)
            z[j][i] = inner_product(betas[j], data.curve(i));

    std::vector<double> g(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        switch (model) {
            case SimModel::I: g[i] = std::cos(z[0][i]); break;
            case SimModel::II: g[i] = z[0][i] * z[0][i]; break;
            case SimModel::III: g[i] = z[0][i]; break;
            case SimModel::IV: g[i] = std::exp(2.0 + z[0][i]); break;
            case SimModel::V: g[i] = 0.5 * std::cos(2.0 * z[0][i]) + 0.5; break;
            case SimModel::VI: g[i] = std::cos(z[0][i]) + 0.5 * std::sin(z[1][i]); break;
            case SimModel::VII: g[i] = z[0][i] + std::exp(0.5 * z[1][i]); break;
            case SimModel::VIII: g[i] = z[0][i] + 0.5 * z[1][i] * z[1][i]; break;
            // the third summand of (ix) and all summands of (x) reuse the first index
            case SimModel::IX:
                g[i] = z[0][i] + std::exp(0.5 * z[1][i]) + 0.5 * z[0][i] * z[0][i];
                break;
            case SimModel::X:
                g[i] = z[0][i] + 0.5 * z[0][i] * z[0][i] +
                       0.25 * z[0][i] * z[0][i] * z[0][i];
                break;
        }
    }
    return g;
}

/// Responses per the generating model. Models iv and v draw from their
/// conditional distributions; the rest add Gaussian noise calibrated to
/// Var(eps) = R times the empirical variance of the signal.
inline std::vector<double> generate_response(SimModel model, const CurveSet& data, double R,
                                             std::uint64_t seed) {
    if (R < 0.0) throw std::invalid_argument("generate_response: noise ratio must be >= 0");
    const std::vector<double> signal = true_signal(model, data);
    // offset keeps the noise stream independent of the predictor stream
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL);
    std::vector<double> y(signal.size());

    if (model == SimModel::IV) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            std::poisson_distribution<long> pois(signal[i]); // mean exp(2 + z)
            y[i] = static_cast<double>(pois(rng));
        }
        return y;
    }
    if (model == SimModel::V) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] = unif(rng) < signal[i] ? 1.0 : 0.0;
        return y;
    }
    const double sigma = std::sqrt(R * detail::sample_variance(signal));
    if (sigma > 0.0) {
        std::normal_distribution<double> gauss(0.0, sigma);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = signal[i] + gauss(rng);
    } else {
        y = signal;
    }
    return y;
}

/// Root average squared error of predictions against the noiseless signal.
inline double rase(std::span<const double> predictions, std::span<const double> signal) {
    if (predictions.size() != signal.size() || predictions.empty())
        throw DimensionError("rase: prediction and signal lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double d = predictions[i] - signal[i];
        s += d * d;
    }
    return std::sqrt(s / static_cast<double>(predictions.size()));
}

/// Sign-aligned L2 distance between estimated and true direction functions.
inline double rse(const Curve& beta_hat, const Curve& beta_true) {
    require_same_grid(beta_hat, beta_true, "rse");
    const auto& w = beta_hat.grid()->weights();
    double plus = 0.0, minus = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
        const double dp = beta_hat[j] - beta_true[j];
        const double dm = beta_hat[j] + beta_true[j];
        plus += w[j] * dp * dp;
        minus += w[j] * dm * dm;
    }
    return std::sqrt(std::min(plus, minus));
}

struct McOptions {
    std::size_t runs = 20;    ///< desk-scale default; the reference studies used 100
    std::size_t k_max = 1;    ///< components fit and reported (RASE_k for k = 1..k_max)
    bool backfit = false;     ///< also report iterative backfitting results
    SmootherConfig smoother{SmootherKind::LocalConstant, 0.0, 0.1}; ///< bandwidth ignored; CV picks it
    std::size_t folds = 10;
    std::optional<double> fixed_h;        ///< with fixed_r: skip per-run CV
    std::optional<std::size_t> fixed_r;
    double backfit_tol = 0.01;
    std::size_t backfit_max_iter = 10;
    std::size_t r_max = 6; ///< eigenbasis size and top CV candidate
    IdentifiabilityMode mode = IdentifiabilityMode::Constrained;
    unsigned threads = 1;
};

struct McRun {
    bool failed = false;
    std::string error;
    std::vector<double> rase_recursive;    ///< k = 1..k_max
    std::vector<double> rase_backfit;      ///< empty unless backfitting requested
    std::vector<double> rse_recursive;     ///< component j vs true beta_j, j <= min(k_max, p)
    std::vector<double> rse_backfit;
    std::vector<double> selected_h;        ///< per component
    std::vector<std::size_t> selected_r;
};

struct McSummary {
    SimScenario scenario;
    std::size_t k_max = 1;
    bool backfit = false;
    std::size_t runs_completed = 0;
    std::size_t runs_failed = 0;
    std::vector<McRun> per_run;

    std::vector<double> collect_rase(bool from_backfit, std::size_t k) const {
        std::vector<double> v;
        for (const auto& run : per_run) {
            if (run.failed) continue;
            const auto& src = from_backfit ? run.rase_backfit : run.rase_recursive;
            if (k - 1 < src.size()) v.push_back(src[k - 1]);
        }
        return v;
    }
    std::vector<double> collect_rse(bool from_backfit, std::size_t j, bool squared) const {
        std::vector<double> v;
        for (const auto& run : per_run) {
            if (run.failed) continue;
            const auto& src = from_backfit ? run.rse_backfit : run.rse_recursive;
            if (j - 1 < src.size()) v.push_back(squared ? src[j - 1] * src[j - 1] : src[j - 1]);
        }
        return v;
    }
};

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : s / static_cast<double>(v.size());
}

inline double stderr_of(const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace detail {

inline McRun simulate_one_run(const SimScenario& scn, const McOptions& opt,
                              std::uint64_t run_seed, unsigned inner_threads) {
    McRun out;
    SimScenario run_scn = scn;
    run_scn.seed = run_seed;

    CurveSet predictors = generate_predictors(run_scn);
    std::vector<double> y = generate_response(scn.model, predictors, scn.noise_ratio, run_seed);
    const std::vector<double> signal = true_signal(scn.model, predictors);
    CurveSet data = predictors.with_responses(std::move(y));

    const std::size_t r_max =
        std::min({opt.r_max, data.size() - 1, data.grid()->size()});
    const Basis basis = estimate_eigenbasis(data, r_max);
    const auto betas = true_betas(scn.model, data.grid());

    Tuning tuning;
    tuning.fixed_h = opt.fixed_h;
    tuning.fixed_r = opt.fixed_r;
    tuning.folds = opt.folds;
    tuning.seed = run_seed;

    MultiIndexModel recursive =
        fit_recursive(data, basis, opt.k_max, tuning, opt.smoother, opt.mode, inner_threads);

    for (const auto& comp : recursive.components) {
        out.selected_h.push_back(comp.smoother.bandwidth);
        out.selected_r.push_back(comp.rank());
    }
    for (std::size_t k = 1; k <= opt.k_max; ++k) {
        const auto cum = training_loo_predictions(recursive, k);
        out.rase_recursive.push_back(rase(cum, signal));
    }
    const std::size_t p_true = sim_index_count(scn.model);
    for (std::size_t j = 0; j < std::min(p_true, recursive.components.size()); ++j)
        out.rse_recursive.push_back(rse(recursive.components[j].beta_curve, betas[j]));

    if (opt.backfit) {
        for (std::size_t k = 1; k <= opt.k_max; ++k) {
            MultiIndexModel prefix;
            prefix.components.assign(recursive.components.begin(),
                                     recursive.components.begin() + static_cast<long>(k));
            MultiIndexModel refined =
                backfit(data, basis, prefix, opt.smoother, opt.backfit_tol, opt.backfit_max_iter);
            const auto cum = training_loo_predictions(refined, k);
            out.rase_backfit.push_back(rase(cum, signal));
            if (k == std::min(p_true, opt.k_max)) {
                for (std::size_t j = 0; j < refined.components.size(); ++j)
                    out.rse_backfit.push_back(rse(refined.components[j].beta_curve, betas[j]));
            }
        }
    }
    return out;
}

} // namespace detail

/// Monte Carlo study over independent replications; run j (0-based) uses
/// seed = scenario seed + j, so the whole summary is reproducible. RASE is
/// computed against the true noiseless signal with leave-one-out link
/// predictions at the sample curves. Failed runs are recorded and excluded
/// from the aggregates.
inline McSummary monte_carlo(const SimScenario& scn, const McOptions& opt) {
    if (opt.runs < 1) throw std::invalid_argument("monte_carlo: runs must be >= 1");
    if (opt.k_max < 1) throw std::invalid_argument("monte_carlo: k_max must be >= 1");

    McSummary summary;
    summary.scenario = scn;
    summary.k_max = opt.k_max;
    summary.backfit = opt.backfit;
    summary.per_run.resize(opt.runs);

    const unsigned outer = static_cast<unsigned>(
        std::min<std::size_t>(opt.threads ? opt.threads : 1, opt.runs));
    const unsigned inner = std::max(1u, (opt.threads ? opt.threads : 1) / outer);

    parallel_for(opt.runs, outer, [&](std::size_t j) {
        try {
            summary.per_run[j] = detail::simulate_one_run(scn, opt, scn.seed + j, inner);
        } catch (const std::exception& e) {
            summary.per_run[j].failed = true;
            summary.per_run[j].error = e.what();
        }
    });

    for (const auto& run : summary.per_run)
        run.failed ? ++summary.runs_failed : ++summary.runs_completed;
    if (summary.runs_completed == 0)
        throw FitError("monte_carlo: every run failed; first error: " +
                       summary.per_run.front().error);
    return summary;
}

} // namespace fsir
