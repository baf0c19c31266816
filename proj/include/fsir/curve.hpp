#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "fsir/errors.hpp"

namespace fsir {

/// Shared sampling grid: strictly increasing time points with cached
/// trapezoid quadrature weights. Immutable after construction.
class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> points) : points_(std::move(points)) {
        if (points_.size() < 2)
            throw DimensionError("TimeGrid needs at least 2 points");
        for (std::size_t i = 0; i + 1 < points_.size(); ++i)
            if (!(points_[i] < points_[i + 1]))
                throw std::invalid_argument("TimeGrid points must be strictly increasing");
        weights_.resize(points_.size());
        weights_.front() = 0.5 * (points_[1] - points_[0]);
        weights_.back() = 0.5 * (points_[points_.size() - 1] - points_[points_.size() - 2]);
        for (std::size_t i = 1; i + 1 < points_.size(); ++i)
            weights_[i] = 0.5 * (points_[i + 1] - points_[i - 1]);
    }

    static std::shared_ptr<const TimeGrid> equispaced(double a, double b, std::size_t n) {
        std::vector<double> pts(n);
        for (std::size_t i = 0; i < n; ++i)
            pts[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
        return std::make_shared<const TimeGrid>(std::move(pts));
    }

    std::size_t size() const { return points_.size(); }
    double point(std::size_t i) const { return points_[i]; }
    const std::vector<double>& points() const { return points_; }
    double weight(std::size_t i) const { return weights_[i]; }
    const std::vector<double>& weights() const { return weights_; }
    double domain_length() const { return points_.back() - points_.front(); }

    bool same_as(const TimeGrid& other) const {
        if (this == &other) return true;
        return points_ == other.points_;
    }

private:
    std::vector<double> points_;
    std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

/// A function sampled on a TimeGrid. Value type; transforms return new curves.
class Curve {
public:
    Curve() = default;
    Curve(GridPtr grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (!grid_) throw std::invalid_argument("Curve needs a grid");
        if (values_.size() != grid_->size())
            throw DimensionError("Curve values length does not match grid");
        for (double v : values_)
            if (!std::isfinite(v)) throw std::invalid_argument("Curve values must be finite");
    }

    const GridPtr& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    const std::vector<double>& values() const { return values_; }

private:
    GridPtr grid_;
    std::vector<double> values_;
};

inline void require_same_grid(const Curve& a, const Curve& b, const char* where) {
    if (a.grid() == b.grid()) return;
    if (!a.grid() || !b.grid() || !a.grid()->same_as(*b.grid()))
        throw GridMismatchError(std::string(where) + ": curves are on different grids");
}

/// Trapezoid approximation of the L2 inner product on the shared grid.
inline double inner_product(const Curve& a, const Curve& b) {
    require_same_grid(a, b, "inner_product");
    const auto& w = a.grid()->weights();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        s += w[i] * a[i] * b[i];
    return s;
}

inline double l2_norm_sq(const Curve& a) { return inner_product(a, a); }

inline double l2_distance(const Curve& a, const Curve& b) {
    require_same_grid(a, b, "l2_distance");
    const auto& w = a.grid()->weights();
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double d = a[i] - b[i];
        s += w[i] * d * d;
    }
    return std::sqrt(s);
}

/// Shift a curve so that its integral over the domain is zero.
inline Curve normalize_area(const Curve& c) {
    const auto& w = c.grid()->weights();
    double area = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        area += w[i] * c[i];
    const double level = area / c.grid()->domain_length();
    std::vector<double> v(c.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = c[i] - level;
    return Curve(c.grid(), std::move(v));
}

/// Sample of curves on a common grid, optionally paired with scalar responses.
class CurveSet {
public:
    CurveSet(GridPtr grid, std::vector<Curve> curves,
             std::optional<std::vector<double>> responses = std::nullopt)
        : grid_(std::move(grid)), curves_(std::move(curves)), responses_(std::move(responses)) {
        if (curves_.empty()) throw DimensionError("CurveSet needs at least one curve");
        for (const auto& c : curves_)
            if (c.grid() != grid_ && !c.grid()->same_as(*grid_))
                throw GridMismatchError("CurveSet: curve grid differs from set grid");
        if (responses_ && responses_->size() != curves_.size())
            throw DimensionError("CurveSet: responses length does not match curve count");
    }

    const GridPtr& grid() const { return grid_; }
    std::size_t size() const { return curves_.size(); }
    const Curve& curve(std::size_t i) const { return curves_[i]; }
    const std::vector<Curve>& curves() const { return curves_; }
    bool has_responses() const { return responses_.has_value(); }
    const std::vector<double>& responses() const {
        if (!responses_) throw std::logic_error("CurveSet has no responses");
        return *responses_;
    }

    /// Same curves with replaced responses (used for residual refits).
    CurveSet with_responses(std::vector<double> y) const {
        return CurveSet(grid_, curves_, std::move(y));
    }

    /// Row subset in the given index order.
    CurveSet subset(const std::vector<std::size_t>& rows) const {
        std::vector<Curve> cs;
        cs.reserve(rows.size());
        for (std::size_t r : rows) cs.push_back(curves_.at(r));
        std::optional<std::vector<double>> ys;
        if (responses_) {
            ys.emplace();
            ys->reserve(rows.size());
            for (std::size_t r : rows) ys->push_back((*responses_)[r]);
        }
        return CurveSet(grid_, std::move(cs), std::move(ys));
    }

    CurveSet normalized_area() const {
        std::vector<Curve> cs;
        cs.reserve(curves_.size());
        for (const auto& c : curves_) cs.push_back(normalize_area(c));
        return CurveSet(grid_, std::move(cs), responses_);
    }

private:
    GridPtr grid_;
    std::vector<Curve> curves_;
    std::optional<std::vector<double>> responses_;
};

} // namespace fsir
