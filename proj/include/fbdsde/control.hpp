#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "fbdsde/errors.hpp"
#include "fbdsde/noise.hpp"

namespace fbdsde {

/// The control set U: a closed interval (possibly the whole line) or a finite set.
class ControlDomain {
public:
    static ControlDomain interval(double lo, double hi) {
        if (!(lo <= hi)) throw DomainError("control interval needs lo <= hi");
        ControlDomain u;
        u.lo_ = lo;
        u.hi_ = hi;
        return u;
    }
    static ControlDomain real_line() {
        return interval(-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity());
    }
    static ControlDomain finite(std::vector<double> points) {
        if (points.empty()) throw DomainError("finite control set is empty");
        ControlDomain u;
        u.points_ = std::move(points);
        return u;
    }

    bool is_finite() const { return !points_.empty(); }
    double lo() const { return lo_; }
    double hi() const { return hi_; }
    const std::vector<double>& points() const { return points_; }

    bool contains(double v) const {
        if (is_finite()) {
            for (double p : points_)
                if (p == v) return true;
            return false;
        }
        return v >= lo_ && v <= hi_;
    }

    /// Sampling rule: the set itself, or `count` equispaced points of a bounded interval.
    std::vector<double> sample(int count) const {
        if (is_finite()) return points_;
        if (!std::isfinite(lo_) || !std::isfinite(hi_))
            throw DomainError("cannot grid-sample an unbounded control interval");
        if (count < 2) return {0.5 * (lo_ + hi_)};
        std::vector<double> out(count);
        for (int i = 0; i < count; ++i) out[i] = lo_ + (hi_ - lo_) * i / (count - 1);
        return out;
    }

private:
    double lo_ = 0.0, hi_ = 0.0;
    std::vector<double> points_;
};

/// Control values on nodes 0..N.  Each node holds either one value (deterministic)
/// or one value per entry of the node's index space (a lattice node field or a path set).
class ControlPath {
public:
    ControlPath(std::vector<std::vector<double>> node_values, ControlDomain domain)
        : v_(std::move(node_values)), domain_(std::move(domain)) {
        if (v_.empty()) throw DomainError("control path has no nodes");
        for (const auto& row : v_) {
            if (row.empty()) throw DomainError("control path node is empty");
            for (double x : row)
                if (!domain_.contains(x)) throw DomainError("control value outside U: " + std::to_string(x));
        }
    }

    static ControlPath constant(const TimeGrid& grid, double v,
                                ControlDomain domain = ControlDomain::real_line()) {
        return ControlPath(std::vector<std::vector<double>>(grid.steps() + 1, {v}), std::move(domain));
    }
    static ControlPath deterministic(const TimeGrid& grid, const std::function<double(double)>& rule,
                                     ControlDomain domain = ControlDomain::real_line()) {
        std::vector<std::vector<double>> v(grid.steps() + 1);
        for (int k = 0; k <= grid.steps(); ++k) v[k] = {rule(grid.node(k))};
        return ControlPath(std::move(v), std::move(domain));
    }

    int steps() const { return static_cast<int>(v_.size()) - 1; }
    const ControlDomain& domain() const { return domain_; }
    bool is_deterministic_at(int k) const { return v_[k].size() == 1; }
    const std::vector<double>& node(int k) const { return v_[k]; }

    double value(int k, std::size_t i) const {
        const auto& row = v_[k];
        return row.size() == 1 ? row[0] : row[i];
    }

private:
    std::vector<std::vector<double>> v_;
    ControlDomain domain_;
};

/// v = rule(t, y): feedback on the forward state.
using FeedbackRule = std::function<double(double t, double y)>;

using ControlLaw = std::variant<ControlPath, FeedbackRule>;

inline double control_value(const ControlLaw& law, double t, int k, std::size_t i, double y) {
    if (const auto* path = std::get_if<ControlPath>(&law)) return path->value(k, i);
    return std::get<FeedbackRule>(law)(t, y);
}

}  // namespace fbdsde
