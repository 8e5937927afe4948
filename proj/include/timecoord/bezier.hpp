#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

namespace timecoord {

/// Bezier curve in R^3 parameterized by virtual time gamma in [0, t_f].
class BezierTrajectory {
  public:
    BezierTrajectory(std::vector<Eigen::Vector3d> control_points, double t_f)
        : control_points_(std::move(control_points)), t_f_(t_f) {
        if (control_points_.size() < 2)
            throw std::invalid_argument("BezierTrajectory: need at least two control points");
        if (!(t_f_ > 0.0)) throw std::invalid_argument("BezierTrajectory: t_f must be > 0");
    }

    int degree() const { return static_cast<int>(control_points_.size()) - 1; }
    double t_f() const { return t_f_; }
    const std::vector<Eigen::Vector3d>& control_points() const { return control_points_; }

    /// De Casteljau evaluation at parameter gamma / t_f.
    Eigen::Vector3d position(double gamma) const {
        return de_casteljau(control_points_, normalized(gamma));
    }

    /// Derivative with respect to gamma (units m per unit of virtual time).
    Eigen::Vector3d velocity(double gamma) const {
        const double u = normalized(gamma);
        const int d = degree();
        std::vector<Eigen::Vector3d> diff(control_points_.size() - 1);
        for (std::size_t k = 0; k + 1 < control_points_.size(); ++k)
            diff[k] = control_points_[k + 1] - control_points_[k];
        return (static_cast<double>(d) / t_f_) * de_casteljau(diff, u);
    }

  private:
    double normalized(double gamma) const {
        if (gamma < 0.0 || gamma > t_f_)
            throw std::out_of_range("BezierTrajectory: gamma outside [0, t_f]");
        return gamma / t_f_;
    }

    static Eigen::Vector3d de_casteljau(const std::vector<Eigen::Vector3d>& pts, double u) {
        std::vector<Eigen::Vector3d> w = pts;
        for (std::size_t level = w.size() - 1; level >= 1; --level)
            for (std::size_t k = 0; k < level; ++k) w[k] = (1.0 - u) * w[k] + u * w[k + 1];
        return w[0];
    }

    std::vector<Eigen::Vector3d> control_points_;
    double t_f_;
};

/// The n desired trajectories of a mission, sharing one duration.
struct TrajectorySet {
    std::vector<BezierTrajectory> trajectories;

    TrajectorySet() = default;
    explicit TrajectorySet(std::vector<BezierTrajectory> trs) : trajectories(std::move(trs)) {
        if (trajectories.empty())
            throw std::invalid_argument("TrajectorySet: at least one trajectory required");
        const double t_f = trajectories.front().t_f();
        for (const auto& tr : trajectories)
            if (tr.t_f() != t_f)
                throw std::invalid_argument("TrajectorySet: all trajectories must share t_f");
    }

    int size() const { return static_cast<int>(trajectories.size()); }
    double t_f() const { return trajectories.front().t_f(); }
};

/// Achievable-speed aggregates over a uniform virtual-time grid.
/// v_min uses the max-over-agents aggregation of the per-agent minima;
/// v_min_least is the min-over-agents variant (see validate_gains).
struct SpeedBounds {
    double v_max = 0.0;
    double v_min = 0.0;
    double v_min_least = 0.0;
    std::vector<double> per_agent_min;
    std::vector<double> per_agent_max;
};

inline SpeedBounds speed_bounds(const TrajectorySet& ts, int samples = 10000) {
    if (samples < 2) throw std::invalid_argument("speed_bounds: samples must be >= 2");
    SpeedBounds sb;
    const double t_f = ts.t_f();
    for (const auto& tr : ts.trajectories) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = 0.0;
        for (int k = 0; k < samples; ++k) {
            const double gamma = t_f * static_cast<double>(k) / (samples - 1);
            const double speed = tr.velocity(gamma).norm();
            lo = std::min(lo, speed);
            hi = std::max(hi, speed);
        }
        sb.per_agent_min.push_back(lo);
        sb.per_agent_max.push_back(hi);
    }
    sb.v_max = *std::max_element(sb.per_agent_max.begin(), sb.per_agent_max.end());
    sb.v_min = *std::max_element(sb.per_agent_min.begin(), sb.per_agent_min.end());
    sb.v_min_least = *std::min_element(sb.per_agent_min.begin(), sb.per_agent_min.end());
    return sb;
}

}  // namespace timecoord
