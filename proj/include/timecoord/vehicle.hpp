#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>

#include "timecoord/bezier.hpp"

namespace timecoord {

/// Velocity disturbance acting on the path-following error dynamics.
struct DisturbanceProfile {
    enum class Kind { None, ConstantBias, WindowedGust };

    Kind kind = Kind::None;
    Eigen::Vector3d vector = Eigen::Vector3d::Zero();       // m/s
    std::optional<std::pair<double, double>> window;        // (t_start, t_end), gust only

    void validate() const {
        if (kind == Kind::WindowedGust) {
            if (!window) throw std::invalid_argument("DisturbanceProfile: gust requires a window");
            if (!(window->first < window->second))
                throw std::invalid_argument("DisturbanceProfile: window must be ordered");
        }
    }

    Eigen::Vector3d at(double t) const {
        switch (kind) {
            case Kind::None: return Eigen::Vector3d::Zero();
            case Kind::ConstantBias: return vector;
            case Kind::WindowedGust:
                return (t >= window->first && t < window->second) ? vector
                                                                  : Eigen::Vector3d::Zero();
        }
        return Eigen::Vector3d::Zero();
    }
};

/// Per-agent kinematic state of the simplified path-following loop. The
/// tracking error obeys e_dot = -k_pf e + d(t), standing in for a full
/// geometric controller whose error converges exponentially.
struct VehicleState {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d pf_error = Eigen::Vector3d::Zero();
};

inline Eigen::Vector3d pf_error(const VehicleState& state, const BezierTrajectory& tr,
                                double gamma) {
    return state.position - tr.position(gamma);
}

namespace detail {
/// Exact flow of e_dot = -k e + d with d constant over a span of length h.
inline Eigen::Vector3d error_flow(const Eigen::Vector3d& e, double k, const Eigen::Vector3d& d,
                                  double h) {
    const double decay = std::exp(-k * h);
    return decay * e + ((1.0 - decay) / k) * d;
}
}  // namespace detail

/// Advances the error model over [t, t+dt] with the exact exponential map
/// (splitting at gust-window boundaries, where the input is discontinuous)
/// and re-anchors the position on the trajectory at gamma_next.
inline VehicleState step_vehicle(const VehicleState& state, const BezierTrajectory& tr,
                                 double gamma_next, double dt, double k_pf,
                                 const DisturbanceProfile& d, double t) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_vehicle: dt must be > 0");
    if (!(k_pf > 0.0)) throw std::invalid_argument("step_vehicle: k_pf must be > 0");

    Eigen::Vector3d e = state.pf_error;
    double cur = t;
    const double end = t + dt;
    if (d.kind == DisturbanceProfile::Kind::WindowedGust) {
        for (const double edge : {d.window->first, d.window->second}) {
            if (edge > cur && edge < end) {
                e = detail::error_flow(e, k_pf, d.at(cur), edge - cur);
                cur = edge;
            }
        }
    }
    e = detail::error_flow(e, k_pf, d.at(cur), end - cur);

    VehicleState next;
    next.pf_error = e;
    next.position = tr.position(gamma_next) + e;
    return next;
}

}  // namespace timecoord
