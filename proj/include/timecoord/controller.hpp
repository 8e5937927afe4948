#pragma once

#include <Eigen/Dense>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "timecoord/bezier.hpp"

namespace timecoord {

/// Gains of the distributed coordination law. epsilon regularizes the
/// path-following coupling; the convergence analysis asks for
/// epsilon > v_max - v_min (sufficient, not necessary).
struct CoordinationGains {
    double a = 0.0;        // consensus gain, 1/s^2
    double b = 0.0;        // damping gain, 1/s
    double epsilon = 0.0;  // coupling regularizer, m/s

    void validate() const {
        if (!(a > 0.0) || !(b > 0.0) || !(epsilon > 0.0))
            throw std::invalid_argument("CoordinationGains: a, b and epsilon must be > 0");
    }
};

/// Virtual time and its rate for one agent.
struct AgentCoordState {
    double gamma = 0.0;      // in [0, t_f]
    double gamma_dot = 0.0;  // nondecreasing progress requires >= 0
};

/// Signed coupling between path following and pacing: the projection of the
/// tracking error onto the desired velocity direction, with a regularized
/// speed norm. Positive when the vehicle precedes its desired point, which
/// accelerates the virtual time toward it.
inline double pf_coupling(const Eigen::Vector3d& p_dot_d, const Eigen::Vector3d& e_pf,
                          double epsilon) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("pf_coupling: epsilon must be > 0");
    return p_dot_d.dot(e_pf) / (p_dot_d.norm() + epsilon);
}

/// Second-order coordination law:
///   gamma_ddot = -b (gamma_dot - gamma_dot_d) - a sum_j (gamma - gamma_j) + coupling
/// using only the virtual times of in-neighbors.
inline double coordination_accel(const AgentCoordState& self, double gamma_dot_d,
                                 std::span<const double> neighbor_gammas, double coupling,
                                 const CoordinationGains& gains) {
    gains.validate();
    double disagreement = 0.0;
    for (const double gj : neighbor_gammas) disagreement += self.gamma - gj;
    return -gains.b * (self.gamma_dot - gamma_dot_d) - gains.a * disagreement + coupling;
}

struct GainReport {
    bool ok = true;
    std::vector<std::string> messages;
};

/// Checks the gains against the achievable-speed spread. The epsilon
/// condition is only sufficient, so falling short of it is reported as a
/// warning, not a failure.
inline GainReport validate_gains(const CoordinationGains& gains, double v_min, double v_max) {
    GainReport r;
    if (!(gains.a > 0.0)) { r.ok = false; r.messages.push_back("gain a must be > 0"); }
    if (!(gains.b > 0.0)) { r.ok = false; r.messages.push_back("gain b must be > 0"); }
    if (!(gains.epsilon > 0.0)) { r.ok = false; r.messages.push_back("epsilon must be > 0"); }
    if (!r.ok) return r;
    const double spread = v_max - v_min;
    if (!(gains.epsilon > spread))
        r.messages.push_back("warning: epsilon <= v_max - v_min (" + std::to_string(spread) +
                             "); the sufficient convergence condition does not hold");
    return r;
}

/// Convenience overload evaluating both v_min aggregation variants; adds a
/// note when they would change the epsilon verdict.
inline GainReport validate_gains(const CoordinationGains& gains, const SpeedBounds& sb) {
    GainReport r = validate_gains(gains, sb.v_min, sb.v_max);
    if (r.ok) {
        const bool with_default = gains.epsilon > sb.v_max - sb.v_min;
        const bool with_least = gains.epsilon > sb.v_max - sb.v_min_least;
        if (with_default != with_least)
            r.messages.push_back(
                "note: the two v_min aggregations disagree on the epsilon condition "
                "(max-of-minima vs min-of-minima)");
    }
    return r;
}

}  // namespace timecoord
