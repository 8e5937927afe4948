#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "timecoord/bezier.hpp"
#include "timecoord/controller.hpp"
#include "timecoord/coordmath.hpp"
#include "timecoord/rk4.hpp"
#include "timecoord/topology.hpp"
#include "timecoord/vehicle.hpp"

namespace timecoord {

/// Piecewise-constant desired mission pace gamma_dot_d(t), right-continuous.
struct PaceProfile {
    struct Piece {
        double t_start = 0.0;
        double rate = 1.0;
    };
    std::vector<Piece> pieces{{0.0, 1.0}};

    void validate() const {
        if (pieces.empty()) throw std::invalid_argument("PaceProfile: at least one piece");
        if (pieces.front().t_start != 0.0)
            throw std::invalid_argument("PaceProfile: first piece must start at t = 0");
        for (std::size_t k = 0; k < pieces.size(); ++k) {
            if (pieces[k].rate < 0.0)
                throw std::invalid_argument("PaceProfile: rates must be >= 0");
            if (k > 0 && !(pieces[k].t_start > pieces[k - 1].t_start))
                throw std::invalid_argument("PaceProfile: piece starts must increase");
        }
    }

    double rate_at(double t) const {
        double r = pieces.front().rate;
        for (const auto& p : pieces) {
            if (p.t_start <= t) r = p.rate;
            else break;
        }
        return r;
    }

    double next_change_after(double t) const {
        for (const auto& p : pieces)
            if (p.t_start > t) return p.t_start;
        return std::numeric_limits<double>::infinity();
    }

    double max_rate_step() const {
        double m = 0.0;
        for (std::size_t k = 1; k < pieces.size(); ++k)
            m = std::max(m, std::abs(pieces[k].rate - pieces[k - 1].rate));
        return m;
    }
};

/// Per-vehicle configuration of the simplified path-following loop.
struct VehicleSpec {
    Eigen::Vector3d initial_pf_error = Eigen::Vector3d::Zero();
    double k_pf = 1.0;  // 1/s
    DisturbanceProfile disturbance;
};

/// Network quality-of-service parameters used by the connectivity check and
/// the convergence-bound calculators.
struct QoS {
    double window = 0.0;  // T, seconds
    double delta = 0.0;   // threshold, seconds, in (0, T]
};

struct Scenario {
    std::string name;
    TrajectorySet trajectories;
    DigraphSchedule schedule;
    CoordinationGains gains;
    std::vector<VehicleSpec> vehicles;
    Eigen::VectorXd gamma0;
    Eigen::VectorXd gamma_dot0;
    PaceProfile pace;
    double dt = 0.005;
    double t_end = 0.0;
    long seed = 0;  // recorded for reproducibility; the engine itself is deterministic
    QoS qos;

    int agent_count() const { return static_cast<int>(vehicles.size()); }
};

/// Validates a scenario and returns every violated precondition (empty when
/// the scenario is runnable).
inline std::vector<std::string> validate_scenario(const Scenario& sc) {
    std::vector<std::string> errors;
    const auto fail = [&errors](const std::string& m) { errors.push_back(m); };

    int n = sc.agent_count();
    if (n < 1) fail("at least one vehicle is required");
    if (sc.trajectories.trajectories.empty()) fail("at least one trajectory is required");
    if (!sc.trajectories.trajectories.empty() && sc.trajectories.size() != n)
        fail("trajectory count does not match vehicle count");

    try {
        sc.schedule.validate();
        if (sc.schedule.node_count() != n)
            fail("schedule node count does not match vehicle count");
        if (!(sc.dt > 0.0))
            fail("dt must be > 0");
        else if (sc.dt > sc.schedule.min_dwell() / 3.0 * (1.0 + 1e-12))
            fail("dt must be <= (smallest dwell)/3 so switches are never skipped");
        if (!sc.schedule.cycle && sc.t_end > sc.schedule.period() * (1.0 + 1e-12))
            fail("non-cycling schedule does not cover t_end");
    } catch (const std::exception& e) {
        fail(std::string("schedule: ") + e.what());
    }

    if (!(sc.t_end > 0.0)) fail("t_end must be > 0");
    try {
        sc.gains.validate();
    } catch (const std::exception& e) {
        fail(e.what());
    }
    try {
        sc.pace.validate();
    } catch (const std::exception& e) {
        fail(e.what());
    }
    for (std::size_t i = 0; i < sc.vehicles.size(); ++i) {
        if (!(sc.vehicles[i].k_pf > 0.0))
            fail("vehicle " + std::to_string(i) + ": k_pf must be > 0");
        try {
            sc.vehicles[i].disturbance.validate();
        } catch (const std::exception& e) {
            fail("vehicle " + std::to_string(i) + ": " + e.what());
        }
    }
    if (sc.gamma0.size() != n) fail("gamma0 must have one entry per vehicle");
    if (sc.gamma_dot0.size() != n) fail("gamma_dot0 must have one entry per vehicle");
    if (!sc.trajectories.trajectories.empty() && sc.gamma0.size() == n) {
        const double t_f = sc.trajectories.t_f();
        for (int i = 0; i < n; ++i)
            if (sc.gamma0(i) < 0.0 || sc.gamma0(i) > t_f)
                fail("gamma0[" + std::to_string(i) + "] outside [0, t_f]");
    }
    for (int i = 0; i < sc.gamma_dot0.size(); ++i)
        if (sc.gamma_dot0(i) < 0.0) fail("gamma_dot0[" + std::to_string(i) + "] must be >= 0");
    if (!(sc.qos.window > 0.0) || !(sc.qos.delta > 0.0) || sc.qos.delta > sc.qos.window)
        fail("qos must satisfy T > 0 and 0 < delta <= T");
    return errors;
}

class ScenarioValidationError : public std::runtime_error {
  public:
    explicit ScenarioValidationError(std::vector<std::string> errors)
        : std::runtime_error(join(errors)), errors_(std::move(errors)) {}
    const std::vector<std::string>& errors() const { return errors_; }

  private:
    static std::string join(const std::vector<std::string>& errors) {
        std::string s = "scenario validation failed:";
        for (const auto& e : errors) s += "\n  - " + e;
        return s;
    }
    std::vector<std::string> errors_;
};

struct SimEvent {
    enum class Kind { RateClamp, Saturation, PaceStep };
    Kind kind;
    double t = 0.0;
    int agent = -1;      // -1 for events without an agent
    double value = 0.0;  // new pace for PaceStep, otherwise unused
};

/// Uniformly spaced record of a run. Records are at t = k*dt for
/// k = 0..floor(t_end/dt).
struct SimLog {
    int n = 0;
    double dt = 0.0;
    std::vector<double> t;
    std::vector<Eigen::VectorXd> gamma;
    std::vector<Eigen::VectorXd> gamma_dot;
    std::vector<Eigen::VectorXd> accel;     // commanded gamma_ddot at the record time
    std::vector<Eigen::VectorXd> epf_norm;  // per-agent ||e_PF||
    std::vector<double> xi_norm;
    std::vector<int> segment;
    std::vector<SimEvent> events;

    std::size_t records() const { return t.size(); }
};

struct RunOptions {
    bool waive_connectivity = false;
};

namespace detail {

inline int grid_steps(double t_end, double dt) {
    return static_cast<int>(std::floor(t_end / dt + 1e-9));
}

/// Neighbor index lists (in-neighbors) of one digraph.
inline std::vector<std::vector<int>> neighbor_lists(const Digraph& g) {
    std::vector<std::vector<int>> nbr(g.n);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            if (g.adjacency(i, j) == 1) nbr[i].push_back(j);
    return nbr;
}

}  // namespace detail

/// Runs the closed-loop simulation: the coordination law drives the virtual
/// times while each vehicle's tracking error follows its exact exponential
/// model. Integration is classical 4th-order on the stacked (gamma,
/// gamma_dot) state with the topology and pace frozen per sub-step;
/// sub-steps are split exactly at switch and pace-change instants, so the
/// frozen values are exact. Deterministic: identical scenarios produce
/// identical logs.
inline SimLog run(const Scenario& sc, const RunOptions& opts = {}) {
    auto errors = validate_scenario(sc);
    if (errors.empty() && !opts.waive_connectivity) {
        const double horizon = sc.schedule.cycle
                                   ? sc.schedule.period()
                                   : std::max(0.0, sc.schedule.period() - sc.qos.window);
        const auto report = verify_assumption3(sc.schedule, sc.qos.window, sc.qos.delta, horizon,
                                               sc.schedule.min_dwell() / 3.0);
        if (!report.holds)
            errors.push_back("connectivity check failed: no delta-spanning tree in the window "
                             "starting at t = " +
                             std::to_string(report.first_violation.value_or(0.0)) +
                             " (pass waive_connectivity to run anyway)");
    }
    if (!errors.empty()) throw ScenarioValidationError(std::move(errors));

    const int n = sc.agent_count();
    const double t_f = sc.trajectories.t_f();
    const int steps = detail::grid_steps(sc.t_end, sc.dt);
    const double eps_t = 1e-9 * sc.dt;

    QMatrix q = (n >= 2) ? build_q(n) : QMatrix{1, Eigen::MatrixXd(0, 1)};

    SimLog log;
    log.n = n;
    log.dt = sc.dt;
    log.t.reserve(steps + 1);

    Eigen::VectorXd gamma = sc.gamma0;
    Eigen::VectorXd gdot = sc.gamma_dot0;
    std::vector<VehicleState> veh(n);
    for (int i = 0; i < n; ++i) {
        veh[i].pf_error = sc.vehicles[i].initial_pf_error;
        veh[i].position =
            sc.trajectories.trajectories[i].position(std::clamp(gamma(i), 0.0, t_f)) +
            veh[i].pf_error;
    }
    std::vector<bool> saturated(n, false);
    for (int i = 0; i < n; ++i)
        if (gamma(i) >= t_f) saturated[i] = true;

    int seg_index = -1;
    std::vector<std::vector<int>> neighbors;
    std::vector<double> nbr_gamma;  // scratch
    nbr_gamma.reserve(n);

    // Derivative of the stacked state [gamma; gamma_dot] with the segment,
    // pace and tracking errors frozen by the caller.
    const auto field = [&](double gd_d, const std::vector<VehicleState>& frozen) {
        return [&, gd_d](double, const Eigen::VectorXd& y) {
            Eigen::VectorXd dy(2 * n);
            for (int i = 0; i < n; ++i) {
                if (saturated[i]) {
                    dy(i) = 0.0;
                    dy(n + i) = 0.0;
                    continue;
                }
                const double gi = std::clamp(y(i), 0.0, t_f);
                const Eigen::Vector3d pd_dot = sc.trajectories.trajectories[i].velocity(gi);
                const double coup = pf_coupling(pd_dot, frozen[i].pf_error, sc.gains.epsilon);
                nbr_gamma.clear();
                for (const int j : neighbors[i]) nbr_gamma.push_back(y(j));
                dy(i) = y(n + i);
                dy(n + i) = coordination_accel({y(i), y(n + i)}, gd_d, nbr_gamma, coup, sc.gains);
            }
            return dy;
        };
    };

    const auto record = [&](double t) {
        log.t.push_back(t);
        log.gamma.push_back(gamma);
        log.gamma_dot.push_back(gdot);
        Eigen::VectorXd en(n);
        for (int i = 0; i < n; ++i) en(i) = veh[i].pf_error.norm();
        log.epf_norm.push_back(std::move(en));
        const double gd_d = sc.pace.rate_at(t);
        if (n >= 2)
            log.xi_norm.push_back(coordination_error(gamma, gdot, gd_d, q).norm());
        else
            log.xi_norm.push_back(std::abs(gdot(0) - gd_d));
        const int seg = sc.schedule.segment_index_at(t);
        log.segment.push_back(seg);
        if (seg != seg_index) {
            seg_index = seg;
            neighbors = detail::neighbor_lists(sc.schedule.segments[seg].graph);
        }
        Eigen::VectorXd y(2 * n);
        y << gamma, gdot;
        log.accel.push_back(field(gd_d, veh)(t, y).tail(n));
    };

    for (int s = 0; s <= steps; ++s) {
        const double t_rec = static_cast<double>(s) * sc.dt;
        record(t_rec);
        if (s == steps) break;

        const double t_goal = static_cast<double>(s + 1) * sc.dt;
        double t_cur = t_rec;
        while (t_goal - t_cur > eps_t) {
            double t_stop = std::min(
                {t_goal, sc.schedule.next_switch_after(t_cur + eps_t),
                 sc.pace.next_change_after(t_cur + eps_t)});
            if (t_goal - t_stop < eps_t) t_stop = t_goal;
            const double h = t_stop - t_cur;
            const double t_mid = t_cur + 0.5 * h;  // interior point: immune to boundary rounding

            const int seg = sc.schedule.segment_index_at(t_mid);
            if (seg != seg_index) {
                seg_index = seg;
                neighbors = detail::neighbor_lists(sc.schedule.segments[seg].graph);
            }
            const double gd_d = sc.pace.rate_at(t_mid);

            Eigen::VectorXd y(2 * n);
            y << gamma, gdot;
            const std::vector<VehicleState> frozen = veh;
            y = rk4_step(field(gd_d, frozen), t_cur, y, h);
            gamma = y.head(n);
            gdot = y.tail(n);

            for (int i = 0; i < n; ++i) {
                const double g_next = std::clamp(gamma(i), 0.0, t_f);
                veh[i] = step_vehicle(frozen[i], sc.trajectories.trajectories[i], g_next, h,
                                      sc.vehicles[i].k_pf, sc.vehicles[i].disturbance, t_cur);
            }
            t_cur = t_stop;
        }

        // pace-change events inside this grid step
        const double change = sc.pace.next_change_after(t_rec + eps_t);
        if (change <= t_goal + eps_t)
            log.events.push_back(
                {SimEvent::Kind::PaceStep, change, -1, sc.pace.rate_at(change)});

        for (int i = 0; i < n; ++i) {
            if (saturated[i]) continue;
            if (gdot(i) < 0.0) {
                gdot(i) = 0.0;
                log.events.push_back({SimEvent::Kind::RateClamp, t_goal, i, 0.0});
            }
            if (gamma(i) < 0.0) gamma(i) = 0.0;
            if (gamma(i) >= t_f) {
                gamma(i) = t_f;
                gdot(i) = 0.0;
                saturated[i] = true;
                log.events.push_back({SimEvent::Kind::Saturation, t_goal, i, 0.0});
            }
        }
    }
    return log;
}

/// Integrates the first-order switching consensus system
/// x_dot = -(a/b) L(t) x on the same uniform grid; used for studying the
/// exponential-consensus envelope in isolation.
inline SimLog run_auxiliary_consensus(const DigraphSchedule& s, double a_over_b,
                                      const Eigen::VectorXd& x0, double dt, double t_end) {
    s.validate();
    const int n = s.node_count();
    if (x0.size() != n)
        throw std::invalid_argument("run_auxiliary_consensus: x0 size must match schedule");
    if (!(dt > 0.0) || !(t_end > 0.0))
        throw std::invalid_argument("run_auxiliary_consensus: dt and t_end must be > 0");
    if (dt > s.min_dwell() / 3.0 * (1.0 + 1e-12))
        throw std::invalid_argument("run_auxiliary_consensus: dt must be <= (smallest dwell)/3");
    if (!s.cycle && t_end > s.period() * (1.0 + 1e-12))
        throw std::invalid_argument("run_auxiliary_consensus: schedule does not cover t_end");

    const int steps = detail::grid_steps(t_end, dt);
    const double eps_t = 1e-9 * dt;
    QMatrix q = (n >= 2) ? build_q(n) : QMatrix{1, Eigen::MatrixXd(0, 1)};

    SimLog log;
    log.n = n;
    log.dt = dt;

    Eigen::VectorXd x = x0;
    Eigen::MatrixXd lap = laplacian_at(s, 0.0);
    int seg_index = s.segment_index_at(0.0);

    for (int k = 0; k <= steps; ++k) {
        const double t_rec = static_cast<double>(k) * dt;
        const int seg_rec = s.segment_index_at(t_rec);
        log.t.push_back(t_rec);
        log.gamma.push_back(x);
        log.segment.push_back(seg_rec);
        log.xi_norm.push_back(n >= 2 ? (q.matrix * x).norm() : 0.0);
        {
            if (seg_rec != seg_index) {
                seg_index = seg_rec;
                lap = laplacian(s.segments[seg_rec].graph);
            }
            Eigen::VectorXd dx = -a_over_b * (lap * x);
            log.gamma_dot.push_back(dx);
            log.accel.push_back(dx);
            log.epf_norm.push_back(Eigen::VectorXd::Zero(n));
        }
        if (k == steps) break;

        const double t_goal = static_cast<double>(k + 1) * dt;
        double t_cur = t_rec;
        while (t_goal - t_cur > eps_t) {
            double t_stop = std::min(t_goal, s.next_switch_after(t_cur + eps_t));
            if (t_goal - t_stop < eps_t) t_stop = t_goal;
            const double h = t_stop - t_cur;
            const int seg = s.segment_index_at(t_cur + 0.5 * h);
            if (seg != seg_index) {
                seg_index = seg;
                lap = laplacian(s.segments[seg].graph);
            }
            x = rk4_step(
                [&](double, const Eigen::VectorXd& y) -> Eigen::VectorXd {
                    return -a_over_b * (lap * y);
                },
                t_cur, x, h);
            t_cur = t_stop;
        }
    }
    return log;
}

/// Per-step coordination metrics extracted from a log.
struct CoordinationMetrics {
    std::vector<double> t;
    std::vector<double> max_pairwise_gap;  // max_{i,j} |gamma_i - gamma_j|
    std::vector<double> max_rate_dev;      // max_i |gamma_dot_i - gamma_dot_d|
    std::vector<double> xi_norm;
    double fitted_decay_rate = 0.0;  // least-squares slope of -log(xi) over the transient
    double final_max_pairwise_gap = 0.0;  // maxima over the trailing 10% of the run
    double final_max_rate_dev = 0.0;
    double final_max_xi_norm = 0.0;
};

inline CoordinationMetrics extract_metrics(const SimLog& log, const QMatrix& q,
                                           const PaceProfile& pace) {
    if (log.records() == 0) throw std::invalid_argument("extract_metrics: empty log");
    CoordinationMetrics m;
    m.t = log.t;
    const std::size_t count = log.records();
    m.max_pairwise_gap.resize(count);
    m.max_rate_dev.resize(count);
    m.xi_norm.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        const double gd_d = pace.rate_at(log.t[k]);
        m.max_pairwise_gap[k] = log.n >= 2 ? diam(log.gamma[k]) : 0.0;
        m.max_rate_dev[k] = (log.gamma_dot[k].array() - gd_d).abs().maxCoeff();
        if (log.n >= 2)
            m.xi_norm[k] = coordination_error(log.gamma[k], log.gamma_dot[k], gd_d, q).norm();
        else
            m.xi_norm[k] = std::abs(log.gamma_dot[k](0) - gd_d);
    }

    // Decay-rate fit over [peak, first drop below 1e-3 * peak] (or the first
    // three quarters of the run when the drop never happens).
    std::size_t peak = 0;
    for (std::size_t k = 1; k < count; ++k)
        if (m.xi_norm[k] > m.xi_norm[peak]) peak = k;
    const double floor_value = std::max(1e-9, 1e-3 * m.xi_norm[peak]);
    std::size_t last = count - 1;
    for (std::size_t k = peak; k < count; ++k)
        if (m.xi_norm[k] <= floor_value) { last = k; break; }
    if (last <= peak) last = peak + (count - 1 - peak) * 3 / 4;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t used = 0;
    for (std::size_t k = peak; k <= last && k < count; ++k) {
        if (!(m.xi_norm[k] > 0.0)) continue;
        const double x = m.t[k], y = std::log(m.xi_norm[k]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++used;
    }
    if (used >= 2) {
        const double denom = used * sxx - sx * sx;
        if (denom > 0.0) m.fitted_decay_rate = -(used * sxy - sx * sy) / denom;
    }

    const std::size_t tail_start = count - std::max<std::size_t>(1, count / 10);
    for (std::size_t k = tail_start; k < count; ++k) {
        m.final_max_pairwise_gap = std::max(m.final_max_pairwise_gap, m.max_pairwise_gap[k]);
        m.final_max_rate_dev = std::max(m.final_max_rate_dev, m.max_rate_dev[k]);
        m.final_max_xi_norm = std::max(m.final_max_xi_norm, m.xi_norm[k]);
    }
    return m;
}

/// Largest stacked path-following error norm over a run.
inline double sup_stacked_pf_error(const SimLog& log) {
    double s = 0.0;
    for (const auto& en : log.epf_norm) s = std::max(s, en.norm());
    return s;
}

/// sup |gamma_ddot_d| with pace steps smoothed into ramps of the given
/// duration, so the step contributes |delta rate| / ramp_duration.
inline double sup_pace_accel(const PaceProfile& pace, double ramp_duration = 0.5) {
    if (!(ramp_duration > 0.0))
        throw std::invalid_argument("sup_pace_accel: ramp duration must be > 0");
    return pace.max_rate_step() / ramp_duration;
}

struct IssReport {
    bool holds = false;
    double min_margin = 0.0;
    std::vector<double> bound;
    std::vector<double> margin;  // bound - measured, per record
};

/// Pointwise comparison of the measured ||xi(t)|| against the closed-form
/// envelope kappa1 ||xi(0)|| e^(-lambda_tc t) + kappa2 (sup_epf + sup_pace).
inline IssReport check_iss_bound(const CoordinationMetrics& metrics,
                                 const ConvergenceConstants& constants, double sup_epf,
                                 double sup_gamma_dd) {
    IssReport r;
    if (metrics.xi_norm.empty()) throw std::invalid_argument("check_iss_bound: empty metrics");
    const double xi0 = metrics.xi_norm.front();
    const double input_term = constants.kappa2 * (sup_epf + sup_gamma_dd);
    r.bound.resize(metrics.xi_norm.size());
    r.margin.resize(metrics.xi_norm.size());
    r.min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < metrics.xi_norm.size(); ++k) {
        r.bound[k] =
            constants.kappa1 * xi0 * std::exp(-constants.lambda_tc * metrics.t[k]) + input_term;
        r.margin[k] = r.bound[k] - metrics.xi_norm[k];
        r.min_margin = std::min(r.min_margin, r.margin[k]);
    }
    r.holds = r.min_margin >= 0.0;
    return r;
}

}  // namespace timecoord
