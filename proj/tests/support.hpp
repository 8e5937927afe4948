#pragma once

// Shared helpers for the test suites: independent oracles (kept deliberately
// separate from the library's own algorithms) and random-input generators.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <vector>

#include "timecoord/timecoord.hpp"

namespace tc_test {

using namespace timecoord;

/// Midpoint Riemann sum of the switching Laplacian. Exact (up to summation
/// rounding) whenever every dwell boundary lies on the sampling grid, which
/// the random-schedule generator below guarantees.
inline Eigen::MatrixXd riemann_integrated_laplacian(const DigraphSchedule& s, double t,
                                                    double window_length, double step = 1e-5) {
    const long cells = std::lround(window_length / step);
    const int n = s.node_count();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
    for (long k = 0; k < cells; ++k)
        acc += step * laplacian_at(s, t + (static_cast<double>(k) + 0.5) * step);
    return acc;
}

/// Root search by per-candidate breadth-first traversal over threshold
/// edges; the library uses a transitive-closure pass instead.
inline std::optional<int> bfs_delta_root(const Eigen::MatrixXd& integrated, double delta) {
    const int n = static_cast<int>(integrated.rows());
    for (int r = 0; r < n; ++r) {
        std::vector<bool> seen(n, false);
        std::queue<int> frontier;
        seen[r] = true;
        frontier.push(r);
        int reached = 1;
        while (!frontier.empty()) {
            const int j = frontier.front();
            frontier.pop();
            for (int i = 0; i < n; ++i) {
                if (i == j || seen[i]) continue;
                if (-integrated(i, j) >= delta) {  // i receives from j
                    seen[i] = true;
                    frontier.push(i);
                    ++reached;
                }
            }
        }
        if (reached == n) return r;
    }
    return std::nullopt;
}

/// Digraph with the given bitmask over the n(n-1) off-diagonal entries
/// (row-major, diagonal skipped); used for exhaustive enumeration.
inline Digraph digraph_from_mask(int n, unsigned long mask) {
    Digraph g(n);
    int bit = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (mask & (1ul << bit)) g.adjacency(i, j) = 1;
            ++bit;
        }
    return g;
}

inline Digraph random_digraph(std::mt19937& rng, int n, double edge_prob) {
    std::bernoulli_distribution coin(edge_prob);
    Digraph g(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && coin(rng)) g.adjacency(i, j) = 1;
    return g;
}

/// Laplacian-shaped matrix with random nonpositive off-diagonal weights.
inline Eigen::MatrixXd random_weighted_integral(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> mag(0.0, 1.5);
    std::bernoulli_distribution present(0.45);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (present(rng)) {
                m(i, j) = -mag(rng);
                row -= m(i, j);
            }
        }
        m(i, i) = row;
    }
    return m;
}

struct QosSchedule {
    DigraphSchedule schedule;
    double window = 0.0;
    double delta = 0.0;
};

/// Cycling schedule that satisfies the integral connectivity condition by
/// construction: a random spanning tree is scattered over the segments and
/// every window of one period covers each segment for its full dwell. Dwell
/// durations are integer multiples of 1e-4 s so the Riemann oracle grid is
/// exact.
inline QosSchedule random_connected_schedule(std::mt19937& rng, int n, int max_segments = 5,
                                             double extra_edge_prob = 0.15) {
    std::uniform_int_distribution<int> seg_count(1, max_segments);
    std::uniform_int_distribution<int> dwell_units(200, 800);  // 0.02 .. 0.08 s
    std::bernoulli_distribution extra(extra_edge_prob);

    const int m = seg_count(rng);
    std::vector<Digraph> graphs(m, Digraph(n));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int k = 1; k < n; ++k) {
        std::uniform_int_distribution<int> pick_parent(0, k - 1);
        std::uniform_int_distribution<int> pick_segment(0, m - 1);
        const int child = order[k];
        const int parent = order[pick_parent(rng)];
        graphs[pick_segment(rng)].adjacency(child, parent) = 1;
    }
    for (auto& g : graphs)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j && extra(rng)) g.adjacency(i, j) = 1;

    QosSchedule out;
    double min_dwell = 1.0;
    for (int k = 0; k < m; ++k) {
        const double dwell = dwell_units(rng) * 1e-4;
        min_dwell = std::min(min_dwell, dwell);
        out.schedule.segments.push_back({graphs[k], dwell});
    }
    out.schedule.cycle = true;
    out.window = out.schedule.period();
    out.delta = min_dwell * 0.999;
    return out;
}

/// Parallel straight-line trajectories with constant speed; handy as a
/// neutral trajectory set for engine tests.
inline TrajectorySet line_trajectories(int n, double t_f, double length = 100.0,
                                       double spacing = 20.0) {
    std::vector<BezierTrajectory> trs;
    for (int i = 0; i < n; ++i) {
        trs.emplace_back(std::vector<Eigen::Vector3d>{{0.0, 0.0, spacing * i},
                                                      {length, 0.0, spacing * i}},
                         t_f);
    }
    return TrajectorySet(std::move(trs));
}

/// Minimal runnable scenario around the given schedule.
inline Scenario basic_scenario(const QosSchedule& qs, double t_f, double t_end) {
    const int n = qs.schedule.node_count();
    Scenario sc;
    sc.trajectories = line_trajectories(n, t_f);
    sc.schedule = qs.schedule;
    sc.gains = {4.0, 5.0, 10.0};
    sc.vehicles.resize(n);
    sc.gamma0 = Eigen::VectorXd::Zero(n);
    sc.gamma_dot0 = Eigen::VectorXd::Ones(n);
    sc.dt = qs.schedule.min_dwell() / 4.0;
    sc.t_end = t_end;
    sc.qos = {qs.window, qs.delta};
    return sc;
}

}  // namespace tc_test
