#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace timecoord {

/// Directed communication graph. adjacency(i, j) == 1 means node i receives
/// information from node j.
struct Digraph {
    int n = 0;
    Eigen::MatrixXi adjacency;

    Digraph() = default;

    explicit Digraph(int node_count)
        : n(node_count), adjacency(Eigen::MatrixXi::Zero(node_count, node_count)) {
        if (node_count < 1) throw std::invalid_argument("Digraph: node count must be >= 1");
    }

    /// Builds from (receiver, transmitter) edge pairs.
    Digraph(int node_count, const std::vector<std::pair<int, int>>& edges)
        : Digraph(node_count) {
        for (const auto& [i, j] : edges) {
            if (i < 0 || i >= n || j < 0 || j >= n)
                throw std::invalid_argument("Digraph: edge index out of range");
            if (i == j) throw std::invalid_argument("Digraph: self-loops are not allowed");
            adjacency(i, j) = 1;
        }
    }

    void validate() const {
        if (adjacency.rows() != n || adjacency.cols() != n)
            throw std::invalid_argument("Digraph: adjacency must be n x n");
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                const int a = adjacency(i, j);
                if (i == j && a != 0)
                    throw std::invalid_argument("Digraph: diagonal must be zero");
                if (a != 0 && a != 1)
                    throw std::invalid_argument("Digraph: entries must be 0 or 1");
            }
        }
    }
};

/// L = Delta - A with Delta_ii = sum_j A_ij. Rows sum to zero.
inline Eigen::MatrixXd laplacian(const Digraph& g) {
    g.validate();
    Eigen::MatrixXd lap = -g.adjacency.cast<double>();
    for (int i = 0; i < g.n; ++i) lap(i, i) = g.adjacency.row(i).sum();
    return lap;
}

/// Piecewise-constant switching sequence of digraphs. Right-continuous in
/// time: the segment starting at t is the one active at t.
struct DigraphSchedule {
    struct Segment {
        Digraph graph;
        double dwell = 0.0;  // seconds
    };

    std::vector<Segment> segments;
    bool cycle = false;

    DigraphSchedule() = default;
    DigraphSchedule(std::vector<Segment> segs, bool cycling)
        : segments(std::move(segs)), cycle(cycling) {
        validate();
    }

    void validate() const {
        if (segments.empty())
            throw std::invalid_argument("DigraphSchedule: at least one segment required");
        const int n = segments.front().graph.n;
        for (std::size_t k = 0; k < segments.size(); ++k) {
            segments[k].graph.validate();
            if (segments[k].graph.n != n)
                throw std::invalid_argument("DigraphSchedule: all segments must share one node count");
            if (!(segments[k].dwell > 0.0))
                throw std::invalid_argument("DigraphSchedule: dwell durations must be > 0");
        }
    }

    int node_count() const { return segments.front().graph.n; }

    double period() const {
        double p = 0.0;
        for (const auto& s : segments) p += s.dwell;
        return p;
    }

    /// Total covered time; infinite when cycling.
    double coverage() const {
        return cycle ? std::numeric_limits<double>::infinity() : period();
    }

    double min_dwell() const {
        double d = segments.front().dwell;
        for (const auto& s : segments) d = std::min(d, s.dwell);
        return d;
    }

    /// Index of the segment active at t (right-continuous).
    int segment_index_at(double t) const {
        if (t < 0.0) throw std::out_of_range("DigraphSchedule: t must be >= 0");
        double u = t;
        if (cycle) {
            u = std::fmod(t, period());
            if (u < 0.0) u = 0.0;
        } else if (t > period()) {
            throw std::out_of_range("DigraphSchedule: t exceeds schedule coverage");
        }
        double acc = 0.0;
        for (std::size_t k = 0; k < segments.size(); ++k) {
            acc += segments[k].dwell;
            if (u < acc) return static_cast<int>(k);
        }
        return static_cast<int>(segments.size()) - 1;  // u == coverage endpoint
    }

    /// The next switch instant strictly after t, or +inf if none.
    double next_switch_after(double t) const {
        const double p = period();
        if (!cycle && t >= p) return std::numeric_limits<double>::infinity();
        const double base = cycle ? std::floor(t / p) * p : 0.0;
        if (base > t) return base;  // rounding of floor(t/p)*p landed past t
        double acc = base;
        for (const auto& s : segments) {
            acc += s.dwell;
            if (acc > t) return acc;
        }
        return cycle ? base + p : std::numeric_limits<double>::infinity();
    }
};

inline Eigen::MatrixXd laplacian_at(const DigraphSchedule& s, double t) {
    return laplacian(s.segments[static_cast<std::size_t>(s.segment_index_at(t))].graph);
}

/// Windowed integral of the switching Laplacian over (t, t+T).
struct IntegratedLaplacian {
    std::pair<double, double> window{0.0, 0.0};
    Eigen::MatrixXd matrix;
};

/// Exact piecewise-constant integral: sum over segment instances of
/// (overlap with the window) * (segment Laplacian).
inline IntegratedLaplacian integrated_laplacian(const DigraphSchedule& s, double t, double window_length) {
    if (!(window_length > 0.0))
        throw std::invalid_argument("integrated_laplacian: window length must be > 0");
    if (t < 0.0) throw std::out_of_range("integrated_laplacian: t must be >= 0");
    const double t_end = t + window_length;
    const double p = s.period();
    if (!s.cycle && t_end > p * (1.0 + 1e-12))
        throw std::out_of_range("integrated_laplacian: window exceeds schedule coverage");

    const int n = s.node_count();
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);

    std::vector<Eigen::MatrixXd> seg_lap;
    seg_lap.reserve(s.segments.size());
    for (const auto& seg : s.segments) seg_lap.push_back(laplacian(seg.graph));

    double cycle_start = s.cycle ? std::floor(t / p) * p : 0.0;
    while (cycle_start < t_end) {
        double seg_start = cycle_start;
        for (std::size_t k = 0; k < s.segments.size(); ++k) {
            const double seg_end = seg_start + s.segments[k].dwell;
            const double overlap = std::min(seg_end, t_end) - std::max(seg_start, t);
            if (overlap > 0.0) acc += overlap * seg_lap[k];
            seg_start = seg_end;
            if (seg_start >= t_end) break;
        }
        if (!s.cycle) break;
        cycle_start += p;
    }
    return IntegratedLaplacian{{t, t_end}, std::move(acc)};
}

/// True iff the accumulated weight of edge (i, j) over the window reaches
/// the threshold: -matrix(i, j) >= delta (boundary inclusive).
inline bool is_delta_edge(const IntegratedLaplacian& m, int i, int j, double delta) {
    if (i == j) throw std::invalid_argument("is_delta_edge: i and j must differ");
    if (!(delta > 0.0)) throw std::invalid_argument("is_delta_edge: delta must be > 0");
    return -m.matrix(i, j) >= delta;
}

/// Smallest node index from which every other node is reachable through
/// edges of integrated weight >= delta, traversed transmitter -> receiver.
/// Uses a transitive-closure pass over the thresholded adjacency.
inline std::optional<int> delta_spanning_tree_root(const IntegratedLaplacian& m, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("delta_spanning_tree_root: delta must be > 0");
    const int n = static_cast<int>(m.matrix.rows());
    if (n == 1) return 0;

    // reach(a, b): information originating at a arrives at b.
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i) {
        reach[i][i] = true;
        for (int j = 0; j < n; ++j)
            if (i != j && -m.matrix(i, j) >= delta) reach[j][i] = true;
    }
    for (int k = 0; k < n; ++k)
        for (int a = 0; a < n; ++a)
            if (reach[a][k])
                for (int b = 0; b < n; ++b)
                    if (reach[k][b]) reach[a][b] = true;

    for (int r = 0; r < n; ++r) {
        bool all = true;
        for (int b = 0; b < n; ++b)
            if (!reach[r][b]) { all = false; break; }
        if (all) return r;
    }
    return std::nullopt;
}

struct Assumption3Report {
    bool holds = false;
    std::optional<double> first_violation;
};

/// Samples window start times and checks that every integrated window
/// contains a delta-spanning tree. For cycling schedules one period of
/// start times suffices. The threshold is relaxed by a relative slack so
/// that windows whose edge weights sit exactly on the delta boundary
/// (e.g. window length == period) are not rejected by rounding of the
/// overlap sums.
inline Assumption3Report verify_assumption3(const DigraphSchedule& s, double window_length,
                                            double delta, double horizon, double stride,
                                            double relative_slack = 1e-9) {
    if (!(window_length > 0.0) || !(delta > 0.0) || !(stride > 0.0))
        throw std::invalid_argument("verify_assumption3: T, delta and stride must be > 0");
    if (!s.cycle && window_length > s.period() * (1.0 + 1e-12))
        throw std::out_of_range("verify_assumption3: window exceeds schedule coverage");

    const double delta_eff = delta * (1.0 - relative_slack);
    double t_max = s.cycle ? std::min(horizon, s.period())
                           : std::min(horizon, s.period() - window_length);
    if (t_max < 0.0) t_max = 0.0;

    const long samples = static_cast<long>(std::ceil(t_max / stride - 1e-12));
    for (long k = 0; k <= samples; ++k) {
        const double t = std::min(static_cast<double>(k) * stride, t_max);
        const auto m = integrated_laplacian(s, t, window_length);
        if (!delta_spanning_tree_root(m, delta_eff))
            return Assumption3Report{false, t};
    }
    return Assumption3Report{true, std::nullopt};
}

}  // namespace timecoord
