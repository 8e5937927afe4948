#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace timecoord {

/// Orthonormal basis of the subspace orthogonal to the all-ones vector,
/// stored as an (n-1) x n matrix Q with Q*1 = 0 and Q*Q^T = I.
/// Q maps an agent-state vector to coordinates that vanish exactly at
/// consensus.
struct QMatrix {
    int n = 0;
    Eigen::MatrixXd matrix;  // (n-1) x n
};

/// Recursive construction, base case Q_2 = [1/sqrt(2), -1/sqrt(2)].
inline QMatrix build_q(int n) {
    if (n < 2) throw std::invalid_argument("build_q: n must be >= 2");
    Eigen::MatrixXd q(1, 2);
    q << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    for (int k = 3; k <= n; ++k) {
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k - 1, k);
        next(0, 0) = std::sqrt(static_cast<double>(k - 1) / k);
        const double off = -1.0 / std::sqrt(static_cast<double>(k) * (k - 1));
        for (int j = 1; j < k; ++j) next(0, j) = off;
        next.block(1, 1, k - 2, k - 1) = q;
        q = std::move(next);
    }
    return QMatrix{n, std::move(q)};
}

/// max(x) - min(x); the spread of agent states, zero exactly at consensus.
inline double diam(const Eigen::VectorXd& x) {
    if (x.size() == 0) throw std::invalid_argument("diam: empty vector");
    return x.maxCoeff() - x.minCoeff();
}

/// Coordination error split into a synchronization part xi1 = Q*gamma and a
/// pacing part xi2 = gamma_dot - gamma_dot_d * 1.
struct CoordErrorState {
    Eigen::VectorXd xi1;  // (n-1)
    Eigen::VectorXd xi2;  // n

    double norm() const { return std::sqrt(xi1.squaredNorm() + xi2.squaredNorm()); }
};

inline CoordErrorState coordination_error(const Eigen::VectorXd& gamma,
                                          const Eigen::VectorXd& gamma_dot,
                                          double gamma_dot_d, const QMatrix& q) {
    if (gamma.size() != q.n || gamma_dot.size() != q.n)
        throw std::invalid_argument("coordination_error: dimension mismatch with Q");
    CoordErrorState e;
    e.xi1 = q.matrix * gamma;
    e.xi2 = gamma_dot - gamma_dot_d * Eigen::VectorXd::Ones(q.n);
    return e;
}

/// b*xi1 + Q*xi2: the blended error coordinate in which the closed loop
/// contracts.
inline Eigen::VectorXd combined_error(const CoordErrorState& e, double b, const QMatrix& q) {
    if (e.xi1.size() != q.n - 1 || e.xi2.size() != q.n)
        throw std::invalid_argument("combined_error: dimension mismatch with Q");
    return b * e.xi1 + q.matrix * e.xi2;
}

/// Exponential-consensus envelope parameters for the first-order switching
/// system x_dot = -(a/b) L(t) x under the integral connectivity condition
/// with QoS window T and threshold delta:
///   delta_prime = min{1, (a/b) delta} * exp(-(n-1)(a/b)T)
///   k           = 1 / (1 - delta_prime^n)
///   lambda      = -ln(1 - delta_prime^n) / (nT)
/// Then diam(x(t)) <= diam(x(0)) * k * exp(-lambda t).
struct ConsensusConstants {
    double delta_prime = 0.0;
    double k = 0.0;
    double lambda = 0.0;  // 1/s
    /// Set when delta_prime^n is so small that k ~ 1 and lambda ~ 0, making
    /// the envelope numerically vacuous over any practical horizon.
    bool degenerate = false;
};

inline ConsensusConstants consensus_constants(int n, double window_length, double delta,
                                              double a, double b) {
    if (n < 2) throw std::invalid_argument("consensus_constants: n must be >= 2");
    if (!(window_length > 0.0))
        throw std::invalid_argument("consensus_constants: T must be > 0");
    if (!(delta > 0.0) || delta > window_length)
        throw std::invalid_argument("consensus_constants: delta must satisfy 0 < delta <= T");
    if (!(a > 0.0) || !(b > 0.0))
        throw std::invalid_argument("consensus_constants: gains must be > 0");

    const double ratio = a / b;
    ConsensusConstants c;
    c.delta_prime = std::min(1.0, ratio * delta) * std::exp(-(n - 1) * ratio * window_length);
    const double dpn = std::pow(c.delta_prime, n);
    c.k = 1.0 / (1.0 - dpn);
    c.lambda = -std::log1p(-dpn) / (n * window_length);
    c.degenerate = !(dpn > 1e-8);
    return c;
}

/// Closed-form ISS constants for the coordination error:
///   ||xi(t)|| <= kappa1 ||xi(0)|| e^(-lambda_tc t)
///               + kappa2 sup_t(||e_PF(t)|| + |gamma_dot_d'(t)|).
struct ConvergenceConstants {
    int n = 0;
    double delta_prime = 0.0;
    double k = 0.0;
    double lambda = 0.0;
    double k_phi = 0.0;          // sqrt(2n) k
    double lambda_tc_max = 0.0;  // lambda / (6 n k^2)
    double lambda_tc = 0.0;      // chosen rate, <= lambda_tc_max
    double c1 = 0.0;             // b c3 / (2 a n)
    double c2 = 0.0;             // k_phi^2 c4 / (2 lambda), c4 = c3
    double c3 = 0.0;
    double beta = 0.0;
    double kappa1 = 0.0;
    double kappa2 = 0.0;
    double s_norm = 0.0;      // ||S||,    S = [[b I, Q], [0, I]]
    double s_inv_norm = 0.0;  // ||S^-1||
    bool degenerate = false;
};

namespace detail {
inline double spectral_norm(const Eigen::MatrixXd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}
}  // namespace detail

/// Assembles the ISS constants from the consensus envelope. c3 and beta are
/// the free constants of the underlying Lyapunov construction (c4 is tied to
/// c3). Passing lambda_tc <= 0 selects the maximal admissible rate.
inline ConvergenceConstants iss_bounds(int n, double window_length, double delta, double a,
                                       double b, double c3, double beta, double lambda_tc = 0.0) {
    if (!(c3 > 0.0) || !(beta > 0.0))
        throw std::invalid_argument("iss_bounds: c3 and beta must be > 0");
    const ConsensusConstants base = consensus_constants(n, window_length, delta, a, b);

    ConvergenceConstants r;
    r.n = n;
    r.delta_prime = base.delta_prime;
    r.k = base.k;
    r.lambda = base.lambda;
    r.degenerate = base.degenerate;
    r.k_phi = std::sqrt(2.0 * n) * base.k;
    r.lambda_tc_max = base.lambda / (6.0 * n * base.k * base.k);
    if (lambda_tc <= 0.0) lambda_tc = r.lambda_tc_max;
    if (lambda_tc > r.lambda_tc_max)
        throw std::invalid_argument("iss_bounds: lambda_tc exceeds lambda / (6 n k^2)");
    r.lambda_tc = lambda_tc;
    r.c3 = c3;
    r.beta = beta;
    r.c1 = b * c3 / (2.0 * a * n);
    r.c2 = r.k_phi * r.k_phi * c3 / (2.0 * base.lambda);

    const QMatrix q = build_q(n);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * n - 1, 2 * n - 1);
    s.topLeftCorner(n - 1, n - 1) = b * Eigen::MatrixXd::Identity(n - 1, n - 1);
    s.topRightCorner(n - 1, n) = q.matrix;
    s.bottomRightCorner(n, n) = Eigen::MatrixXd::Identity(n, n);
    r.s_norm = detail::spectral_norm(s);
    r.s_inv_norm = detail::spectral_norm(s.inverse());

    const double lo = std::min(r.c1, beta / 2.0);
    const double hi = std::max(r.c2, beta / 2.0);
    const double shape = std::sqrt(hi / lo);
    r.kappa1 = r.s_inv_norm * shape * r.s_norm;
    r.kappa2 = r.s_inv_norm * shape * (r.k_phi * r.k_phi * c3 / base.lambda + beta) /
               (lambda_tc * lo);
    return r;
}

}  // namespace timecoord
