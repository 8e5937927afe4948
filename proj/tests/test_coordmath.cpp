#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace timecoord;
using Catch::Approx;

// Frozen high-precision reference values (see tests/make_reference_values.py).
namespace ref {
constexpr double delta_prime_a = 0.3678794411714423;   // n=2, T=1, delta=1, a=b=1
constexpr double k_a = 1.1565176427496657;
constexpr double lambda_a = 0.07270672893442953;

constexpr double delta_prime_b = 0.017638716832835912;  // n=5, T=0.09, delta=0.03,
constexpr double k_b = 1.0000000017073987;              // a=3.75, b=4.82
constexpr double lambda_b = 3.7942192909812292e-9;

constexpr double c2_w = 36.79255215009042;        // worked case: c3=1, beta=2
constexpr double kappa1_w = 31.760346599826571;
constexpr double kappa2_w = 1310101.5652170993;
constexpr double s_norm_w = 1.618033988749895;
constexpr double lambda_tc_cap_w = 0.004529902301606361;
}  // namespace ref

TEST_CASE("build_q base case") {
    const auto q = build_q(2);
    REQUIRE(q.matrix.rows() == 1);
    REQUIRE(q.matrix.cols() == 2);
    CHECK(q.matrix(0, 0) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(q.matrix(0, 1) == Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("build_q three-agent matrix matches one recursion step") {
    const auto q = build_q(3);
    Eigen::MatrixXd expected(2, 3);
    expected << std::sqrt(2.0 / 3.0), -1.0 / std::sqrt(6.0), -1.0 / std::sqrt(6.0),
        0.0, 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    CHECK((q.matrix - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("build_q rejects n < 2") {
    CHECK_THROWS_AS(build_q(1), std::invalid_argument);
}

TEST_CASE("build_q invariants for n up to 50") {
    for (int n = 2; n <= 50; ++n) {
        const auto q = build_q(n);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
        CHECK((q.matrix * ones).cwiseAbs().maxCoeff() <= 1e-12);
        const Eigen::MatrixXd qqt = q.matrix * q.matrix.transpose();
        CHECK((qqt - Eigen::MatrixXd::Identity(n - 1, n - 1)).cwiseAbs().maxCoeff() <= 1e-12);
        const Eigen::MatrixXd qtq = q.matrix.transpose() * q.matrix;
        const Eigen::MatrixXd centering =
            Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / n);
        CHECK((qtq - centering).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("diam basics") {
    Eigen::VectorXd consensus(3);
    consensus << 1, 1, 1;
    CHECK(diam(consensus) == 0.0);
    Eigen::VectorXd x(3);
    x << 3, -1, 2;
    CHECK(diam(x) == 4.0);
    CHECK_THROWS_AS(diam(Eigen::VectorXd()), std::invalid_argument);
}

TEST_CASE("diam and ||Qx|| are translation invariant") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> val(-5.0, 5.0);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + trial % 7;
        const auto q = build_q(n);
        Eigen::VectorXd x(n);
        for (int i = 0; i < n; ++i) x(i) = val(rng);
        const double c = val(rng);
        const Eigen::VectorXd shifted = x.array() + c;
        CHECK(diam(shifted) == Approx(diam(x)).margin(1e-12));
        CHECK((q.matrix * shifted).norm() == Approx((q.matrix * x).norm()).margin(1e-12));
    }
}

TEST_CASE("spread-equivalence inequalities on a worked pair") {
    const auto q = build_q(2);
    Eigen::VectorXd x(2);
    x << 1, 0;
    const double qn = (q.matrix * x).norm();
    CHECK(qn == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(diam(x) == 1.0);
    CHECK(qn / std::sqrt(2.0) <= diam(x) + 1e-12);
    CHECK(diam(x) <= std::sqrt(2.0) * qn + 1e-12);
}

TEST_CASE("spread-equivalence inequalities hold for random vectors") {
    std::mt19937 rng(29);
    std::uniform_real_distribution<double> val(-10.0, 10.0);
    for (int n = 2; n <= 10; ++n) {
        const auto q = build_q(n);
        for (int trial = 0; trial < 10000 / 9; ++trial) {
            Eigen::VectorXd x(n);
            for (int i = 0; i < n; ++i) x(i) = val(rng);
            const double d = diam(x);
            const double qn = (q.matrix * x).norm();
            CHECK(qn / std::sqrt(static_cast<double>(n)) <= d + 1e-12);
            CHECK(d <= std::sqrt(2.0) * qn + 1e-12);
        }
    }
}

TEST_CASE("consensus_constants worked case") {
    const auto c = consensus_constants(2, 1.0, 1.0, 1.0, 1.0);
    CHECK(c.delta_prime == Approx(ref::delta_prime_a).epsilon(1e-13));
    CHECK(c.k == Approx(ref::k_a).epsilon(1e-13));
    CHECK(c.lambda == Approx(ref::lambda_a).epsilon(1e-13));
    CHECK_FALSE(c.degenerate);
}

TEST_CASE("consensus_constants five-agent regression values") {
    const auto c = consensus_constants(5, 0.09, 0.03, 3.75, 4.82);
    CHECK(c.delta_prime == Approx(ref::delta_prime_b).epsilon(1e-12));
    CHECK(c.k == Approx(ref::k_b).epsilon(1e-14));
    CHECK(c.lambda == Approx(ref::lambda_b).epsilon(1e-10));
    CHECK(c.degenerate);  // delta_prime^5 ~ 1.7e-9
}

TEST_CASE("consensus_constants stays in its domain") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> gain(0.1, 8.0);
    std::uniform_real_distribution<double> window(0.01, 3.0);
    std::uniform_real_distribution<double> frac(0.05, 1.0);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + trial % 9;
        const double T = window(rng);
        const auto c = consensus_constants(n, T, frac(rng) * T, gain(rng), gain(rng));
        CHECK(c.delta_prime > 0.0);
        CHECK(c.delta_prime < 1.0);
        CHECK(c.k > 1.0);
        CHECK(c.lambda > 0.0);
    }
}

TEST_CASE("consensus_constants rejects out-of-domain parameters") {
    CHECK_THROWS_AS(consensus_constants(1, 1.0, 1.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(consensus_constants(2, 0.0, 1.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(consensus_constants(2, 1.0, 1.5, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(consensus_constants(2, 1.0, 0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(consensus_constants(2, 1.0, 1.0, -1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(consensus_constants(2, 1.0, 1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("iss_bounds worked case") {
    const auto c = iss_bounds(2, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0);
    CHECK(c.c1 == Approx(0.25).epsilon(1e-15));
    CHECK(c.c2 == Approx(ref::c2_w).epsilon(1e-12));
    CHECK(c.k_phi * c.k_phi == Approx(4.0 * c.k * c.k).epsilon(1e-13));
    CHECK(c.lambda_tc_max == Approx(ref::lambda_tc_cap_w).epsilon(1e-12));
    CHECK(c.lambda_tc == c.lambda_tc_max);
    CHECK(c.s_norm == Approx(ref::s_norm_w).epsilon(1e-10));
    CHECK(c.s_inv_norm == Approx(ref::s_norm_w).epsilon(1e-10));
    CHECK(c.kappa1 == Approx(ref::kappa1_w).epsilon(1e-9));
    CHECK(c.kappa2 == Approx(ref::kappa2_w).epsilon(1e-9));
}

TEST_CASE("iss_bounds accepts the maximal rate and rejects rates above it") {
    const auto base = consensus_constants(2, 1.0, 1.0, 1.0, 1.0);
    const double cap = base.lambda / (6.0 * 2 * base.k * base.k);
    CHECK_NOTHROW(iss_bounds(2, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, cap));
    CHECK_THROWS_AS(iss_bounds(2, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0, cap * (1.0 + 1e-9)),
                    std::invalid_argument);
    CHECK_THROWS_AS(iss_bounds(2, 1.0, 1.0, 1.0, 1.0, 0.0, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(iss_bounds(2, 1.0, 1.0, 1.0, 1.0, 1.0, -2.0), std::invalid_argument);
}

TEST_CASE("iss_bounds amplification factor is at least one") {
    std::mt19937 rng(37);
    std::uniform_real_distribution<double> gain(0.2, 6.0);
    std::uniform_real_distribution<double> window(0.05, 2.0);
    std::uniform_real_distribution<double> frac(0.1, 1.0);
    std::uniform_real_distribution<double> free_const(0.2, 4.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + trial % 6;
        const double T = window(rng);
        const auto c =
            iss_bounds(n, T, frac(rng) * T, gain(rng), gain(rng), free_const(rng), free_const(rng));
        CHECK(c.kappa1 >= 1.0);
    }
}

TEST_CASE("coordination_error vanishes at the synchronized pace") {
    const auto q = build_q(3);
    const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(3, 4.2);
    const Eigen::VectorXd gdot = Eigen::VectorXd::Constant(3, 0.9);
    const auto e = coordination_error(gamma, gdot, 0.9, q);
    CHECK(e.xi1.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(e.xi2.cwiseAbs().maxCoeff() == 0.0);
    CHECK(e.norm() < 1e-12);
}

TEST_CASE("coordination_error worked two-agent case") {
    const auto q = build_q(2);
    Eigen::VectorXd gamma(2), gdot(2);
    gamma << 1, 0;
    gdot << 0.9, 0.9;
    const auto e = coordination_error(gamma, gdot, 0.9, q);
    REQUIRE(e.xi1.size() == 1);
    CHECK(e.xi1(0) == Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(e.xi2.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("coordination_error pacing offset") {
    const auto q = build_q(4);
    const Eigen::VectorXd gamma = Eigen::VectorXd::Zero(4);
    const Eigen::VectorXd gdot = Eigen::VectorXd::Constant(4, 2.0);
    const auto e = coordination_error(gamma, gdot, 1.0, q);
    CHECK((e.xi2 - Eigen::VectorXd::Ones(4)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("coordination_error rejects dimension mismatches") {
    const auto q = build_q(3);
    CHECK_THROWS_AS(coordination_error(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(3), 1.0, q),
                    std::invalid_argument);
}

TEST_CASE("combined_error basics") {
    const auto q = build_q(2);
    CoordErrorState zero{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(2)};
    CHECK(combined_error(zero, 3.0, q).cwiseAbs().maxCoeff() == 0.0);

    CoordErrorState pace_only{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(2)};
    CHECK(combined_error(pace_only, 3.0, q).cwiseAbs().maxCoeff() < 1e-15);

    CoordErrorState mixed{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(2)};
    mixed.xi2 << 1, 0;
    const auto chi = combined_error(mixed, 2.0, q);
    REQUIRE(chi.size() == 1);
    CHECK(chi(0) == Approx(2.0 + 1.0 / std::sqrt(2.0)).epsilon(1e-15));
}

namespace {

/// Integrates y' = -r * M(t) * y on the record grid with the same
/// switch-splitting scheme the engine uses; M(t) is built per segment by
/// the supplied functor.
template <typename SegmentMatrix>
std::vector<Eigen::VectorXd> integrate_switching(const DigraphSchedule& s, double r,
                                                 SegmentMatrix&& seg_matrix,
                                                 const Eigen::VectorXd& y0, double dt,
                                                 double t_end) {
    std::vector<Eigen::VectorXd> records;
    Eigen::VectorXd y = y0;
    const int steps = static_cast<int>(std::floor(t_end / dt + 1e-9));
    const double eps_t = 1e-9 * dt;
    for (int k = 0; k <= steps; ++k) {
        records.push_back(y);
        if (k == steps) break;
        const double t_rec = k * dt;
        const double t_goal = (k + 1) * dt;
        double t_cur = t_rec;
        while (t_goal - t_cur > eps_t) {
            double t_stop = std::min(t_goal, s.next_switch_after(t_cur + eps_t));
            if (t_goal - t_stop < eps_t) t_stop = t_goal;
            const double h = t_stop - t_cur;
            const Eigen::MatrixXd m = seg_matrix(s.segment_index_at(t_cur + 0.5 * h));
            y = rk4_step([&](double, const Eigen::VectorXd& v) -> Eigen::VectorXd {
                             return -r * (m * v);
                         },
                         t_cur, y, h);
            t_cur = t_stop;
        }
    }
    return records;
}

}  // namespace

TEST_CASE("consensus envelope holds along random switching runs") {
    std::mt19937 rng(41);
    std::uniform_int_distribution<int> size(2, 6);
    std::uniform_real_distribution<double> ratio(0.3, 2.0);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = size(rng);
        const auto qs = tc_test::random_connected_schedule(rng, n);
        const double a_over_b = ratio(rng);
        Eigen::VectorXd x0(n);
        for (int i = 0; i < n; ++i) x0(i) = val(rng);

        const auto c = consensus_constants(n, qs.window, qs.delta, a_over_b, 1.0);
        const auto log = run_auxiliary_consensus(qs.schedule, a_over_b, x0,
                                                 qs.schedule.min_dwell() / 4.0, 2.0);
        const double d0 = diam(x0);
        for (std::size_t k = 0; k < log.records(); ++k)
            REQUIRE(diam(log.gamma[k]) <= d0 * c.k * std::exp(-c.lambda * log.t[k]) + 1e-9);
    }
}

TEST_CASE("projected consensus dynamics track the full dynamics") {
    std::mt19937 rng(43);
    std::uniform_int_distribution<int> size(2, 6);
    std::uniform_real_distribution<double> ratio(0.3, 2.0);
    std::uniform_real_distribution<double> val(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = size(rng);
        const auto qs = tc_test::random_connected_schedule(rng, n);
        const double a_over_b = ratio(rng);
        const auto q = build_q(n);
        Eigen::VectorXd x0(n);
        for (int i = 0; i < n; ++i) x0(i) = val(rng);
        const double dt = qs.schedule.min_dwell() / 4.0;

        std::vector<Eigen::MatrixXd> laps;
        for (const auto& seg : qs.schedule.segments) laps.push_back(laplacian(seg.graph));

        const auto full = integrate_switching(
            qs.schedule, a_over_b, [&](int seg) { return laps[seg]; }, x0, dt, 1.5);
        const auto reduced = integrate_switching(
            qs.schedule, a_over_b,
            [&](int seg) -> Eigen::MatrixXd {
                return q.matrix * laps[seg] * q.matrix.transpose();
            },
            Eigen::VectorXd(q.matrix * x0), dt, 1.5);

        REQUIRE(full.size() == reduced.size());
        for (std::size_t k = 0; k < full.size(); ++k)
            REQUIRE((reduced[k] - q.matrix * full[k]).cwiseAbs().maxCoeff() < 1e-9);
    }
}
