#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "spinsplit/dicke.hpp"
#include "spinsplit/rotation.hpp"
#include "spinsplit/stats.hpp"

using namespace spinsplit;

namespace {

std::array<double, 3> random_unit_axis(Rng& rng) {
    while (true) {
        std::array<double, 3> a = {rng.normal(), rng.normal(), rng.normal()};
        const double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
        if (n > 0.3) return {a[0] / n, a[1] / n, a[2] / n};
    }
}

std::array<double, 3> sorted_cov_eigenvalues(const SpinMoments& m) {
    Eigen::Matrix3d c;
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) c(i, k) = m.cov[i][k];
    const Eigen::Vector3d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(c).eigenvalues();
    return {ev(0), ev(1), ev(2)};
}

}  // namespace

TEST_CASE("bessel table against known values") {
    // J_0(1) and J_1(1), plus the normalization identity at larger argument.
    const auto j1 = bessel_j_table(8, 1.0);
    REQUIRE(std::abs(j1[0] - 0.7651976865579666) < 1e-13);
    REQUIRE(std::abs(j1[1] - 0.4400505857449335) < 1e-13);
    const auto j50 = bessel_j_table(200, 50.0);
    double norm = j50[0];
    for (int n = 2; n <= 200; n += 2) norm += 2.0 * j50[static_cast<std::size_t>(n)];
    REQUIRE(std::abs(norm - 1.0) < 1e-10);
    // Odd orders flip sign for negative arguments.
    const auto jm = bessel_j_table(3, -1.0);
    REQUIRE(std::abs(jm[1] + j1[1]) < 1e-13);
    REQUIRE(std::abs(jm[0] - j1[0]) < 1e-13);
}

TEST_CASE("rotation by zero angle is the identity") {
    Rng rng(71);
    const DickeState s = oracles::random_state(25, rng);
    const DickeState r = rotate(s, {0.0, 0.0, 1.0}, 0.0);
    for (std::size_t k = 0; k < s.amplitudes().size(); ++k)
        REQUIRE(std::abs(r.amplitudes()[k] - s.amplitudes()[k]) < 1e-15);
}

TEST_CASE("rotate rejects a non-unit axis") {
    const DickeState s = coherent_state(4, 0.5 * kPi, 0.0);
    REQUIRE_THROWS_AS(rotate(s, {0.0, 0.0, 2.0}, 0.1), Error);
}

TEST_CASE("pole state flips under a pi rotation about y") {
    const DickeState pole = coherent_state(15, 0.0, 0.0);  // k = N
    const DickeState flipped = rotate(pole, {0.0, 1.0, 0.0}, kPi);
    REQUIRE(std::abs(std::abs(flipped.amplitudes()[0]) - 1.0) < 1e-10);
    for (std::size_t k = 1; k < flipped.amplitudes().size(); ++k)
        REQUIRE(std::abs(flipped.amplitudes()[k]) < 1e-10);
}

TEST_CASE("equatorial coherent state rotates onto a pole") {
    const DickeState css = coherent_state(24, 0.5 * kPi, 0.0);
    const DickeState rotated = rotate(css, {0.0, 1.0, 0.0}, 0.5 * kPi);
    const SpinMoments m = spin_moments(rotated);
    REQUIRE(std::abs(m.mean[2] + 12.0) < 1e-9);  // +x maps to -z
    REQUIRE(std::abs(m.mean[0]) < 1e-9);
    REQUIRE(std::abs(m.cov[2][2]) < 1e-9);
    // Coherent-state transverse variance N/4 is preserved.
    REQUIRE(std::abs(m.cov[0][0] - 6.0) < 1e-9);
    REQUIRE(std::abs(m.cov[1][1] - 6.0) < 1e-9);
}

TEST_CASE("rotation agrees with the dense matrix-exponential oracle") {
    Rng rng(73);
    for (int n : {1, 2, 3, 7, 20, 40}) {
        for (int trial = 0; trial < 4; ++trial) {
            const DickeState s = oracles::random_state(n, rng);
            const auto axis = random_unit_axis(rng);
            const double angle = (rng.uniform() - 0.5) * 4.0 * kPi;
            const DickeState a = rotate(s, axis, angle);
            const DickeState b = oracles::dense_rotate(s, axis, angle);
            REQUIRE(oracles::state_distance_up_to_phase(a, b) < 1e-9);
        }
    }
    // Edge orientations: rotations about z and about axes near the beta = 0/pi
    // Euler branches.
    const DickeState s = oracles::random_state(9, rng);
    for (const auto& axis : std::vector<std::array<double, 3>>{
             {0.0, 0.0, 1.0}, {0.0, 0.0, -1.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}) {
        for (double angle : {1e-9, 0.3, kPi, 2.0 * kPi - 1e-9}) {
            const DickeState a = rotate(s, axis, angle);
            const DickeState b = oracles::dense_rotate(s, axis, angle);
            // The dense-exponential oracle itself drifts to ~1e-9 at large
            // rotation norms, so the bound here is looser than the random-axis loop.
            REQUIRE(oracles::state_distance_up_to_phase(a, b) < 1e-8);
        }
    }
}

TEST_CASE("mean spin transforms as the rotated vector") {
    Rng rng(79);
    const DickeState s = oracles::random_state(31, rng);
    const SpinMoments before = spin_moments(s);
    const auto axis = random_unit_axis(rng);
    const double angle = 1.234;
    const SpinMoments after = spin_moments(rotate(s, axis, angle));
    const auto r = rotation_matrix(axis, angle);
    for (int i = 0; i < 3; ++i) {
        double expect = 0.0;
        for (int k = 0; k < 3; ++k) expect += r[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] * before.mean[static_cast<std::size_t>(k)];
        REQUIRE(std::abs(after.mean[static_cast<std::size_t>(i)] - expect) < 1e-9);
    }
}

TEST_CASE("rotations preserve the norm and the covariance spectrum") {
    Rng rng(83);
    for (int n : {50, 300, 2000}) {
        const DickeState s = oracles::random_state(n, rng);
        const auto axis = random_unit_axis(rng);
        const double angle = rng.uniform() * 2.0 * kPi;
        const DickeState r = rotate(s, axis, angle);
        REQUIRE(std::abs(r.norm_squared() - 1.0) < 1e-9);
        if (n <= 300) {
            const auto ev_before = sorted_cov_eigenvalues(spin_moments(s));
            const auto ev_after = sorted_cov_eigenvalues(spin_moments(r));
            for (int i = 0; i < 3; ++i)
                REQUIRE(std::abs(ev_before[static_cast<std::size_t>(i)] -
                                 ev_after[static_cast<std::size_t>(i)]) <
                        1e-8 * std::max(1.0, std::abs(ev_before[2])));
        }
        // Rotating back returns the state (up to a global phase).
        const DickeState back = rotate(r, axis, -angle);
        REQUIRE(oracles::state_distance_up_to_phase(back, s) < 1e-9);
    }
}

TEST_CASE("measurement-axis rotations map the labeled component onto z") {
    // A coherent state tipped slightly off +x gives distinct x, y, z means.
    const DickeState s = rotate(coherent_state(36, 0.5 * kPi, 0.25), {1.0, 0.0, 0.0}, 0.15);
    const SpinMoments m = spin_moments(s);
    const double tol = 1e-9;

    const SpinMoments mp = spin_moments(rotate_to_axis(s, Axis::plus_x));
    REQUIRE(std::abs(mp.mean[2] - m.mean[0]) < tol);
    const SpinMoments mm = spin_moments(rotate_to_axis(s, Axis::minus_x));
    REQUIRE(std::abs(mm.mean[2] + m.mean[0]) < tol);
    const SpinMoments my = spin_moments(rotate_to_axis(s, Axis::y));
    REQUIRE(std::abs(my.mean[2] - m.mean[1]) < tol);
    const SpinMoments mz = spin_moments(rotate_to_axis(s, Axis::z));
    REQUIRE(std::abs(mz.mean[2] - m.mean[2]) < tol);

    // z carries the identity rotation.
    REQUIRE(axis_rotation(Axis::z).angle == 0.0);
}

TEST_CASE("axis labels round-trip") {
    for (Axis a : {Axis::plus_x, Axis::minus_x, Axis::y, Axis::z})
        REQUIRE(axis_from_label(axis_label(a)) == a);
    REQUIRE_THROWS_AS(axis_from_label("sideways"), Error);
}
