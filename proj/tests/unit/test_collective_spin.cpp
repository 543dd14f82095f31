#include <cmath>

#include "doctest.h"

#include "sqclock/collective_spin.hpp"
#include "sqclock/constants.hpp"
#include "sqclock/error.hpp"
#include "sqclock/rng.hpp"

using namespace sqclock;
using namespace sqclock::spin;

namespace {

// Rodrigues rotation, written independently of the library's AngleAxis use.
Vec3 rodrigues(const Vec3& v, const Vec3& axis, double angle)
{
    const Vec3 k = axis.normalized();
    return v * std::cos(angle) + k.cross(v) * std::sin(angle) + k * k.dot(v) * (1.0 - std::cos(angle));
}

Vec3 equatorial_axis(double azimuth) { return {std::cos(azimuth), std::sin(azimuth), 0.0}; }

}  // namespace

TEST_CASE("coherent state has quantum-projection variance and saturates the uncertainty bound")
{
    const GaussianSpinState s = make_css(390000);
    CHECK(s.contrast() == doctest::Approx(1.0));
    CHECK(s.var_jz() == doctest::Approx(390000 / 4.0));
    CHECK(s.var_jy() == doctest::Approx(390000 / 4.0));
    CHECK(s.satisfies_uncertainty(1e-9));
    CHECK(std::abs(s.polar_tilt()) < 1e-15);
}

TEST_CASE("pole state points down")
{
    const GaussianSpinState s = make_css_at_pole(1000);
    CHECK(s.mean_jz() == doctest::Approx(-500));
    CHECK(make_css_at_pole(1000, false).mean_jz() == doctest::Approx(500));
}

TEST_CASE("invalid construction is rejected")
{
    CHECK_THROWS_AS(GaussianSpinState(0.5, Vec3::Zero(), Mat3::Identity()), ValidationError);
    CHECK_THROWS_AS(GaussianSpinState(100, Vec3(60, 0, 0), Mat3::Identity()), ValidationError);
    Mat3 bad = Mat3::Identity();
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(GaussianSpinState(100, Vec3(10, 0, 0), bad), ValidationError);
}

TEST_CASE("rotation matches an independent Rodrigues rotation")
{
    Rng rng(7);
    for (int i = 0; i < 50; ++i) {
        const double az = rng.uniform(-kPi, kPi);
        const double angle = rng.uniform(0.0, 2.0 * kPi);
        const double eps = rng.uniform(-0.05, 0.05);
        const GaussianSpinState s = make_css(1e5);
        const GaussianSpinState r = rotate(s, Rotation::equatorial(az, angle, eps));
        const Vec3 want = rodrigues(s.mean(), equatorial_axis(az), angle * (1.0 + eps));
        CHECK((r.mean() - want).norm() < 1e-9 * 5e4);
    }
}

TEST_CASE("rotations preserve spin length, covariance trace and the uncertainty bound")
{
    Rng rng(11);
    GaussianSpinState s = presqueeze(make_css(390000), -6.0, kPi / 12.0);
    const double length = s.mean().norm();
    const double trace = s.covariance().trace();
    for (int i = 0; i < 40; ++i) {
        const bool polar = rng.uniform(0.0, 1.0) < 0.3;
        const double angle = rng.uniform(-kPi, kPi);
        s = rotate(s, polar ? Rotation::about_z(angle) : Rotation::equatorial(rng.uniform(-kPi, kPi), angle));
        CHECK(s.mean().norm() == doctest::Approx(length).epsilon(1e-12));
        CHECK(s.covariance().trace() == doctest::Approx(trace).epsilon(1e-10));
        CHECK(s.satisfies_uncertainty(1e-6));
    }
}

TEST_CASE("composite pulse cancels the first-order amplitude error")
{
    auto error = [](bool composite, double eps) {
        const GaussianSpinState start = make_css_at_pole(1e6);
        auto run = [&](double e) {
            return composite ? composite_pi_half(start, e) : rotate(start, Rotation::equatorial(0.0, kPi / 2.0, e));
        };
        return (run(eps).mean().normalized() - run(0.0).mean().normalized()).norm();
    };
    const double composite_exp = std::log10(error(true, 1e-2) / error(true, 1e-3));
    const double plain_exp = std::log10(error(false, 1e-2) / error(false, 1e-3));
    CHECK(composite_exp >= 1.9);
    CHECK(composite_exp <= 2.1);
    CHECK(plain_exp == doctest::Approx(1.0).epsilon(0.02));
    // Ideal composite pulse lands on the equator.
    CHECK(std::abs(composite_pi_half(make_css_at_pole(1e6), 0.0).mean_jz()) < 1e-6);
}

TEST_CASE("pre-squeezing reaches the target variance and keeps the state minimum-uncertainty")
{
    for (double target : {-3.0, -6.0, -9.0}) {
        const GaussianSpinState s = presqueeze(make_css(390000), target, kPi / 12.0);
        CHECK(variance_db(s.var_jz() / (390000 / 4.0)) == doctest::Approx(target).epsilon(1e-6));
        CHECK(s.satisfies_uncertainty(1e-6));
        CHECK(s.var_jy() > 390000 / 4.0);
    }
}

TEST_CASE("contrast decay scales the mean and leaves fluctuations")
{
    const GaussianSpinState s = make_css(1000);
    const GaussianSpinState d = apply_contrast_decay(s, 0.91);
    CHECK(d.contrast() == doctest::Approx(0.91));
    CHECK(d.var_jz() == doctest::Approx(s.var_jz()));
    CHECK_THROWS_AS(apply_contrast_decay(s, 1.2), ValidationError);
    CHECK_THROWS_AS(apply_contrast_decay(s, 0.0), ValidationError);
}

TEST_CASE("Wineland parameter of a coherent state is one")
{
    CHECK(wineland_parameter(390000 / 4.0, 390000, 1.0) == doctest::Approx(1.0));
    CHECK(wineland_parameter(390000 / 4.0 * db_to_variance(-6.6), 390000, 0.917) ==
          doctest::Approx(db_to_variance(-6.6) / (0.917 * 0.917)));
    CHECK_THROWS_AS(wineland_parameter(1.0, 100, 0.0), ValidationError);
}

TEST_CASE("sampled Jz reproduces the state's moments on the equator")
{
    const GaussianSpinState s = presqueeze(make_css(390000), -6.0, kPi / 12.0);
    Rng rng(3);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = sample_jz(s, rng);
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 5.0 * std::sqrt(s.var_jz() / n));
    CHECK(var == doctest::Approx(s.var_jz()).epsilon(0.02));
}

TEST_CASE("tilted anti-squeezed state picks up the curvature term")
{
    // Anti-squeezed azimuthal quadrature, tilted by theta about the mean axis.
    const double n = 240000;
    const double g2 = db_to_variance(37.0);
    Mat3 cov = Mat3::Zero();
    cov(1, 1) = g2 * n / 4.0;
    cov(2, 2) = n / 4.0 / g2;
    const GaussianSpinState flat(n, Vec3(0.5 * n, 0, 0), cov);
    const double theta = 0.15;
    const GaussianSpinState tilted = rotate(flat, Rotation::equatorial(kPi / 2.0, -theta));
    CHECK(tilted.polar_tilt() == doctest::Approx(theta).epsilon(1e-9));

    Rng rng(5);
    const int shots = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < shots; ++i) {
        const double z = sample_jz(tilted, rng);
        sum += z;
        sq += z * z;
    }
    const double var = sq / shots - (sum / shots) * (sum / shots);
    const double slope = 0.5 * n * std::cos(theta);
    const double dtheta_sq = var / (slope * slope);
    const double g = g2 - 1.0 / g2;
    const double want = 1.0 / (g2 * n) + g * g * std::tan(theta) * std::tan(theta) / (2.0 * n * n);
    CHECK(dtheta_sq == doctest::Approx(want).epsilon(0.05));
}

TEST_CASE("readout contrast factor follows the transverse spread")
{
    const double n = 390000;
    CHECK(readout_contrast_factor(make_css(n)) == doctest::Approx(std::exp(-1.0 / n)));
    Mat3 cov = Mat3::Zero();
    cov(1, 1) = db_to_variance(37.0) * n / 4.0;
    const GaussianSpinState s(n, Vec3(0.45 * n, 0, 0), cov);
    CHECK(visible_contrast(s) == doctest::Approx(0.9 * std::exp(-db_to_variance(37.0) / (2.0 * n))));
}
