#include "sqclock/collective_spin.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sqclock/constants.hpp"
#include "sqclock/error.hpp"

namespace sqclock::spin {
namespace {

struct TangentFrame {
    Vec3 radial;
    Vec3 polar;      // toward +z along the meridian
    Vec3 azimuthal;  // along the latitude circle
};

TangentFrame tangent_frame(const Vec3& mean)
{
    const double norm = mean.norm();
    const Vec3 radial = norm > 0.0 ? Vec3(mean / norm) : Vec3::UnitX();
    const double rxy = std::hypot(radial.x(), radial.y());
    Vec3 azimuthal;
    if (rxy > 1e-12) {
        azimuthal = Vec3(-radial.y() / rxy, radial.x() / rxy, 0.0);
    } else {
        // At a pole every transverse direction is azimuthal; pick y.
        azimuthal = Vec3::UnitY();
    }
    const Vec3 polar = radial.cross(azimuthal);
    return {radial, polar, azimuthal};
}

Mat3 css_covariance(double n_atoms, const Vec3& direction)
{
    const Vec3 u = direction.normalized();
    return (n_atoms / 4.0) * (Mat3::Identity() - u * u.transpose());
}

void require_finite(double v, const char* what)
{
    if (!std::isfinite(v)) {
        throw ValidationError(std::string(what) + " must be finite");
    }
}

}  // namespace

GaussianSpinState::GaussianSpinState(double n_atoms, const Vec3& mean, const Mat3& covariance)
    : n_atoms_(n_atoms), mean_(mean), cov_(0.5 * (covariance + covariance.transpose()))
{
    if (!(n_atoms >= 1.0) || !std::isfinite(n_atoms)) {
        throw ValidationError("atom number must be >= 1, got " + std::to_string(n_atoms));
    }
    if (!mean.allFinite() || !covariance.allFinite()) {
        throw ValidationError("spin state moments must be finite");
    }
    if (mean.norm() > 0.5 * n_atoms * (1.0 + 1e-12)) {
        throw ValidationError("mean spin length exceeds N/2");
    }
}

double GaussianSpinState::contrast() const { return mean_.norm() / (0.5 * n_atoms_); }

double GaussianSpinState::mean_azimuth() const { return std::atan2(mean_.y(), mean_.x()); }

double GaussianSpinState::polar_tilt() const
{
    const double norm = mean_.norm();
    if (norm == 0.0) {
        return 0.0;
    }
    return std::asin(std::clamp(mean_.z() / norm, -1.0, 1.0));
}

double GaussianSpinState::var_jy() const
{
    const Vec3 a = tangent_frame(mean_).azimuthal;
    return a.dot(cov_ * a);
}

Mat2 GaussianSpinState::transverse_covariance() const
{
    const TangentFrame f = tangent_frame(mean_);
    Eigen::Matrix<double, 3, 2> basis;
    basis.col(0) = f.polar;
    basis.col(1) = f.azimuthal;
    return basis.transpose() * cov_ * basis;
}

bool GaussianSpinState::satisfies_uncertainty(double rel_tol) const
{
    const Mat2 t = transverse_covariance();
    const double det = t.determinant();
    const double bound = 0.5 * mean_.norm();
    if (t(0, 0) <= 0.0 || t(1, 1) <= 0.0 || det <= 0.0) {
        return false;
    }
    return std::sqrt(det) >= bound * (1.0 - rel_tol);
}

Mat3 Rotation::matrix() const
{
    const double a = applied_angle();
    if (axis == Axis::Polar) {
        return Eigen::AngleAxisd(a, Vec3::UnitZ()).toRotationMatrix();
    }
    const Vec3 n(std::cos(axis_azimuth), std::sin(axis_azimuth), 0.0);
    return Eigen::AngleAxisd(a, n).toRotationMatrix();
}

GaussianSpinState make_css(double n_atoms)
{
    if (!(n_atoms >= 1.0)) {
        throw ValidationError("make_css: atom number must be >= 1");
    }
    const Vec3 mean(0.5 * n_atoms, 0.0, 0.0);
    return {n_atoms, mean, css_covariance(n_atoms, mean)};
}

GaussianSpinState make_css_at_pole(double n_atoms, bool south)
{
    if (!(n_atoms >= 1.0)) {
        throw ValidationError("make_css_at_pole: atom number must be >= 1");
    }
    const Vec3 mean(0.0, 0.0, (south ? -0.5 : 0.5) * n_atoms);
    return {n_atoms, mean, css_covariance(n_atoms, mean)};
}

GaussianSpinState rotate(const GaussianSpinState& state, const Rotation& r)
{
    require_finite(r.angle, "rotation angle");
    if (!(r.amplitude_error > -1.0)) {
        throw ValidationError("rotation amplitude error must exceed -1");
    }
    const Mat3 m = r.matrix();
    return {state.n_atoms(), m * state.mean(), m * state.covariance() * m.transpose()};
}

GaussianSpinState composite_pi_half(const GaussianSpinState& state, double eps)
{
    const GaussianSpinState first = rotate(state, Rotation::equatorial(0.0, kPi / 2.0, eps));
    return rotate(first, Rotation::equatorial(2.0 * kPi / 3.0, kPi, eps));
}

GaussianSpinState oat_shear(const GaussianSpinState& state, double shear)
{
    require_finite(shear, "shear");
    if (shear == 0.0) {
        return state;
    }
    const TangentFrame f = tangent_frame(state.mean());
    const Mat3 s = Mat3::Identity() + shear * f.azimuthal * Vec3::UnitZ().transpose();
    const Mat3 cov = s * state.covariance() * s.transpose();

    Vec3 mean = state.mean();
    const double rxy = std::hypot(mean.x(), mean.y());
    if (rxy > 0.0 && mean.z() != 0.0) {
        mean = Eigen::AngleAxisd(shear * mean.z() / rxy, Vec3::UnitZ()) * mean;
    }
    return {state.n_atoms(), mean, cov};
}

double presqueeze_shear(double target_db, double realign_angle)
{
    // var_jz/(N/4) after twist s and realignment a:
    //   cos^2 a + (1 + s^2) sin^2 a - 2 s |sin a cos a|
    const double target = db_to_variance(target_db);
    const double s2 = std::sin(realign_angle) * std::sin(realign_angle);
    const double sc = std::abs(std::sin(realign_angle) * std::cos(realign_angle));
    if (s2 == 0.0) {
        throw ValidationError("presqueeze: realignment angle must be non-zero");
    }
    const double disc = sc * sc - s2 * (1.0 - target);
    if (disc < 0.0) {
        throw ValidationError("presqueeze: target " + std::to_string(target_db) +
                              " dB is below the reachable minimum for this realignment");
    }
    return (sc - std::sqrt(disc)) / s2;
}

GaussianSpinState presqueeze(const GaussianSpinState& state, double target_db, double realign_angle)
{
    const double shear = presqueeze_shear(target_db, realign_angle);
    const GaussianSpinState twisted = oat_shear(state, shear);
    const double axis = twisted.mean_azimuth();
    GaussianSpinState plus = rotate(twisted, Rotation::equatorial(axis, realign_angle));
    GaussianSpinState minus = rotate(twisted, Rotation::equatorial(axis, -realign_angle));
    return plus.var_jz() < minus.var_jz() ? plus : minus;
}

GaussianSpinState apply_contrast_decay(const GaussianSpinState& state, double c_factor)
{
    if (!(c_factor > 0.0 && c_factor <= 1.0)) {
        throw ValidationError("contrast decay factor must lie in (0, 1], got " + std::to_string(c_factor));
    }
    return {state.n_atoms(), c_factor * state.mean(), state.covariance()};
}

double readout_contrast_factor(const GaussianSpinState& state)
{
    const double half_n = 0.5 * state.n_atoms();
    return std::exp(-state.transverse_covariance().trace() / (2.0 * half_n * half_n));
}

double visible_contrast(const GaussianSpinState& state)
{
    return state.contrast() * readout_contrast_factor(state);
}

double wineland_parameter(double var_jz, double n_atoms, double contrast)
{
    if (!(contrast > 0.0 && contrast <= 1.0)) {
        throw ValidationError("wineland_parameter: contrast must lie in (0, 1]");
    }
    if (!(var_jz > 0.0) || !(n_atoms >= 1.0)) {
        throw ValidationError("wineland_parameter: need var_jz > 0 and n >= 1");
    }
    return (var_jz / (n_atoms / 4.0)) / (contrast * contrast);
}

double sample_jz(const GaussianSpinState& state, Rng& rng)
{
    Eigen::SelfAdjointEigenSolver<Mat3> eig(state.covariance());
    const Vec3 lambda = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Vec3 w(rng.normal(), rng.normal(), rng.normal());
    const Vec3 delta = eig.eigenvectors() * lambda.cwiseProduct(w);

    const double radius = state.mean().norm();
    if (radius == 0.0) {
        return delta.z();
    }
    const Vec3 dir = state.mean() / radius;
    const double radial = dir.dot(delta);
    const Vec3 tangent = delta - radial * dir;
    const double t = tangent.norm();
    if (t == 0.0) {
        return (radius + radial) * dir.z();
    }
    // The tangential arc is laid out on the full-length sphere (radius N/2),
    // so the linear part is unchanged and the mean drops by cos(angle).
    const double half_n = 0.5 * state.n_atoms();
    const double angle = t / half_n;
    return (radius + radial) * std::cos(angle) * dir.z() + half_n * std::sin(angle) * tangent.z() / t;
}

}  // namespace sqclock::spin
