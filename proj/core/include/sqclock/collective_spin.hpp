#pragma once

#include <Eigen/Dense>

#include "sqclock/rng.hpp"

namespace sqclock::spin {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat2 = Eigen::Matrix2d;

/// Collective pseudo-spin of N two-level atoms in Gaussian-moment form.
///
/// The mean Bloch vector lives in lab coordinates (x, y, z) with |mean| =
/// C * N/2. Fluctuations are a 3x3 covariance that is (numerically) confined
/// to the plane transverse to the mean; rotations act on both as R.mu and
/// R.Sigma.R^T. For a state on the equator pointing at azimuth phi, the
/// "Jy" quadrature is the azimuthal tangent direction and "Jz" is the pole.
class GaussianSpinState {
public:
    GaussianSpinState(double n_atoms, const Vec3& mean, const Mat3& covariance);

    double n_atoms() const { return n_atoms_; }
    const Vec3& mean() const { return mean_; }
    const Mat3& covariance() const { return cov_; }

    /// |J| / (N/2).
    double contrast() const;
    double mean_jz() const { return mean_.z(); }
    /// Azimuth of the mean spin in the equatorial plane, radians.
    double mean_azimuth() const;
    /// Latitude of the mean spin above the equator, radians.
    double polar_tilt() const;

    double var_jz() const { return cov_(2, 2); }
    /// Variance along the azimuthal tangent of the mean spin.
    double var_jy() const;

    /// Covariance in the (polar tangent, azimuthal tangent) basis at the mean.
    Mat2 transverse_covariance() const;

    /// sqrt(det transverse) >= |J|/2, with relative slack `rel_tol`.
    bool satisfies_uncertainty(double rel_tol = 1e-9) const;

private:
    double n_atoms_;
    Vec3 mean_;
    Mat3 cov_;
};

enum class Axis { Equatorial, Polar };

/// Microwave or virtual rotation. Equatorial axes are given by their azimuth;
/// polar rotations turn the state about z. The applied angle is
/// angle * (1 + amplitude_error).
struct Rotation {
    Axis axis = Axis::Equatorial;
    double axis_azimuth = 0.0;
    double angle = 0.0;
    double amplitude_error = 0.0;

    static Rotation equatorial(double azimuth, double angle, double amplitude_error = 0.0)
    {
        return {Axis::Equatorial, azimuth, angle, amplitude_error};
    }
    static Rotation about_z(double angle) { return {Axis::Polar, 0.0, angle, 0.0}; }

    double applied_angle() const { return angle * (1.0 + amplitude_error); }
    Mat3 matrix() const;
};

/// Coherent spin state on the equator, pointing along +x.
GaussianSpinState make_css(double n_atoms);

/// Coherent spin state at a pole; south pole is |down>, Jz = -N/2.
GaussianSpinState make_css_at_pole(double n_atoms, bool south = true);

GaussianSpinState rotate(const GaussianSpinState& state, const Rotation& r);

/// Two-pulse amplitude-robust preparation from a pole: pi/2 about azimuth 0
/// followed by pi about azimuth 120 deg, both scaled by (1 + eps).
GaussianSpinState composite_pi_half(const GaussianSpinState& state, double eps);

/// Linearized one-axis twisting. Each unit of Jz deviation moves the state by
/// `shear` spin units along the azimuthal tangent. The mean is turned about z
/// by shear * mean_jz / |J_xy|.
GaussianSpinState oat_shear(const GaussianSpinState& state, double shear);

/// Shear magnitude that, followed by a realignment rotation of
/// `realign_angle` about the mean spin, brings a CSS to `target_db` of
/// variance below N/4. Returns the smaller root.
double presqueeze_shear(double target_db, double realign_angle);

/// Twist with presqueeze_shear() and realign by `realign_angle` about the
/// mean-spin axis (sense chosen to reduce var_jz).
GaussianSpinState presqueeze(const GaussianSpinState& state, double target_db, double realign_angle);

GaussianSpinState apply_contrast_decay(const GaussianSpinState& state, double c_factor);

/// Mean shortening a readout sees from the transverse spread,
/// E[cos(|t|/(N/2))] ~ exp(-tr(transverse) / (2 (N/2)^2)). See sample_jz().
double readout_contrast_factor(const GaussianSpinState& state);

/// contrast() * readout_contrast_factor(): what a Rabi fit would recover.
double visible_contrast(const GaussianSpinState& state);

/// Wineland parameter xi^2 = (var_jz / (n/4)) / C^2, linear units.
double wineland_parameter(double var_jz, double n_atoms, double contrast);

/// Draw a Jz readout value. A deviation is sampled from the covariance; its
/// tangential part t is laid out along a great circle of radius N/2 (angle
/// |t|/(N/2)), so the mean shortens by cos(angle); the radial part changes
/// the length. For a tilted state this
/// projects the anti-squeezed quadrature into Jz at second order, giving a
/// phase variance tan^2(theta) G^4 / (2 N^2) with G^2 = var_jy/(N/4).
double sample_jz(const GaussianSpinState& state, Rng& rng);

}  // namespace sqclock::spin
