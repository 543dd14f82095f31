#pragma once

#include <optional>
#include <span>

#include "sqclock/collective_spin.hpp"
#include "sqclock/rng.hpp"

namespace sqclock::measure {

/// Cavity QND probe. Spin-unit quantities are in units of hbar (Jz = (N_up - N_down)/2).
struct QndConfig {
    double prepared_var_jz_db = -14.0;   ///< posterior variance from a CSS prior, dB vs N/4
    double antisqueeze_var_jy_db = 37.0; ///< back-action floor on the conjugate quadrature
    double linear_range_jz = 160.0;      ///< +-1 kHz cavity shift
    double cal_hz_per_jz = 6.25;
    double mean_detuning_hz = 3.417e9;
    double beatnote_span_hz = 3.0e6;     ///< per-shot delta uniform on [-span, span]
    double thermal_beta_sq = 0.076;
    double contrast_after_qnd = 0.91;

    void validate() const;
};

struct FluorConfig {
    double photons_per_atom = 65.0;
    /// Std of X = (x_up - x_down)/2 in photon counts, background after
    /// double-exposure subtraction. Default gives -14 dB at N = 390000.
    double background_sigma_photons = 4049.6;
    double background_correlation = 0.5;
    double position_sigma_mm = 0.17;
    double position_efficiency_slope = 0.02;  ///< fractional collection change per mm, pushed cloud
    double photons_per_atom_jitter = 0.025;   ///< common-mode fractional jitter of alpha
    double unidentified_noise_db = -11.0;     ///< dB vs QPN at the shot's atom number

    void validate() const;
};

struct FluorOutcome {
    double counts_up = 0.0;    ///< background-subtracted, may be negative
    double counts_down = 0.0;
    double pushed_position_mm = 0.0;
    double normalized_jz = 0.0;

    bool operator==(const FluorOutcome&) const = default;
};

struct QndResult {
    double outcome_jz;
    spin::GaussianSpinState posterior;
};

/// Variance of the probe's readout error (spin units^2) that conditions a CSS
/// of n atoms down to `prepared_var_jz_db`.
double resolution_variance(const QndConfig& cfg, double n_atoms);

/// sqrt(n) beta^2 / sqrt(1 + 2 beta^2), spin units. QND readout only.
double thermal_inhomogeneity_noise(double n_atoms, double beta_sq);

/// Sample a QND outcome and condition the state on it. The outcome carries
/// the probe resolution and the thermal-inhomogeneity error; the posterior is
/// the exact Gaussian conditional on that outcome. Afterwards the azimuthal
/// quadrature is raised to the anti-squeezing floor and the contrast is
/// capped at contrast_after_qnd (as seen by a readout, see visible_contrast()).
QndResult qnd_measure(const spin::GaussianSpinState& state, const QndConfig& cfg, Rng& rng);

/// Offset the probe's detuning fluctuation puts on a raw reading:
/// measured = true - n delta / (2 Delta).
double beatnote_offset(double n_atoms, double delta_hz, const QndConfig& cfg);

/// Jz_inferred = Jz_measured + n delta / (2 Delta). Rejects |delta/Delta| > 0.01.
double beatnote_correct(double measured_jz, double n_atoms, double delta_hz, const QndConfig& cfg);

/// Photon shot-noise contribution to inferred Jz: sqrt(n)/2 / sqrt(alpha).
double photon_noise_jz(double n_atoms, double photons_per_atom);
/// Background contribution Delta X / alpha, spin units.
double background_noise_jz(const FluorConfig& cfg);
/// Background sigma (photon counts) that yields `target_db` vs QPN at n atoms.
double background_sigma_for(double target_db, double n_atoms, double photons_per_atom);
double unidentified_noise_jz(const FluorConfig& cfg, double n_atoms);

/// J'z = (mean_n/2) (N_up - N_down)/(N_up + N_down), N_i = counts_i / alpha.
double normalized_jz(double counts_up, double counts_down, double mean_n, double photons_per_atom);

/// Push the |up> cloud, fluoresce both, and count photons.
FluorOutcome push_and_fluoresce(double jz_true, double n_atoms, const FluorConfig& cfg, Rng& rng);

/// Linear model of the up/down photon ratio on the pushed-cloud position,
/// ratio = intercept + slope * x, fit on equator-prepared shots.
struct PositionFit {
    double slope = 0.0;
    double intercept = 1.0;
    double slope_stderr = 0.0;
    double span_lo_mm = 0.0;
    double span_hi_mm = 0.0;

    double ratio_at(double x_mm) const { return intercept + slope * x_mm; }
};

PositionFit fit_position_efficiency(std::span<const FluorOutcome> calibration);

struct CorrectedOutcome {
    FluorOutcome outcome;
    bool outside_span = false;
};

/// Divide the pushed-cloud counts by the fitted ratio at the shot's position.
/// Shots outside the calibration span are flagged; the model is never
/// evaluated more than one span width beyond either edge.
CorrectedOutcome position_correction(const FluorOutcome& outcome, const PositionFit& fit,
                                     double mean_n, double photons_per_atom);

}  // namespace sqclock::measure
