#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sqclock/constants.hpp"
#include "sqclock/experiment.hpp"

namespace sqclock::analysis {

// ---------------------------------------------------------------------------
// Record preparation and post-selection

/// Probe reading with the beatnote correction applied.
double inferred_qnd(double raw_jz, double delta_hz, const ExperimentConfig& cfg);

/// Difference observable Jz^(12): fluorescence minus the last QND reading
/// (beatnote-corrected). Sequences without a probe use the fluorescence value.
double observable_jz(const ShotRecord& r, const ExperimentConfig& cfg);

struct RemovalReport {
    std::size_t total = 0;
    std::size_t removed = 0;
    std::size_t qnd_out_of_range = 0;
    std::size_t fluor_failed = 0;
    std::size_t clock_outliers = 0;
    std::size_t position_out_of_span = 0;

    double removed_fraction() const { return total == 0 ? 0.0 : static_cast<double>(removed) / static_cast<double>(total); }
};

struct PostSelection {
    std::vector<ShotRecord> flagged;  ///< every input record with flags re-derived
    std::vector<ShotRecord> kept;
    RemovalReport report;
};

/// Flag shots outside the probe's linear range (first reading), failed
/// fluorescence, and for clock data |Jz^(12) - mean| > 6 sqrt(N)/2 iterated to
/// a fixed point. Flags set by other stages are preserved.
PostSelection post_select(std::span<const ShotRecord> records, const ExperimentConfig& cfg);

/// Replace J'z with the data-set mean atom number, fit and apply the
/// pushed-cloud position correction, then post-select. Calibration shots are
/// those with theta_true == 0 and pulse_area == 0.
PostSelection prepare_records(std::span<const ShotRecord> records, const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Squeezing

struct SqueezingMetrics {
    double variance_reduction_db;  ///< Xi^2 = var(Jz12)/(N/4)
    double wineland_db;            ///< xi^2 = Xi^2 / C^2
    double delta_theta;            ///< std(Jz12) / (C N/2), radians
    std::size_t samples;
};

SqueezingMetrics squeezing_metrics(std::span<const double> jz12, double n_atoms, double contrast);
/// Uses the kept records' Jz^(12) values.
SqueezingMetrics squeezing_metrics(std::span<const ShotRecord> kept, const ExperimentConfig& cfg, double contrast);

// ---------------------------------------------------------------------------
// Clock stability

struct StabilityCurve {
    std::vector<double> taus;
    std::vector<double> sigma_y;
    std::vector<double> ci_low;
    std::vector<double> ci_high;
    std::vector<std::size_t> n_pairs_used;
};

/// 1/(omega0 T_int) sqrt(T_c / (n tau)).
double qpn_stability(double ramsey_s, double cycle_s, double n_atoms, double tau_s, double omega0 = kClockOmega0);

double metrological_gain_db(double sigma_y, double qpn_sigma_y);

/// Gap-aware two-sample deviation of a phase series sampled every cycle_s.
/// Invalid samples are skipped when averaging bins; pairs touching an empty
/// bin are dropped and the sum renormalized by the pairs kept.
/// M = floor(T / tau) with T = samples * cycle_s.
StabilityCurve allan_deviation(std::span<const double> phi, std::span<const bool> valid, double cycle_s,
                               std::span<const double> taus, double confidence = 0.68);

/// phi(t) = Jz12 / (C (N/2) T_int omega0); flagged shots are gaps.
StabilityCurve allan_deviation(std::span<const ShotRecord> records, const ExperimentConfig& cfg, double contrast,
                               std::span<const double> taus, double confidence = 0.68);

std::vector<double> phase_series(std::span<const ShotRecord> records, const ExperimentConfig& cfg, double contrast);

// ---------------------------------------------------------------------------
// Error bars

/// Chi-squared confidence bounds on a standard deviation estimated from
/// n_samples values at confidence m (e.g. 0.68): lower uses the (1+m)/2
/// quantile of chi^2_{n-1}, upper the (1-m)/2 quantile.
std::pair<double, double> chi2_interval(double stddev, std::size_t n_samples, double confidence);

/// Sum (n_i - 1) s_i / sum (n_j - 1). Pools standard deviations linearly, as
/// the combination rule is usually quoted for these data sets; note this is
/// not the textbook pooled variance.
double pooled_std(std::span<const double> stds, std::span<const std::size_t> ns);

struct PooledResult {
    double stddev;
    double ci_low;
    double ci_high;
    std::size_t n_for_ci;  ///< smallest n_i
};

PooledResult pool_datasets(std::span<const double> stds, std::span<const std::size_t> ns, double confidence);

// ---------------------------------------------------------------------------
// Fits

struct RabiFit {
    double contrast;   ///< fitted amplitude
    double frequency;  ///< per radian of pulse area
    double phase;
    double offset;
    double residual_rms;
    int iterations;
};

/// Least-squares sinusoid y = a sin(w x + p) + d (Levenberg-Marquardt).
RabiFit fit_rabi(std::span<const std::pair<double, double>> scan);

struct DynamicRangeFit {
    double xi_sq;
    double gamma_sq;
    double delta_x0;        ///< radians
    double residual_norm;   ///< radians, sqrt(sum r^2)
};

/// Delta theta(theta) = sqrt(xi^2/N + (G^2 - G^-2)^2 tan^2(theta) / (2N^2) + dX0^2).
double dynamic_range_model(double theta, double n_atoms, double xi_sq, double gamma_sq, double delta_x0);

/// One-parameter least squares over Gamma^2 with xi^2 and dX0 held fixed.
DynamicRangeFit fit_dynamic_range(std::span<const std::pair<double, double>> points, double n_atoms,
                                  double xi_sq, double delta_x0);

/// Positive angle at which the model reaches the QPN limit 1/sqrt(N).
double qpn_crossing(const DynamicRangeFit& fit, double n_atoms);

// ---------------------------------------------------------------------------
// Noise budget

struct BudgetEntry {
    std::string label;
    double db;
};

struct NoiseBudget {
    std::vector<BudgetEntry> entries;
    double total_db;
};

/// 10 log10(sum 10^(dB/10)).
double power_sum_db(std::span<const double> dbs);

NoiseBudget make_budget(std::vector<BudgetEntry> entries);

/// Technical noise on the fluorescence-vs-probe difference, relative to the
/// QPN at cfg.n_atoms, from the configured models.
NoiseBudget noise_budget(const ExperimentConfig& cfg);

/// The nominal published contributions (-11, -14, -16, -18 dB).
NoiseBudget nominal_budget();

}  // namespace sqclock::analysis
