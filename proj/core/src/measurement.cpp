#include "sqclock/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sqclock/constants.hpp"
#include "sqclock/error.hpp"

namespace sqclock::measure {

using spin::GaussianSpinState;
using spin::Mat3;
using spin::Vec3;

void QndConfig::validate() const
{
    if (!(linear_range_jz > 0.0)) {
        throw ValidationError("qnd.linear_range_jz must be > 0");
    }
    if (!(prepared_var_jz_db < 0.0)) {
        throw ValidationError("qnd.prepared_var_jz_db must be < 0 (a squeezing target)");
    }
    if (!(mean_detuning_hz > 0.0) || !(beatnote_span_hz >= 0.0) ||
        !(beatnote_span_hz < 0.01 * mean_detuning_hz)) {
        throw ValidationError("qnd: beatnote span must be >= 0 and << mean detuning");
    }
    if (!(thermal_beta_sq >= 0.0 && thermal_beta_sq < 1.0)) {
        throw ValidationError("qnd.thermal_beta_sq must lie in [0, 1)");
    }
    if (!(contrast_after_qnd > 0.0 && contrast_after_qnd <= 1.0)) {
        throw ValidationError("qnd.contrast_after_qnd must lie in (0, 1]");
    }
    if (!(cal_hz_per_jz > 0.0)) {
        throw ValidationError("qnd.cal_hz_per_jz must be > 0");
    }
}

void FluorConfig::validate() const
{
    if (!(photons_per_atom > 0.0)) {
        throw ValidationError("fluor.photons_per_atom must be > 0");
    }
    if (!(background_sigma_photons >= 0.0) || !(position_sigma_mm >= 0.0) ||
        !(photons_per_atom_jitter >= 0.0)) {
        throw ValidationError("fluor: noise magnitudes must be >= 0");
    }
    if (!(background_correlation >= -1.0 && background_correlation <= 1.0)) {
        throw ValidationError("fluor.background_correlation must lie in [-1, 1]");
    }
    if (background_correlation == 1.0 && background_sigma_photons > 0.0) {
        throw ValidationError("fluor: fully correlated backgrounds cannot produce a non-zero X noise");
    }
    if (!std::isfinite(position_efficiency_slope) || !std::isfinite(unidentified_noise_db)) {
        throw ValidationError("fluor: slope and unidentified noise must be finite");
    }
}

double resolution_variance(const QndConfig& cfg, double n_atoms)
{
    return (n_atoms / 4.0) / (db_to_variance(-cfg.prepared_var_jz_db) - 1.0);
}

double thermal_inhomogeneity_noise(double n_atoms, double beta_sq)
{
    if (beta_sq < 0.0) {
        throw ValidationError("thermal_inhomogeneity_noise: beta^2 must be >= 0");
    }
    return std::sqrt(n_atoms) * beta_sq / std::sqrt(1.0 + 2.0 * beta_sq);
}

QndResult qnd_measure(const GaussianSpinState& state, const QndConfig& cfg, Rng& rng)
{
    const double n = state.n_atoms();
    const double thermal = thermal_inhomogeneity_noise(n, cfg.thermal_beta_sq);
    const double readout_var = resolution_variance(cfg, n) + thermal * thermal;

    const Mat3& cov = state.covariance();
    const double prior_var = cov(2, 2);
    const double outcome = state.mean_jz() + std::sqrt(prior_var + readout_var) * rng.normal();

    // Gaussian conditioning of the full moment set on the Jz readout.
    const Vec3 cross = cov.col(2);
    const double innovation_var = prior_var + readout_var;
    Vec3 mean = state.mean() + cross * ((outcome - state.mean_jz()) / innovation_var);
    Mat3 post = cov - cross * cross.transpose() / innovation_var;

    GaussianSpinState conditioned(n, mean, post);
    const double floor = (n / 4.0) * db_to_variance(cfg.antisqueeze_var_jy_db);
    const double current = conditioned.var_jy();
    if (current < floor) {
        const double rxy = std::hypot(mean.x(), mean.y());
        const Vec3 az = rxy > 0.0 ? Vec3(-mean.y() / rxy, mean.x() / rxy, 0.0) : Vec3::UnitY();
        post += (floor - current) * az * az.transpose();
        conditioned = GaussianSpinState(n, mean, post);
    }
    // The cap applies to the contrast a readout would see.
    const double visible = spin::visible_contrast(conditioned);
    if (visible > cfg.contrast_after_qnd) {
        conditioned = GaussianSpinState(n, mean * (cfg.contrast_after_qnd / visible), post);
    }
    return {outcome, conditioned};
}

double beatnote_offset(double n_atoms, double delta_hz, const QndConfig& cfg)
{
    return -0.5 * n_atoms * delta_hz / cfg.mean_detuning_hz;
}

double beatnote_correct(double measured_jz, double n_atoms, double delta_hz, const QndConfig& cfg)
{
    if (std::abs(delta_hz / cfg.mean_detuning_hz) > 0.01) {
        throw ValidationError("beatnote_correct: |delta/Delta| > 0.01, linear correction invalid");
    }
    return measured_jz + 0.5 * n_atoms * delta_hz / cfg.mean_detuning_hz;
}

double photon_noise_jz(double n_atoms, double photons_per_atom)
{
    return std::sqrt(n_atoms) / 2.0 / std::sqrt(photons_per_atom);
}

double background_noise_jz(const FluorConfig& cfg)
{
    return cfg.background_sigma_photons / cfg.photons_per_atom;
}

double background_sigma_for(double target_db, double n_atoms, double photons_per_atom)
{
    return db_to_amplitude(target_db) * std::sqrt(n_atoms) / 2.0 * photons_per_atom;
}

double unidentified_noise_jz(const FluorConfig& cfg, double n_atoms)
{
    return db_to_amplitude(cfg.unidentified_noise_db) * std::sqrt(n_atoms) / 2.0;
}

double normalized_jz(double counts_up, double counts_down, double mean_n, double photons_per_atom)
{
    const double up = counts_up / photons_per_atom;
    const double down = counts_down / photons_per_atom;
    const double total = up + down;
    if (!(total > 0.0)) {
        throw ValidationError("normalized_jz: non-positive total signal");
    }
    return 0.5 * mean_n * (up - down) / total;
}

FluorOutcome push_and_fluoresce(double jz_true, double n_atoms, const FluorConfig& cfg, Rng& rng)
{
    if (!(n_atoms >= 1.0)) {
        throw ValidationError("push_and_fluoresce: atom number must be >= 1");
    }
    if (std::abs(jz_true) > 0.5 * n_atoms) {
        throw ValidationError("push_and_fluoresce: |Jz| exceeds N/2");
    }
    const double n_up = 0.5 * n_atoms + jz_true;
    const double n_down = 0.5 * n_atoms - jz_true;

    FluorOutcome out;
    out.pushed_position_mm = cfg.position_sigma_mm * rng.normal();
    const double alpha = cfg.photons_per_atom * (1.0 + cfg.photons_per_atom_jitter * rng.normal());
    const double eff_up = std::max(0.0, 1.0 + cfg.position_efficiency_slope * out.pushed_position_mm);

    // Photon counting; Poisson in the Gaussian limit (>= 1e6 photons per cloud).
    const double mean_up = eff_up * alpha * n_up;
    const double mean_down = alpha * n_down;
    double up = mean_up + std::sqrt(std::max(mean_up, 0.0)) * rng.normal();
    double down = mean_down + std::sqrt(std::max(mean_down, 0.0)) * rng.normal();

    // Correlated residual background: var(x) chosen so (x_up - x_down)/2 has
    // the configured spread.
    const double rho = cfg.background_correlation;
    const double sx = rho < 1.0 ? cfg.background_sigma_photons * std::sqrt(2.0 / (1.0 - rho)) : 0.0;
    const double w1 = rng.normal();
    const double w2 = rng.normal();
    up += sx * w1;
    down += sx * (rho * w1 + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * w2);

    // Unidentified excess noise, applied as a Jz displacement.
    const double u = unidentified_noise_jz(cfg, n_atoms) * rng.normal();
    up += alpha * u;
    down -= alpha * u;

    out.counts_up = up;
    out.counts_down = down;
    const double total = up + down;
    out.normalized_jz = total > 0.0 ? normalized_jz(up, down, n_atoms, cfg.photons_per_atom) : 0.0;
    return out;
}

PositionFit fit_position_efficiency(std::span<const FluorOutcome> calibration)
{
    std::size_t n = 0;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    double lo = 0.0, hi = 0.0;
    for (const FluorOutcome& o : calibration) {
        if (!(o.counts_down > 0.0) || !(o.counts_up > 0.0)) {
            continue;
        }
        const double x = o.pushed_position_mm;
        const double y = o.counts_up / o.counts_down;
        if (n == 0) {
            lo = hi = x;
        }
        lo = std::min(lo, x);
        hi = std::max(hi, x);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 3) {
        throw ValidationError("fit_position_efficiency: need at least 3 usable calibration shots");
    }
    const double dn = static_cast<double>(n);
    const double mx = sx / dn;
    const double my = sy / dn;
    const double vxx = sxx - dn * mx * mx;
    if (!(vxx > 0.0)) {
        throw ValidationError("fit_position_efficiency: calibration positions have no spread");
    }
    PositionFit fit;
    fit.slope = (sxy - dn * mx * my) / vxx;
    fit.intercept = my - fit.slope * mx;
    fit.span_lo_mm = lo;
    fit.span_hi_mm = hi;

    double rss = 0.0;
    for (const FluorOutcome& o : calibration) {
        if (!(o.counts_down > 0.0) || !(o.counts_up > 0.0)) {
            continue;
        }
        const double r = o.counts_up / o.counts_down - fit.ratio_at(o.pushed_position_mm);
        rss += r * r;
    }
    fit.slope_stderr = std::sqrt(rss / (dn - 2.0) / vxx);
    return fit;
}

CorrectedOutcome position_correction(const FluorOutcome& outcome, const PositionFit& fit,
                                     double mean_n, double photons_per_atom)
{
    CorrectedOutcome result{outcome, false};
    const double x = outcome.pushed_position_mm;
    const double span = fit.span_hi_mm - fit.span_lo_mm;
    result.outside_span = x < fit.span_lo_mm || x > fit.span_hi_mm;
    const double x_eval = std::clamp(x, fit.span_lo_mm - span, fit.span_hi_mm + span);
    const double ratio = fit.ratio_at(x_eval);
    if (!(ratio > 0.0)) {
        throw NumericalError("position_correction: fitted efficiency ratio is non-positive");
    }
    result.outcome.counts_up = outcome.counts_up / ratio;
    const double total = result.outcome.counts_up + result.outcome.counts_down;
    if (total > 0.0) {
        result.outcome.normalized_jz =
            normalized_jz(result.outcome.counts_up, result.outcome.counts_down, mean_n, photons_per_atom);
    }
    return result;
}

}  // namespace sqclock::measure
