#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "sqclock/analysis.hpp"
#include "sqclock/error.hpp"

namespace sqclock::analysis {

StabilityCurve allan_deviation(std::span<const double> phi, std::span<const bool> valid, double cycle_s,
                               std::span<const double> taus, double confidence)
{
    if (phi.size() != valid.size()) {
        throw ValidationError("allan_deviation: series and validity mask differ in length");
    }
    if (!(cycle_s > 0.0)) {
        throw ValidationError("allan_deviation: cycle time must be positive");
    }
    if (taus.empty()) {
        throw ValidationError("allan_deviation: no averaging times");
    }
    const double total_s = static_cast<double>(phi.size()) * cycle_s;

    StabilityCurve curve;
    double previous = 0.0;
    for (double tau : taus) {
        const double ratio = tau / cycle_s;
        const double rounded = std::round(ratio);
        if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
            throw ValidationError("allan_deviation: tau must be a positive multiple of the cycle time");
        }
        if (tau <= previous) {
            throw ValidationError("allan_deviation: taus must be strictly increasing");
        }
        if (tau > 0.5 * total_s) {
            throw ValidationError("allan_deviation: tau exceeds half the record length");
        }
        previous = tau;

        const auto window = static_cast<std::size_t>(rounded);
        const std::size_t bins = phi.size() / window;
        std::vector<double> mean(bins, 0.0);
        std::vector<bool> filled(bins, false);
        std::size_t filled_count = 0;
        for (std::size_t k = 0; k < bins; ++k) {
            double sum = 0.0;
            std::size_t n = 0;
            for (std::size_t i = k * window; i < (k + 1) * window; ++i) {
                if (valid[i]) {
                    sum += phi[i];
                    ++n;
                }
            }
            if (n > 0) {
                mean[k] = sum / static_cast<double>(n);
                filled[k] = true;
                ++filled_count;
            }
        }
        if (filled_count == 0) {
            throw ValidationError("allan_deviation: every bin is empty");
        }

        double acc = 0.0;
        std::size_t pairs = 0;
        for (std::size_t k = 0; k + 1 < bins; ++k) {
            if (filled[k] && filled[k + 1]) {
                const double d = mean[k + 1] - mean[k];
                acc += d * d;
                ++pairs;
            }
        }
        curve.taus.push_back(tau);
        curve.n_pairs_used.push_back(pairs);
        if (pairs == 0) {
            const double nan = std::numeric_limits<double>::quiet_NaN();
            curve.sigma_y.push_back(nan);
            curve.ci_low.push_back(nan);
            curve.ci_high.push_back(nan);
            continue;
        }
        const double sigma = std::sqrt(acc / (2.0 * static_cast<double>(pairs)));
        const auto [lo, hi] = chi2_interval(sigma, pairs + 1, confidence);
        curve.sigma_y.push_back(sigma);
        curve.ci_low.push_back(lo);
        curve.ci_high.push_back(hi);
    }
    return curve;
}

std::vector<double> phase_series(std::span<const ShotRecord> records, const ExperimentConfig& cfg, double contrast)
{
    if (!(contrast > 0.0)) {
        throw ValidationError("phase_series: contrast must be positive");
    }
    const double scale = 1.0 / (contrast * 0.5 * cfg.n_atoms * cfg.ramsey_s() * kClockOmega0);
    std::vector<double> out;
    out.reserve(records.size());
    for (const ShotRecord& r : records) {
        out.push_back(r.kept() ? observable_jz(r, cfg) * scale : 0.0);
    }
    return out;
}

StabilityCurve allan_deviation(std::span<const ShotRecord> records, const ExperimentConfig& cfg, double contrast,
                               std::span<const double> taus, double confidence)
{
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (!(records[i].t_s > records[i - 1].t_s)) {
            throw ValidationError("allan_deviation: records are not time-ordered");
        }
    }
    const std::vector<double> phi = phase_series(records, cfg, contrast);
    // std::vector<bool> is not contiguous, so build the mask as a plain array.
    const std::unique_ptr<bool[]> mask(new bool[records.size()]);
    for (std::size_t i = 0; i < records.size(); ++i) {
        mask[i] = records[i].kept();
    }
    return allan_deviation(phi, std::span<const bool>(mask.get(), records.size()), cfg.cycle_s, taus, confidence);
}

}  // namespace sqclock::analysis
