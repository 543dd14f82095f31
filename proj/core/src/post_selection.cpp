#include <cmath>
#include <vector>

#include "sqclock/analysis.hpp"
#include "sqclock/error.hpp"
#include "sqclock/measurement.hpp"

namespace sqclock::analysis {
namespace {

bool is_clock(Sequence s) { return s == Sequence::ClockCss || s == Sequence::ClockSqueezed; }

void count_flags(const ShotRecord& r, RemovalReport& rep)
{
    if (r.flags == 0) {
        return;
    }
    ++rep.removed;
    rep.qnd_out_of_range += r.has(kQndOutOfRange) ? 1 : 0;
    rep.fluor_failed += r.has(kFluorFailed) ? 1 : 0;
    rep.clock_outliers += r.has(kClockOutlier) ? 1 : 0;
    rep.position_out_of_span += r.has(kPositionOutOfSpan) ? 1 : 0;
}

double data_set_mean_n(std::span<const ShotRecord> records, double alpha)
{
    double sum = 0.0;
    std::size_t n = 0;
    for (const ShotRecord& r : records) {
        const double total = r.fluor.counts_up + r.fluor.counts_down;
        if (total > 0.0) {
            sum += total / alpha;
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace

double inferred_qnd(double raw_jz, double delta_hz, const ExperimentConfig& cfg)
{
    return measure::beatnote_correct(raw_jz, cfg.n_atoms, delta_hz, cfg.qnd);
}

double observable_jz(const ShotRecord& r, const ExperimentConfig& cfg)
{
    const std::optional<double>& last = r.qnd2_jz ? r.qnd2_jz : r.qnd1_jz;
    if (!last) {
        return r.fluor.normalized_jz;
    }
    return r.fluor.normalized_jz - inferred_qnd(*last, r.delta_hz, cfg);
}

PostSelection post_select(std::span<const ShotRecord> records, const ExperimentConfig& cfg)
{
    if (records.empty()) {
        throw ValidationError("post_select: no records");
    }
    PostSelection out;
    out.flagged.assign(records.begin(), records.end());

    for (ShotRecord& r : out.flagged) {
        if (r.qnd1_jz && std::abs(inferred_qnd(*r.qnd1_jz, r.delta_hz, cfg)) > cfg.qnd.linear_range_jz) {
            r.flags |= kQndOutOfRange;
        }
        if (!(r.fluor.counts_up + r.fluor.counts_down > 0.0)) {
            r.flags |= kFluorFailed;
        }
    }

    if (is_clock(cfg.sequence)) {
        // Outlier bound is relative to the mean of the surviving shots, so
        // repeat until nothing new falls outside it.
        const double bound = 6.0 * std::sqrt(cfg.n_atoms) / 2.0;
        for (;;) {
            double sum = 0.0;
            std::size_t n = 0;
            for (const ShotRecord& r : out.flagged) {
                if (r.kept()) {
                    sum += observable_jz(r, cfg);
                    ++n;
                }
            }
            if (n == 0) {
                break;
            }
            const double mean = sum / static_cast<double>(n);
            bool changed = false;
            for (ShotRecord& r : out.flagged) {
                if (r.kept() && std::abs(observable_jz(r, cfg) - mean) > bound) {
                    r.flags |= kClockOutlier;
                    changed = true;
                }
            }
            if (!changed) {
                break;
            }
        }
    }

    out.report.total = out.flagged.size();
    for (const ShotRecord& r : out.flagged) {
        count_flags(r, out.report);
        if (r.kept()) {
            out.kept.push_back(r);
        }
    }
    return out;
}

PostSelection prepare_records(std::span<const ShotRecord> records, const ExperimentConfig& cfg)
{
    if (records.empty()) {
        throw ValidationError("prepare_records: no records");
    }
    const double alpha = cfg.fluor.photons_per_atom;
    const double mean_n = data_set_mean_n(records, alpha);
    if (!(mean_n > 0.0)) {
        throw ValidationError("prepare_records: no shot has positive fluorescence");
    }

    std::vector<measure::FluorOutcome> calibration;
    for (const ShotRecord& r : records) {
        if (r.theta_true == 0.0 && r.pulse_area == 0.0 && !r.has(kFluorFailed)) {
            calibration.push_back(r.fluor);
        }
    }

    std::vector<ShotRecord> corrected(records.begin(), records.end());
    if (calibration.size() >= 3) {
        const measure::PositionFit fit = measure::fit_position_efficiency(calibration);
        for (ShotRecord& r : corrected) {
            if (!(r.fluor.counts_up + r.fluor.counts_down > 0.0)) {
                continue;
            }
            const measure::CorrectedOutcome c = measure::position_correction(r.fluor, fit, mean_n, alpha);
            r.fluor = c.outcome;
            if (c.outside_span) {
                r.flags |= kPositionOutOfSpan;
            }
        }
    } else {
        for (ShotRecord& r : corrected) {
            if (r.fluor.counts_up + r.fluor.counts_down > 0.0) {
                r.fluor.normalized_jz = measure::normalized_jz(r.fluor.counts_up, r.fluor.counts_down, mean_n, alpha);
            }
        }
    }
    return post_select(corrected, cfg);
}

}  // namespace sqclock::analysis
