#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sqclock/constants.hpp"
#include "sqclock/measurement.hpp"

namespace sqclock {

enum class Sequence { SqueezeChar, ClockCss, ClockSqueezed, DynamicRange, RabiScan };

std::string_view to_string(Sequence s);
Sequence sequence_from_string(std::string_view name);

struct ExperimentConfig {
    double n_atoms = 390000.0;
    double lattice_ramp_ms = 0.2;
    double free_fall_ms = 4.0;
    double ramsey_ms = 3.6;
    double cycle_s = 1.0;
    double theta_offset_rad = 0.0;
    double mw_phase_noise_db = -10.0;
    double mw_amplitude_error_sigma = 0.005;
    /// Plateau of the magnetic-field frequency-noise process; 0 disables it.
    double stability_floor = 4e-12;
    std::uint64_t shots = 10000;
    std::uint64_t seed = 1;
    Sequence sequence = Sequence::SqueezeChar;
    measure::QndConfig qnd;
    measure::FluorConfig fluor;
    /// Final Rabi coherence by lattice ramp time (ms).
    std::map<double, double> contrast_table{{0.2, 0.91}, {7.0, 0.73}};

    double css_contrast = 0.98;
    double presqueeze_db = -6.0;
    double presqueeze_realign_rad = kPi / 12.0;
    /// Extra technical phase noise of the dynamic-range sequence, replaces
    /// the generic microwave phase-noise term there.
    double dr_technical_noise_rad = 590e-6;
    /// Detection-noise part of the dynamic-range fit's fixed Delta X0; the fit
    /// uses hypot(this, dr_technical_noise_rad). Not injected into shots.
    double dr_detection_noise_rad = 740e-6;
    /// Calibration offset on the nominal 180 deg second Ramsey pulse.
    double second_pulse_phase_offset_rad = 0.0;
    std::vector<double> theta_list_rad;
    std::vector<double> pulse_areas_rad;

    // Recorded for completeness; no statistical effect in this model.
    double ac_stark_phase_rad = 3.0 * kPi / 5.0;
    double push_duration_us = 37.0;
    double rabi_pulse_lead_us = 200.0;

    /// Throws ValidationError naming the offending field.
    void validate() const;

    double ramsey_s() const { return ramsey_ms * 1e-3; }
    /// Final contrast for this lattice ramp.
    double final_contrast() const;
    bool has_qnd() const { return sequence != Sequence::ClockCss; }
    /// Number of distinct settings (theta values or pulse areas) interleaved in the run.
    std::size_t point_count() const;
};

/// Field-of-view limit on free fall for a lattice ramp time (4 ms at 0.2 ms,
/// 8 ms at 7.0 ms, linear in between).
double max_free_fall_ms(double lattice_ramp_ms);

enum ShotFlag : std::uint32_t {
    kQndOutOfRange = 1u << 0,
    kFluorFailed = 1u << 1,
    kClockOutlier = 1u << 2,
    kPositionOutOfSpan = 1u << 3,
};

struct ShotRecord {
    std::uint64_t shot_index = 0;
    double t_s = 0.0;
    std::optional<double> qnd1_jz;  ///< raw probe readings, before beatnote correction
    std::optional<double> qnd2_jz;
    measure::FluorOutcome fluor;
    double delta_hz = 0.0;
    double theta_true = 0.0;
    double pulse_area = 0.0;
    std::uint32_t flags = 0;

    bool kept() const { return flags == 0; }
    bool has(ShotFlag f) const { return (flags & f) != 0; }

    bool operator==(const ShotRecord&) const = default;
};

}  // namespace sqclock
