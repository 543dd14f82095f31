#include "sqclock/experiment.hpp"

#include <cmath>
#include <string>

#include "sqclock/error.hpp"

namespace sqclock {

std::string_view to_string(Sequence s)
{
    switch (s) {
    case Sequence::SqueezeChar: return "squeeze_char";
    case Sequence::ClockCss: return "clock_css";
    case Sequence::ClockSqueezed: return "clock_squeezed";
    case Sequence::DynamicRange: return "dynamic_range";
    case Sequence::RabiScan: return "rabi_scan";
    }
    return "unknown";
}

Sequence sequence_from_string(std::string_view name)
{
    for (Sequence s : {Sequence::SqueezeChar, Sequence::ClockCss, Sequence::ClockSqueezed,
                       Sequence::DynamicRange, Sequence::RabiScan}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ValidationError("unknown sequence '" + std::string(name) + "'");
}

double max_free_fall_ms(double lattice_ramp_ms)
{
    if (lattice_ramp_ms <= 0.2) {
        return 4.0;
    }
    if (lattice_ramp_ms >= 7.0) {
        return 8.0;
    }
    return 4.0 + 4.0 * (lattice_ramp_ms - 0.2) / (7.0 - 0.2);
}

double ExperimentConfig::final_contrast() const
{
    for (const auto& [ramp, c] : contrast_table) {
        if (std::abs(ramp - lattice_ramp_ms) < 1e-9) {
            return c;
        }
    }
    throw ValidationError("contrast_table has no entry for lattice_ramp_ms = " + std::to_string(lattice_ramp_ms));
}

std::size_t ExperimentConfig::point_count() const
{
    switch (sequence) {
    case Sequence::DynamicRange: return theta_list_rad.size();
    case Sequence::RabiScan: return pulse_areas_rad.size();
    default: return 1;
    }
}

void ExperimentConfig::validate() const
{
    auto fail = [](const std::string& field, const std::string& why) {
        throw ValidationError(field + ": " + why);
    };
    if (!(n_atoms >= 1.0) || !std::isfinite(n_atoms)) {
        fail("n_atoms", "must be >= 1");
    }
    if (!(lattice_ramp_ms > 0.0)) fail("lattice_ramp_ms", "must be > 0");
    if (!(free_fall_ms > 0.0)) fail("free_fall_ms", "must be > 0");
    if (!(ramsey_ms > 0.0)) fail("ramsey_ms", "must be > 0");
    if (!(cycle_s > 0.0)) fail("cycle_s", "must be > 0");
    if (free_fall_ms > max_free_fall_ms(lattice_ramp_ms) + 1e-12) {
        fail("free_fall_ms", std::to_string(free_fall_ms) + " ms exceeds the " +
                                 std::to_string(max_free_fall_ms(lattice_ramp_ms)) +
                                 " ms field-of-view limit for this lattice ramp");
    }
    if (!(mw_amplitude_error_sigma >= 0.0)) fail("mw_amplitude_error_sigma", "must be >= 0");
    if (!(stability_floor >= 0.0)) fail("stability_floor", "must be >= 0");
    if (!(css_contrast > 0.0 && css_contrast <= 1.0)) fail("css_contrast", "must lie in (0, 1]");
    if (!(presqueeze_db <= 0.0)) fail("presqueeze_db", "must be <= 0");
    if (!(dr_technical_noise_rad >= 0.0)) fail("dr_technical_noise_rad", "must be >= 0");
    if (!(dr_detection_noise_rad >= 0.0)) fail("dr_detection_noise_rad", "must be >= 0");
    if (contrast_table.empty()) fail("contrast_table", "must not be empty");
    for (const auto& [ramp, c] : contrast_table) {
        if (!(ramp > 0.0) || !(c > 0.0 && c <= 1.0)) {
            fail("contrast_table", "entries need ramp > 0 and contrast in (0, 1]");
        }
        if (c > qnd.contrast_after_qnd + 1e-12) {
            fail("contrast_table", "final contrast cannot exceed qnd.contrast_after_qnd");
        }
    }
    try {
        qnd.validate();
    } catch (const ValidationError& e) {
        fail("qnd", e.what());
    }
    try {
        fluor.validate();
    } catch (const ValidationError& e) {
        fail("fluor", e.what());
    }
    (void)final_contrast();

    const bool ramsey_sequence = sequence == Sequence::ClockCss || sequence == Sequence::ClockSqueezed ||
                                 sequence == Sequence::DynamicRange;
    if (ramsey_sequence && ramsey_ms > free_fall_ms) {
        fail("ramsey_ms", "Ramsey time must fit inside the free fall");
    }
    if (sequence == Sequence::DynamicRange) {
        if (std::abs(ramsey_ms - 0.01) > 1e-12) {
            fail("ramsey_ms", "dynamic_range runs at a 10 us Ramsey time (0.01 ms)");
        }
        if (theta_list_rad.empty()) fail("theta_list_rad", "must not be empty for dynamic_range");
        for (double t : theta_list_rad) {
            if (!(std::abs(t) < kPi / 2.0)) fail("theta_list_rad", "|theta| must be < pi/2");
        }
    }
    if (sequence == Sequence::RabiScan && pulse_areas_rad.empty()) {
        fail("pulse_areas_rad", "must not be empty for rabi_scan");
    }
}

}  // namespace sqclock
