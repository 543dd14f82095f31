#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "sqclock/error.hpp"
#include "sqclock/io.hpp"

namespace sqclock::io {
namespace {

using nlohmann::json;

std::string shortest(double v)
{
    char buf[32];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) {
            break;
        }
    }
    return buf;
}

/// Reads fields of one JSON object, tracking which keys were consumed.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) {
            throw ValidationError(where() + ": expected an object");
        }
    }

    const json* find(const char* key)
    {
        seen_.insert(key);
        const auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const char* key, double& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_number()) {
                throw ValidationError(field(key) + ": expected a number");
            }
            out = v->get<double>();
        }
    }

    void count(const char* key, std::uint64_t& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_number_unsigned()) {
                throw ValidationError(field(key) + ": expected a non-negative integer");
            }
            out = v->get<std::uint64_t>();
        }
    }

    void numbers(const char* key, std::vector<double>& out)
    {
        if (const json* v = find(key)) {
            if (!v->is_array()) {
                throw ValidationError(field(key) + ": expected an array of numbers");
            }
            out.clear();
            for (const json& e : *v) {
                if (!e.is_number()) {
                    throw ValidationError(field(key) + ": expected an array of numbers");
                }
                out.push_back(e.get<double>());
            }
        }
    }

    void finish(bool strict) const
    {
        if (!strict) {
            return;
        }
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.contains(k)) {
                throw ValidationError(field(k.c_str()) + ": unknown key");
            }
        }
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string where() const { return path_.empty() ? "config" : path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void read_qnd(const json& j, measure::QndConfig& q, bool strict)
{
    ObjectReader r(j, "qnd");
    r.number("prepared_var_jz_db", q.prepared_var_jz_db);
    r.number("antisqueeze_var_jy_db", q.antisqueeze_var_jy_db);
    r.number("linear_range_jz", q.linear_range_jz);
    r.number("cal_hz_per_jz", q.cal_hz_per_jz);
    r.number("mean_detuning_hz", q.mean_detuning_hz);
    r.number("beatnote_span_hz", q.beatnote_span_hz);
    r.number("thermal_beta_sq", q.thermal_beta_sq);
    r.number("contrast_after_qnd", q.contrast_after_qnd);
    r.finish(strict);
}

void read_fluor(const json& j, measure::FluorConfig& f, bool strict)
{
    ObjectReader r(j, "fluor");
    r.number("photons_per_atom", f.photons_per_atom);
    r.number("background_sigma_photons", f.background_sigma_photons);
    r.number("background_correlation", f.background_correlation);
    r.number("position_sigma_mm", f.position_sigma_mm);
    r.number("position_efficiency_slope", f.position_efficiency_slope);
    r.number("photons_per_atom_jitter", f.photons_per_atom_jitter);
    r.number("unidentified_noise_db", f.unidentified_noise_db);
    r.finish(strict);
}

json to_json(const ExperimentConfig& c)
{
    json table = json::object();
    for (const auto& [ramp, contrast] : c.contrast_table) {
        table[shortest(ramp)] = contrast;
    }
    return json{
        {"n_atoms", c.n_atoms},
        {"lattice_ramp_ms", c.lattice_ramp_ms},
        {"free_fall_ms", c.free_fall_ms},
        {"ramsey_ms", c.ramsey_ms},
        {"cycle_s", c.cycle_s},
        {"theta_offset_rad", c.theta_offset_rad},
        {"mw_phase_noise_db", c.mw_phase_noise_db},
        {"mw_amplitude_error_sigma", c.mw_amplitude_error_sigma},
        {"stability_floor", c.stability_floor},
        {"shots", c.shots},
        {"seed", c.seed},
        {"sequence", std::string(to_string(c.sequence))},
        {"qnd",
         {
             {"prepared_var_jz_db", c.qnd.prepared_var_jz_db},
             {"antisqueeze_var_jy_db", c.qnd.antisqueeze_var_jy_db},
             {"linear_range_jz", c.qnd.linear_range_jz},
             {"cal_hz_per_jz", c.qnd.cal_hz_per_jz},
             {"mean_detuning_hz", c.qnd.mean_detuning_hz},
             {"beatnote_span_hz", c.qnd.beatnote_span_hz},
             {"thermal_beta_sq", c.qnd.thermal_beta_sq},
             {"contrast_after_qnd", c.qnd.contrast_after_qnd},
         }},
        {"fluor",
         {
             {"photons_per_atom", c.fluor.photons_per_atom},
             {"background_sigma_photons", c.fluor.background_sigma_photons},
             {"background_correlation", c.fluor.background_correlation},
             {"position_sigma_mm", c.fluor.position_sigma_mm},
             {"position_efficiency_slope", c.fluor.position_efficiency_slope},
             {"photons_per_atom_jitter", c.fluor.photons_per_atom_jitter},
             {"unidentified_noise_db", c.fluor.unidentified_noise_db},
         }},
        {"contrast_table", table},
        {"css_contrast", c.css_contrast},
        {"presqueeze_db", c.presqueeze_db},
        {"presqueeze_realign_rad", c.presqueeze_realign_rad},
        {"dr_technical_noise_rad", c.dr_technical_noise_rad},
        {"dr_detection_noise_rad", c.dr_detection_noise_rad},
        {"second_pulse_phase_offset_rad", c.second_pulse_phase_offset_rad},
        {"theta_list_rad", c.theta_list_rad},
        {"pulse_areas_rad", c.pulse_areas_rad},
        {"ac_stark_phase_rad", c.ac_stark_phase_rad},
        {"push_duration_us", c.push_duration_us},
        {"rabi_pulse_lead_us", c.rabi_pulse_lead_us},
    };
}

}  // namespace

ExperimentConfig parse_config_text(std::string_view text, bool strict)
{
    ExperimentConfig c;
    std::string body(text);
    if (body.find_first_not_of(" \t\r\n") == std::string::npos) {
        c.validate();
        return c;
    }
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("config: malformed JSON: ") + e.what());
    }

    ObjectReader r(j, "");
    r.number("n_atoms", c.n_atoms);
    r.number("lattice_ramp_ms", c.lattice_ramp_ms);
    r.number("free_fall_ms", c.free_fall_ms);
    r.number("ramsey_ms", c.ramsey_ms);
    r.number("cycle_s", c.cycle_s);
    r.number("theta_offset_rad", c.theta_offset_rad);
    r.number("mw_phase_noise_db", c.mw_phase_noise_db);
    r.number("mw_amplitude_error_sigma", c.mw_amplitude_error_sigma);
    r.number("stability_floor", c.stability_floor);
    r.count("shots", c.shots);
    r.count("seed", c.seed);
    if (const json* v = r.find("sequence")) {
        if (!v->is_string()) {
            throw ValidationError("sequence: expected a string");
        }
        try {
            c.sequence = sequence_from_string(v->get<std::string>());
        } catch (const ValidationError& e) {
            throw ValidationError(std::string("sequence: ") + e.what());
        }
    }
    if (const json* v = r.find("qnd")) {
        read_qnd(*v, c.qnd, strict);
    }
    if (const json* v = r.find("fluor")) {
        read_fluor(*v, c.fluor, strict);
    }
    if (const json* v = r.find("contrast_table")) {
        if (!v->is_object()) {
            throw ValidationError("contrast_table: expected an object of ramp_ms -> contrast");
        }
        c.contrast_table.clear();
        for (const auto& [k, val] : v->items()) {
            char* end = nullptr;
            const double ramp = std::strtod(k.c_str(), &end);
            if (k.empty() || *end != '\0') {
                throw ValidationError("contrast_table." + k + ": key must be a lattice ramp time in ms");
            }
            if (!val.is_number()) {
                throw ValidationError("contrast_table." + k + ": expected a number");
            }
            c.contrast_table[ramp] = val.get<double>();
        }
    }
    r.number("css_contrast", c.css_contrast);
    r.number("presqueeze_db", c.presqueeze_db);
    r.number("presqueeze_realign_rad", c.presqueeze_realign_rad);
    r.number("dr_technical_noise_rad", c.dr_technical_noise_rad);
    r.number("dr_detection_noise_rad", c.dr_detection_noise_rad);
    r.number("second_pulse_phase_offset_rad", c.second_pulse_phase_offset_rad);
    r.numbers("theta_list_rad", c.theta_list_rad);
    r.numbers("pulse_areas_rad", c.pulse_areas_rad);
    r.number("ac_stark_phase_rad", c.ac_stark_phase_rad);
    r.number("push_duration_us", c.push_duration_us);
    r.number("rabi_pulse_lead_us", c.rabi_pulse_lead_us);
    r.finish(strict);

    c.validate();
    return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path, bool strict)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw IoError("failed reading config " + path.string());
    }
    return parse_config_text(ss.str(), strict);
}

std::string serialize_config(const ExperimentConfig& cfg)
{
    return to_json(cfg).dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg)
{
    const std::string canonical = to_json(cfg).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace sqclock::io
