#include "sqclock/sequencer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "sqclock/collective_spin.hpp"
#include "sqclock/error.hpp"
#include "sqclock/measurement.hpp"

namespace sqclock::seq {
namespace {

constexpr std::uint64_t kShotStream = 0;
constexpr std::uint64_t kFloorStream = 1;
constexpr std::uint64_t kBlock = 4096;

using spin::GaussianSpinState;
using spin::Rotation;

struct Prepared {
    GaussianSpinState state;
    std::optional<double> qnd1;
    std::optional<double> qnd2;
};

/// Squeezed preparation: composite pi/2 from |down>, one-axis-twist pre-squeeze
/// with realignment, two QND readings, then the lattice-release coherence.
Prepared prepare_squeezed(const ExperimentConfig& cfg, double eps, double delta_hz, Rng& rng)
{
    GaussianSpinState s = spin::composite_pi_half(spin::make_css_at_pole(cfg.n_atoms), eps);
    s = spin::apply_contrast_decay(s, cfg.css_contrast);
    s = spin::presqueeze(s, cfg.presqueeze_db, cfg.presqueeze_realign_rad);

    const double offset = measure::beatnote_offset(cfg.n_atoms, delta_hz, cfg.qnd);
    measure::QndResult first = measure::qnd_measure(s, cfg.qnd, rng);
    measure::QndResult second = measure::qnd_measure(first.posterior, cfg.qnd, rng);

    GaussianSpinState released = second.posterior;
    const double factor = cfg.final_contrast() / spin::visible_contrast(released);
    if (factor < 1.0) {
        released = spin::apply_contrast_decay(released, factor);
    }
    return {released, first.outcome_jz + offset, second.outcome_jz + offset};
}

GaussianSpinState prepare_css(const ExperimentConfig& cfg)
{
    GaussianSpinState s = spin::make_css_at_pole(cfg.n_atoms);
    const double factor = cfg.css_contrast * cfg.final_contrast() / cfg.qnd.contrast_after_qnd;
    return spin::apply_contrast_decay(s, std::min(1.0, factor));
}

double phase_noise_sigma(const ExperimentConfig& cfg)
{
    return std::sqrt(db_to_variance(cfg.mw_phase_noise_db) / cfg.n_atoms);
}

}  // namespace

const std::vector<double>& FloorProcess::correlation_times()
{
    static const std::vector<double> taus{2.0, 8.0, 32.0, 128.0, 512.0, 2048.0};
    return taus;
}

double FloorProcess::unit_allan_variance(std::uint64_t window)
{
    // sigma^2(L) = Var(ybar) - Cov(ybar_k, ybar_k+1) from the autocovariance.
    const auto& taus = correlation_times();
    auto autocov = [&](double lag) {
        double r = 0.0;
        for (double t : taus) {
            r += std::exp(-std::abs(lag) / t);
        }
        return r;
    };
    const double l = static_cast<double>(window);
    double var = 0.0;
    for (std::int64_t d = -static_cast<std::int64_t>(window) + 1; d < static_cast<std::int64_t>(window); ++d) {
        var += (l - std::abs(static_cast<double>(d))) * autocov(static_cast<double>(d));
    }
    double cov = 0.0;
    for (std::uint64_t d = 1; d < 2 * window; ++d) {
        cov += (l - std::abs(static_cast<double>(d) - l)) * autocov(static_cast<double>(d));
    }
    return (var - cov) / (l * l);
}

double FloorProcess::component_sigma(double plateau)
{
    static const double peak = [] {
        double best = 0.0;
        for (std::uint64_t w = 1; w <= 4096; w *= 2) {
            best = std::max(best, unit_allan_variance(w));
        }
        return best;
    }();
    return plateau / std::sqrt(peak);
}

FloorProcess::FloorProcess(double plateau, std::uint64_t seed, std::uint64_t length)
{
    if (plateau <= 0.0 || length == 0) {
        return;
    }
    const double sigma = component_sigma(plateau);
    const auto& taus = correlation_times();
    std::vector<double> state(taus.size());
    Rng rng = Rng::for_stream(seed, 0, kFloorStream);
    for (double& s : state) {
        s = sigma * rng.normal();
    }
    series_.resize(length);
    for (std::uint64_t i = 0; i < length; ++i) {
        double y = 0.0;
        for (std::size_t j = 0; j < taus.size(); ++j) {
            if (i > 0) {
                const double a = std::exp(-1.0 / taus[j]);
                state[j] = a * state[j] + sigma * std::sqrt(1.0 - a * a) * rng.normal();
            }
            y += state[j];
        }
        series_[i] = y;
    }
}

ShotRecord simulate_shot(const ExperimentConfig& cfg, const FloorProcess& floor, std::uint64_t shot)
{
    Rng rng = Rng::for_stream(cfg.seed, shot, kShotStream);

    ShotRecord rec;
    rec.shot_index = shot;
    rec.t_s = static_cast<double>(shot) * cfg.cycle_s;
    rec.delta_hz = rng.uniform(-cfg.qnd.beatnote_span_hz, cfg.qnd.beatnote_span_hz);
    const double eps = cfg.mw_amplitude_error_sigma * rng.normal();
    const std::size_t points = std::max<std::size_t>(1, cfg.point_count());
    const std::size_t point = static_cast<std::size_t>(shot % points);

    std::optional<GaussianSpinState> final_state;
    if (cfg.sequence == Sequence::ClockCss) {
        GaussianSpinState s = prepare_css(cfg);
        s = spin::rotate(s, Rotation::equatorial(0.0, kPi / 2.0, eps));
        const double phase = kClockOmega0 * cfg.ramsey_s() * floor.at(shot);
        s = spin::rotate(s, Rotation::about_z(phase));
        const double chi = cfg.second_pulse_phase_offset_rad + cfg.theta_offset_rad +
                           phase_noise_sigma(cfg) * rng.normal();
        final_state = spin::rotate(s, Rotation::equatorial(kPi / 2.0 + chi, kPi / 2.0, eps));
    } else {
        Prepared p = prepare_squeezed(cfg, eps, rec.delta_hz, rng);
        rec.qnd1_jz = p.qnd1;
        rec.qnd2_jz = p.qnd2;
        GaussianSpinState s = p.state;
        const double axis = s.mean_azimuth();

        switch (cfg.sequence) {
        case Sequence::SqueezeChar:
            break;
        case Sequence::ClockSqueezed:
        case Sequence::DynamicRange: {
            s = spin::rotate(s, Rotation::equatorial(axis, kPi / 2.0, eps));
            const double phase = kClockOmega0 * cfg.ramsey_s() * floor.at(shot);
            s = spin::rotate(s, Rotation::about_z(phase));
            double chi = cfg.second_pulse_phase_offset_rad + cfg.theta_offset_rad;
            if (cfg.sequence == Sequence::DynamicRange) {
                rec.theta_true = cfg.theta_list_rad[point];
                chi += rec.theta_true + cfg.dr_technical_noise_rad * rng.normal();
            } else {
                chi += phase_noise_sigma(cfg) * rng.normal();
            }
            s = spin::rotate(s, Rotation::equatorial(axis + kPi + chi, kPi / 2.0, eps));
            break;
        }
        case Sequence::RabiScan:
            rec.pulse_area = cfg.pulse_areas_rad[point];
            s = spin::rotate(s, Rotation::equatorial(axis - kPi / 2.0, rec.pulse_area, eps));
            break;
        case Sequence::ClockCss:
            break;
        }
        final_state = s;

        const double inferred = measure::beatnote_correct(*rec.qnd1_jz, cfg.n_atoms, rec.delta_hz, cfg.qnd);
        if (std::abs(inferred) > cfg.qnd.linear_range_jz) {
            rec.flags |= kQndOutOfRange;
        }
    }

    const double half = 0.5 * cfg.n_atoms;
    const double jz = std::clamp(spin::sample_jz(*final_state, rng), -half, half);
    rec.fluor = measure::push_and_fluoresce(jz, cfg.n_atoms, cfg.fluor, rng);
    if (!(rec.fluor.counts_up + rec.fluor.counts_down > 0.0)) {
        rec.flags |= kFluorFailed;
    }
    return rec;
}

void stream_records(const ExperimentConfig& cfg, const RecordSink& sink, unsigned threads)
{
    cfg.validate();
    const std::uint64_t total = cfg.shots;
    const FloorProcess floor(cfg.stability_floor, cfg.seed, total);
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }

    std::vector<ShotRecord> block;
    for (std::uint64_t start = 0; start < total; start += kBlock) {
        const std::uint64_t count = std::min(kBlock, total - start);
        block.assign(count, ShotRecord{});
        const unsigned workers = static_cast<unsigned>(std::min<std::uint64_t>(threads, count));
        if (workers <= 1) {
            for (std::uint64_t i = 0; i < count; ++i) {
                block[i] = simulate_shot(cfg, floor, start + i);
            }
        } else {
            std::vector<std::jthread> pool;
            std::vector<std::exception_ptr> errors(workers);
            for (unsigned w = 0; w < workers; ++w) {
                pool.emplace_back([&, w] {
                    try {
                        for (std::uint64_t i = w; i < count; i += workers) {
                            block[i] = simulate_shot(cfg, floor, start + i);
                        }
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
            pool.clear();
            for (const auto& e : errors) {
                if (e) {
                    std::rethrow_exception(e);
                }
            }
        }
        for (const ShotRecord& r : block) {
            sink(r);
        }
    }
}

std::vector<ShotRecord> simulate_records(const ExperimentConfig& cfg, unsigned threads)
{
    std::vector<ShotRecord> out;
    out.reserve(cfg.shots);
    stream_records(cfg, [&](const ShotRecord& r) { out.push_back(r); }, threads);
    return out;
}

std::vector<ShotRecord> run_squeeze_characterization(const ExperimentConfig& cfg)
{
    if (cfg.sequence != Sequence::SqueezeChar) {
        throw ValidationError("run_squeeze_characterization: sequence must be squeeze_char");
    }
    return simulate_records(cfg);
}

std::vector<ShotRecord> run_clock(const ExperimentConfig& cfg)
{
    if (cfg.sequence != Sequence::ClockCss && cfg.sequence != Sequence::ClockSqueezed) {
        throw ValidationError("run_clock: sequence must be clock_css or clock_squeezed");
    }
    return simulate_records(cfg);
}

std::vector<ShotRecord> run_dynamic_range(const ExperimentConfig& cfg, const std::vector<double>& theta_list)
{
    if (cfg.sequence != Sequence::DynamicRange) {
        throw ValidationError("run_dynamic_range: sequence must be dynamic_range");
    }
    ExperimentConfig c = cfg;
    c.theta_list_rad = theta_list;
    return simulate_records(c);
}

std::vector<std::pair<double, double>> rabi_curve(const ExperimentConfig& cfg, const std::vector<ShotRecord>& records)
{
    std::map<double, std::pair<double, std::size_t>> acc;
    for (const ShotRecord& r : records) {
        if (r.has(kFluorFailed)) {
            continue;
        }
        auto& [sum, n] = acc[r.pulse_area];
        sum += r.fluor.normalized_jz;
        ++n;
    }
    std::vector<std::pair<double, double>> out;
    for (double area : cfg.pulse_areas_rad) {
        const auto it = acc.find(area);
        if (it == acc.end() || it->second.second == 0) {
            continue;
        }
        out.emplace_back(area, it->second.first / static_cast<double>(it->second.second) / (0.5 * cfg.n_atoms));
    }
    return out;
}

std::vector<std::pair<double, double>> run_rabi_scan(const ExperimentConfig& cfg, const std::vector<double>& pulse_areas)
{
    if (cfg.sequence != Sequence::RabiScan) {
        throw ValidationError("run_rabi_scan: sequence must be rabi_scan");
    }
    if (pulse_areas.empty()) {
        throw ValidationError("run_rabi_scan: empty pulse list");
    }
    ExperimentConfig c = cfg;
    c.pulse_areas_rad = pulse_areas;
    return rabi_curve(c, simulate_records(c));
}

}  // namespace sqclock::seq
