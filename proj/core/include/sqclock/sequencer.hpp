#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "sqclock/experiment.hpp"

namespace sqclock::seq {

/// Fractional-frequency noise with a flat Allan-deviation plateau.
///
/// Sum of first-order Gauss-Markov (AR(1)) components with correlation times
/// of 2, 8, ..., 2048 cycles and equal variance, scaled so the analytic Allan
/// deviation peaks at `plateau` over averaging windows of 1..4096 cycles.
class FloorProcess {
public:
    FloorProcess(double plateau, std::uint64_t seed, std::uint64_t length);

    double at(std::uint64_t shot) const { return series_.empty() ? 0.0 : series_[shot]; }
    std::uint64_t size() const { return series_.size(); }

    static const std::vector<double>& correlation_times();
    /// Analytic Allan variance at window L for unit per-component variance.
    static double unit_allan_variance(std::uint64_t window);
    /// Per-component standard deviation that yields the plateau.
    static double component_sigma(double plateau);

private:
    std::vector<double> series_;
};

using RecordSink = std::function<void(const ShotRecord&)>;

/// Generate every shot of `cfg` and hand them to `sink` in shot-index order.
/// Shots are simulated in parallel blocks; output is identical for any
/// `threads` value (0 = hardware concurrency).
void stream_records(const ExperimentConfig& cfg, const RecordSink& sink, unsigned threads = 0);

std::vector<ShotRecord> simulate_records(const ExperimentConfig& cfg, unsigned threads = 0);

/// Simulate a single shot; pure in (cfg, floor, shot).
ShotRecord simulate_shot(const ExperimentConfig& cfg, const FloorProcess& floor, std::uint64_t shot);

std::vector<ShotRecord> run_squeeze_characterization(const ExperimentConfig& cfg);
std::vector<ShotRecord> run_clock(const ExperimentConfig& cfg);
/// Thetas are interleaved shot by shot: shot i uses theta_list[i % size].
std::vector<ShotRecord> run_dynamic_range(const ExperimentConfig& cfg, const std::vector<double>& theta_list);

/// Mean J'z/(N/2) per pulse area, in the order given.
std::vector<std::pair<double, double>> rabi_curve(const ExperimentConfig& cfg, const std::vector<ShotRecord>& records);
std::vector<std::pair<double, double>> run_rabi_scan(const ExperimentConfig& cfg, const std::vector<double>& pulse_areas);

}  // namespace sqclock::seq
