#include <algorithm>
#include <cmath>
#include <tuple>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "sqclock/analysis.hpp"
#include "sqclock/error.hpp"

namespace sqclock::analysis {

std::pair<double, double> chi2_interval(double stddev, std::size_t n_samples, double confidence)
{
    if (n_samples < 2) {
        throw ValidationError("chi2_interval: need at least 2 samples");
    }
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw ValidationError("chi2_interval: confidence must lie in (0, 1)");
    }
    if (!std::isfinite(stddev) || stddev < 0.0) {
        throw ValidationError("chi2_interval: stddev must be finite and non-negative");
    }
    const double dof = static_cast<double>(n_samples - 1);
    const boost::math::chi_squared dist(dof);
    const double q_hi = boost::math::quantile(dist, 0.5 * (1.0 + confidence));
    const double q_lo = boost::math::quantile(dist, 0.5 * (1.0 - confidence));
    return {stddev * std::sqrt(dof / q_hi), stddev * std::sqrt(dof / q_lo)};
}

double pooled_std(std::span<const double> stds, std::span<const std::size_t> ns)
{
    if (stds.size() != ns.size()) {
        throw ValidationError("pooled_std: stds and ns differ in length");
    }
    if (stds.empty()) {
        throw ValidationError("pooled_std: empty input");
    }
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < stds.size(); ++i) {
        if (ns[i] < 2) {
            throw ValidationError("pooled_std: every data set needs n >= 2");
        }
        const double w = static_cast<double>(ns[i] - 1);
        num += w * stds[i];
        den += w;
    }
    return num / den;
}

PooledResult pool_datasets(std::span<const double> stds, std::span<const std::size_t> ns, double confidence)
{
    PooledResult r{};
    r.stddev = pooled_std(stds, ns);
    r.n_for_ci = *std::min_element(ns.begin(), ns.end());
    std::tie(r.ci_low, r.ci_high) = chi2_interval(r.stddev, r.n_for_ci, confidence);
    return r;
}

SqueezingMetrics squeezing_metrics(std::span<const double> jz12, double n_atoms, double contrast)
{
    if (jz12.size() < 2) {
        throw ValidationError("squeezing_metrics: need at least 2 kept records");
    }
    if (!(contrast > 0.0)) {
        throw ValidationError("squeezing_metrics: contrast must be positive");
    }
    if (!(n_atoms > 0.0)) {
        throw ValidationError("squeezing_metrics: n_atoms must be positive");
    }
    double mean = 0.0;
    for (double v : jz12) {
        mean += v;
    }
    mean /= static_cast<double>(jz12.size());
    double ss = 0.0;
    for (double v : jz12) {
        ss += (v - mean) * (v - mean);
    }
    const double var = ss / static_cast<double>(jz12.size() - 1);

    SqueezingMetrics m{};
    m.variance_reduction_db = variance_db(var / (0.25 * n_atoms));
    m.wineland_db = m.variance_reduction_db - 20.0 * std::log10(contrast);
    m.delta_theta = std::sqrt(var) / (contrast * 0.5 * n_atoms);
    m.samples = jz12.size();
    return m;
}

SqueezingMetrics squeezing_metrics(std::span<const ShotRecord> kept, const ExperimentConfig& cfg, double contrast)
{
    std::vector<double> values;
    values.reserve(kept.size());
    for (const ShotRecord& r : kept) {
        if (r.kept()) {
            values.push_back(observable_jz(r, cfg));
        }
    }
    return squeezing_metrics(values, cfg.n_atoms, contrast);
}

double qpn_stability(double ramsey_s, double cycle_s, double n_atoms, double tau_s, double omega0)
{
    return 1.0 / (omega0 * ramsey_s) * std::sqrt(cycle_s / (n_atoms * tau_s));
}

double metrological_gain_db(double sigma_y, double qpn_sigma_y)
{
    return 20.0 * std::log10(qpn_sigma_y / sigma_y);
}

}  // namespace sqclock::analysis
