#include <cmath>
#include <vector>

#include "sqclock/analysis.hpp"
#include "sqclock/measurement.hpp"

namespace sqclock::analysis {

double power_sum_db(std::span<const double> dbs)
{
    double sum = 0.0;
    for (double d : dbs) {
        sum += db_to_variance(d);
    }
    return variance_db(sum);
}

NoiseBudget make_budget(std::vector<BudgetEntry> entries)
{
    std::vector<double> dbs;
    dbs.reserve(entries.size());
    for (const BudgetEntry& e : entries) {
        dbs.push_back(e.db);
    }
    const double total = power_sum_db(dbs);
    return {std::move(entries), total};
}

NoiseBudget noise_budget(const ExperimentConfig& cfg)
{
    const double n = cfg.n_atoms;
    const double qpn_var = 0.25 * n;
    auto rel = [&](double sigma_jz) { return variance_db(sigma_jz * sigma_jz / qpn_var); };
    return make_budget({
        {"unidentified", cfg.fluor.unidentified_noise_db},
        {"background", rel(measure::background_noise_jz(cfg.fluor))},
        {"thermal", rel(measure::thermal_inhomogeneity_noise(n, cfg.qnd.thermal_beta_sq))},
        {"photon", rel(measure::photon_noise_jz(n, cfg.fluor.photons_per_atom))},
    });
}

NoiseBudget nominal_budget()
{
    return make_budget({{"unidentified", -11.0}, {"background", -14.0}, {"thermal", -16.0}, {"photon", -18.0}});
}

}  // namespace sqclock::analysis
