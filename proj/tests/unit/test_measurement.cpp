#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

#include "sqclock/collective_spin.hpp"
#include "sqclock/constants.hpp"
#include "sqclock/error.hpp"
#include "sqclock/measurement.hpp"
#include "sqclock/rng.hpp"

using namespace sqclock;
using namespace sqclock::measure;

namespace {

struct Moments {
    double mean = 0.0, var = 0.0;
};

Moments moments(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / static_cast<double>(v.size());
    double q = 0.0;
    for (double x : v) q += (x - m) * (x - m);
    return {m, q / static_cast<double>(v.size() - 1)};
}

double covariance(const std::vector<double>& a, const std::vector<double>& b)
{
    const double ma = moments(a).mean, mb = moments(b).mean;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(a.size() - 1);
}

FluorConfig quiet_fluor()
{
    FluorConfig f;
    f.background_sigma_photons = 0.0;
    f.position_sigma_mm = 0.0;
    f.photons_per_atom_jitter = 0.0;
    f.unidentified_noise_db = -300.0;
    return f;
}

}  // namespace

TEST_CASE("QND conditioning matches the closed-form Gaussian update over 1e5 shots")
{
    const double n = 390000;
    QndConfig cfg;
    cfg.antisqueeze_var_jy_db = 0.0;  // keep the back-action floor out of the way
    cfg.contrast_after_qnd = 1.0;
    const spin::GaussianSpinState prior = spin::apply_contrast_decay(spin::make_css(n), 0.98);
    const double v = prior.var_jz();
    const double thermal = thermal_inhomogeneity_noise(n, cfg.thermal_beta_sq);
    const double r = resolution_variance(cfg, n) + thermal * thermal;
    const double k = v / (v + r);
    const double want_post = v * r / (v + r);

    // Resolution alone reaches the prepared target from a CSS.
    CHECK(variance_db(v * resolution_variance(cfg, n) / (v + resolution_variance(cfg, n)) / (n / 4.0)) ==
          doctest::Approx(cfg.prepared_var_jz_db));

    Rng rng(2024);
    const int shots = 100000;
    std::vector<double> outcome(shots), truth(shots), residual(shots);
    for (int i = 0; i < shots; ++i) {
        const QndResult q = qnd_measure(prior, cfg, rng);
        CHECK_MESSAGE(std::abs(q.posterior.var_jz() - want_post) <= 1e-9 * want_post, "posterior variance");
        CHECK_MESSAGE(std::abs(q.posterior.mean_jz() - k * q.outcome_jz) <= 1e-9 * n, "posterior mean");
        outcome[i] = q.outcome_jz;
        truth[i] = spin::sample_jz(q.posterior, rng);
        residual[i] = truth[i] - k * outcome[i];
    }
    // A truth drawn from the posterior must reproduce the joint prior statistics.
    CHECK(moments(outcome).var == doctest::Approx(v + r).epsilon(0.01));
    CHECK(moments(truth).var == doctest::Approx(v).epsilon(0.01));
    CHECK(covariance(truth, outcome) == doctest::Approx(v).epsilon(0.01));
    CHECK(moments(residual).var == doctest::Approx(want_post).epsilon(0.01));
}

TEST_CASE("QND back-action floor and contrast cap")
{
    const double n = 390000;
    QndConfig cfg;
    Rng rng(1);
    const QndResult q = qnd_measure(spin::apply_contrast_decay(spin::make_css(n), 0.98), cfg, rng);
    CHECK(q.posterior.var_jy() == doctest::Approx((n / 4.0) * db_to_variance(cfg.antisqueeze_var_jy_db)));
    CHECK(spin::visible_contrast(q.posterior) == doctest::Approx(cfg.contrast_after_qnd));
    CHECK(q.posterior.satisfies_uncertainty(1e-6));
}

TEST_CASE("thermal inhomogeneity term")
{
    CHECK(thermal_inhomogeneity_noise(390000, 0.0) == 0.0);
    const double s = thermal_inhomogeneity_noise(390000, 0.076);
    CHECK(s == doctest::Approx(std::sqrt(390000.0) * 0.076 / std::sqrt(1.152)));
    CHECK(variance_db(s * s / (390000 / 4.0)) == doctest::Approx(-16.98).epsilon(1e-3));
    CHECK_THROWS_AS(thermal_inhomogeneity_noise(100, -0.1), ValidationError);
}

TEST_CASE("beatnote correction inverts the offset and rejects large detunings")
{
    QndConfig cfg;
    Rng rng(9);
    for (int i = 0; i < 100; ++i) {
        const double n = rng.uniform(1e5, 5e5);
        const double delta = rng.uniform(-cfg.beatnote_span_hz, cfg.beatnote_span_hz);
        const double truth = rng.uniform(-300, 300);
        const double measured = truth + beatnote_offset(n, delta, cfg);
        CHECK(beatnote_correct(measured, n, delta, cfg) == doctest::Approx(truth).epsilon(1e-12));
    }
    CHECK_NOTHROW(beatnote_correct(0.0, 1e5, 0.0099 * cfg.mean_detuning_hz, cfg));
    CHECK_THROWS_AS(beatnote_correct(0.0, 1e5, 0.0101 * cfg.mean_detuning_hz, cfg), ValidationError);
    CHECK_THROWS_AS(beatnote_correct(0.0, 1e5, -0.02 * cfg.mean_detuning_hz, cfg), ValidationError);
}

TEST_CASE("detection noise terms relative to QPN")
{
    const double n = 390000;
    CHECK(variance_db(std::pow(photon_noise_jz(n, 65.0), 2) / (n / 4.0)) == doctest::Approx(-18.13).epsilon(1e-3));
    FluorConfig f;
    CHECK(variance_db(std::pow(background_noise_jz(f), 2) / (n / 4.0)) == doctest::Approx(-14.0).epsilon(1e-3));
    CHECK(background_sigma_for(-14.0, n, 65.0) == doctest::Approx(f.background_sigma_photons).epsilon(1e-4));
    CHECK(variance_db(std::pow(unidentified_noise_jz(f, n), 2) / (n / 4.0)) == doctest::Approx(-11.0));
}

TEST_CASE("normalized Jz variance identity holds for binomial atoms and correlated background")
{
    // Oracle: shots built directly in the test, fed through normalized_jz().
    // p is the lower-state fraction, which makes mean J'z = (1 - 2p) N/2.
    const double nbar = 200000;
    const double alpha = 65.0;
    const double s_up = 300.0;  // background std per state, atom units
    const double s_down = 500.0;
    const double rho = 0.5;
    for (double p : {0.5, 0.3, 0.8}) {
        Rng rng(77);
        std::binomial_distribution<long> atoms(static_cast<long>(nbar), 1.0 - p);
        std::mt19937_64 eng(5);
        const int shots = 40000;
        std::vector<double> jz(shots);
        for (int i = 0; i < shots; ++i) {
            const double up_atoms = static_cast<double>(atoms(eng));
            const double down_atoms = nbar - up_atoms;
            const double w1 = rng.normal();
            const double w2 = rng.normal();
            const double x_up = s_up * w1;
            const double x_down = s_down * (rho * w1 + std::sqrt(1 - rho * rho) * w2);
            jz[i] = normalized_jz(alpha * (up_atoms + x_up), alpha * (down_atoms + x_down), nbar, alpha);
        }
        const double want = nbar * p * (1 - p) + (1 - p) * (1 - p) * s_down * s_down + p * p * s_up * s_up -
                            2 * p * (1 - p) * rho * s_up * s_down;
        const Moments m = moments(jz);
        CHECK(m.var == doctest::Approx(want).epsilon(0.05));
        CHECK(std::abs(m.mean - (1 - 2 * p) * nbar / 2.0) < 5.0 * std::sqrt(want / shots));
    }
}

TEST_CASE("fluorescence readout reproduces photon and background noise")
{
    const double n = 390000;
    SUBCASE("photon shot noise only")
    {
        const FluorConfig f = quiet_fluor();
        Rng rng(4);
        std::vector<double> jz(40000);
        for (double& z : jz) z = push_and_fluoresce(0.0, n, f, rng).normalized_jz;
        CHECK(moments(jz).var == doctest::Approx(std::pow(photon_noise_jz(n, f.photons_per_atom), 2)).epsilon(0.03));
    }
    SUBCASE("background added")
    {
        FluorConfig f = quiet_fluor();
        f.background_sigma_photons = 4049.6;
        Rng rng(6);
        std::vector<double> jz(40000);
        for (double& z : jz) z = push_and_fluoresce(0.0, n, f, rng).normalized_jz;
        const double want = std::pow(photon_noise_jz(n, f.photons_per_atom), 2) + std::pow(background_noise_jz(f), 2);
        CHECK(moments(jz).var == doctest::Approx(want).epsilon(0.03));
    }
    Rng rng(1);
    CHECK_THROWS_AS(push_and_fluoresce(0.0, 0.5, quiet_fluor(), rng), ValidationError);
    CHECK_THROWS_AS(push_and_fluoresce(600.0, 1000, quiet_fluor(), rng), ValidationError);
}

TEST_CASE("normalized_jz rejects empty signal")
{
    CHECK(normalized_jz(75, 25, 100, 1.0) == doctest::Approx(25.0));
    CHECK_THROWS_AS(normalized_jz(0.0, 0.0, 100, 1.0), ValidationError);
    CHECK_THROWS_AS(normalized_jz(-5.0, 2.0, 100, 1.0), ValidationError);
}

TEST_CASE("position efficiency fit recovers the slope and corrects shots")
{
    FluorConfig f;
    f.background_sigma_photons = 0.0;
    f.photons_per_atom_jitter = 0.0;
    f.unidentified_noise_db = -300.0;
    f.position_efficiency_slope = 0.05;
    Rng rng(12);
    std::vector<FluorOutcome> cal(4000);
    for (auto& o : cal) o = push_and_fluoresce(0.0, 390000, f, rng);
    const PositionFit fit = fit_position_efficiency(cal);
    CHECK(fit.slope == doctest::Approx(0.05).epsilon(0.05));
    CHECK(fit.intercept == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(fit.slope_stderr > 0.0);

    FluorOutcome far = cal.front();
    far.pushed_position_mm = fit.span_hi_mm + 0.01;
    CHECK(position_correction(far, fit, 390000, f.photons_per_atom).outside_span);
    const CorrectedOutcome inside = position_correction(cal.front(), fit, 390000, f.photons_per_atom);
    CHECK_FALSE(inside.outside_span);
    CHECK(inside.outcome.counts_down == cal.front().counts_down);

    std::vector<FluorOutcome> flat(10, cal.front());
    CHECK_THROWS_AS(fit_position_efficiency(flat), ValidationError);
    CHECK_THROWS_AS(fit_position_efficiency(std::span<const FluorOutcome>(cal.data(), 2)), ValidationError);
}

TEST_CASE("configuration validation")
{
    QndConfig q;
    q.beatnote_span_hz = 0.02 * q.mean_detuning_hz;
    CHECK_THROWS_AS(q.validate(), ValidationError);
    FluorConfig f;
    f.background_correlation = 1.0;
    CHECK_THROWS_AS(f.validate(), ValidationError);
    f.background_correlation = 1.5;
    CHECK_THROWS_AS(f.validate(), ValidationError);
}
