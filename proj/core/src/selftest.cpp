#include <algorithm>
#include <cmath>
#include <memory>
#include <cstdio>
#include <string>
#include <vector>

#include "sqclock/collective_spin.hpp"
#include "sqclock/io.hpp"
#include "sqclock/measurement.hpp"
#include "sqclock/rng.hpp"

namespace sqclock::io {
namespace {

std::string fmt(const char* f, double a, double b = 0.0)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

bool close_rel(double got, double want, double tol) { return std::abs(got - want) <= tol * std::abs(want); }

/// Deviation of the final Bloch direction from the ideal equator point.
double pulse_error(bool composite, double eps)
{
    const double n = 1e6;
    const spin::GaussianSpinState start = spin::make_css_at_pole(n);
    auto apply = [&](double e) {
        return composite ? spin::composite_pi_half(start, e)
                         : spin::rotate(start, spin::Rotation::equatorial(0.0, kPi / 2.0, e));
    };
    const spin::Vec3 ideal = apply(0.0).mean().normalized();
    return (apply(eps).mean().normalized() - ideal).norm();
}

double error_exponent(bool composite)
{
    return std::log10(pulse_error(composite, 1e-2) / pulse_error(composite, 1e-3));
}

}  // namespace

std::vector<CheckResult> run_selftest(double omega0_scale)
{
    std::vector<CheckResult> out;
    auto check = [&](std::string name, bool ok, std::string detail) {
        out.push_back({std::move(name), ok, std::move(detail)});
    };
    const double omega0 = kClockOmega0 * omega0_scale;

    {
        const analysis::NoiseBudget b = analysis::nominal_budget();
        check("budget_power_sum", std::abs(b.total_db + 7.96) < 0.05, fmt("total %.4f dB (want -7.96)", b.total_db));
    }
    {
        const double single = analysis::make_budget({{"read", -14.0}}).total_db;
        check("budget_single_entry", std::abs(single + 14.0) < 1e-12, fmt("total %.12f dB", single));
    }
    {
        const double a = analysis::make_budget({{"a", -11}, {"b", -14}, {"c", -16}, {"d", -18}}).total_db;
        const double b = analysis::make_budget({{"d", -18}, {"b", -14}, {"a", -11}, {"c", -16}}).total_db;
        check("budget_permutation", std::abs(a - b) < 1e-12, fmt("difference %.3g dB", a - b));
    }
    {
        const double photon = variance_db(std::pow(measure::photon_noise_jz(390000, 65.0), 2) / (0.25 * 390000));
        check("photon_term", std::abs(photon + 18.13) < 0.05, fmt("%.3f dB (want -18.1)", photon));
    }
    {
        const double s = analysis::qpn_stability(3.6e-3, 1.0, 240000, 1.0, omega0);
        check("qpn_3p6ms", close_rel(s, 1.3205e-11, 1e-3), fmt("%.5g (want 1.3205e-11)", s));
    }
    {
        const double s = analysis::qpn_stability(1.3e-3, 1.0, 240000, 1.0, omega0);
        check("qpn_1p3ms", close_rel(s, 3.6568e-11, 1e-3), fmt("%.5g (want 3.657e-11)", s));
    }
    {
        const double r = analysis::qpn_stability(3.6e-3, 1.0, 240000, 4.0, omega0) /
                         analysis::qpn_stability(3.6e-3, 1.0, 240000, 1.0, omega0);
        check("qpn_sqrt_tau", close_rel(r, 0.5, 1e-12), fmt("ratio %.15g", r));
    }
    {
        const double e = error_exponent(true);
        check("composite_pulse_second_order", e >= 1.9 && e <= 2.1, fmt("exponent %.4f", e));
    }
    {
        const double e = error_exponent(false);
        check("plain_pulse_first_order", e >= 0.9 && e <= 1.1, fmt("exponent %.4f", e));
    }
    {
        Rng rng = Rng::for_stream(20240601, 0, 99);
        const std::size_t n = 10000;
        std::vector<double> phi(n);
        for (double& v : phi) {
            v = rng.normal();
        }
        const std::unique_ptr<bool[]> valid(new bool[n]);
        std::fill(valid.get(), valid.get() + n, true);
        const double taus[] = {1.0, 4.0, 16.0, 64.0};
        const analysis::StabilityCurve c =
            analysis::allan_deviation(phi, std::span<const bool>(valid.get(), n), 1.0, taus);
        bool ok = true;
        std::string detail;
        for (std::size_t i = 0; i < c.taus.size(); ++i) {
            const double want = 1.0 / std::sqrt(c.taus[i]);
            const double tol = 3.0 / std::sqrt(static_cast<double>(c.n_pairs_used[i]));
            ok = ok && std::abs(c.sigma_y[i] / want - 1.0) <= tol;
            detail += fmt("tau=%g ratio=%.3f ", c.taus[i], c.sigma_y[i] / want);
        }
        check("allan_white_noise_law", ok, detail);
    }
    {
        const std::vector<double> phi(256, 3.5e-12);
        const std::unique_ptr<bool[]> valid(new bool[phi.size()]);
        std::fill(valid.get(), valid.get() + phi.size(), true);
        const double taus[] = {1.0, 8.0};
        const analysis::StabilityCurve c =
            analysis::allan_deviation(phi, std::span<const bool>(valid.get(), phi.size()), 1.0, taus);
        check("allan_constant_series", c.sigma_y[0] == 0.0 && c.sigma_y[1] == 0.0,
              fmt("sigma %.3g, %.3g", c.sigma_y[0], c.sigma_y[1]));
    }
    {
        const auto [lo, hi] = analysis::chi2_interval(1.0, 200, 0.68);
        check("chi2_interval_n200", std::abs(lo - 0.953) < 2e-3 && std::abs(hi - 1.052) < 2e-3,
              fmt("[%.4f, %.4f] (want [0.953, 1.052])", lo, hi));
    }
    {
        const double stds[] = {1.0, 3.0};
        const std::size_t ns[] = {101, 101};
        const double p = analysis::pooled_std(stds, ns);
        check("pooled_std_linear", std::abs(p - 2.0) < 1e-12, fmt("%.12g (want 2)", p));
    }
    {
        const analysis::SqueezingMetrics css = [] {
            // Two-point sample with variance exactly N/4.
            const double n = 390000;
            const double a = std::sqrt(0.25 * n / 2.0);
            const double v[] = {a, -a};
            return analysis::squeezing_metrics(v, n, 1.0);
        }();
        check("css_metrics", std::abs(css.variance_reduction_db) < 1e-9 && std::abs(css.wineland_db) < 1e-9 &&
                                 close_rel(css.delta_theta, 1.0 / std::sqrt(390000.0), 1e-9),
              fmt("Xi %.3g dB, dtheta %.6g", css.variance_reduction_db, css.delta_theta));
    }
    {
        // sqrt(xi^2 / N) at xi^2 = -5.8 dB; must sit inside 814(61) urad.
        const double dtheta = db_to_amplitude(-5.8) / std::sqrt(390000.0);
        check("delta_theta_from_xi", std::abs(dtheta - 821.3e-6) < 0.5e-6 && std::abs(dtheta - 814e-6) < 61e-6,
              fmt("%.1f urad", dtheta * 1e6));
    }
    {
        const double n = 240000;
        const double xi = db_to_variance(-14.0);
        const double dx0 = std::hypot(740e-6, 590e-6);
        const double g2 = db_to_variance(37.0);
        std::vector<std::pair<double, double>> pts;
        for (int i = -20; i <= 20; ++i) {
            const double th = 0.01 * i;
            pts.emplace_back(th, analysis::dynamic_range_model(th, n, xi, g2, dx0));
        }
        const analysis::DynamicRangeFit fit = analysis::fit_dynamic_range(pts, n, xi, dx0);
        check("dynamic_range_round_trip", close_rel(fit.gamma_sq, g2, 1e-9) && fit.residual_norm < 1e-9,
              fmt("Gamma^2 %.6f dB, residual %.3g", variance_db(fit.gamma_sq), fit.residual_norm));
    }
    {
        const measure::QndConfig q;
        const double raw = 42.0 + measure::beatnote_offset(390000, 2.5e6, q);
        const double back = measure::beatnote_correct(raw, 390000, 2.5e6, q);
        check("beatnote_round_trip", std::abs(back - 42.0) < 1e-9, fmt("recovered %.12g (want 42)", back));
    }
    return out;
}

}  // namespace sqclock::io
