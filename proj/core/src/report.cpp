#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>

#include "sqclock/error.hpp"
#include "sqclock/io.hpp"
#include "sqclock/sequencer.hpp"

namespace sqclock::io {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_clock(Sequence s) { return s == Sequence::ClockCss || s == Sequence::ClockSqueezed; }

void require(bool ok, std::string_view report, std::string_view what)
{
    if (!ok) {
        throw ValidationError(std::string(report) + ": " + std::string(what));
    }
}

std::string provenance_of(const std::vector<LoadedRun>& runs)
{
    std::string p;
    for (const LoadedRun& r : runs) {
        if (!p.empty()) {
            p += ' ';
        }
        p += r.config_hash;
    }
    return p;
}

std::vector<double> observables(const std::vector<ShotRecord>& kept, const ExperimentConfig& cfg)
{
    std::vector<double> v;
    v.reserve(kept.size());
    for (const ShotRecord& r : kept) {
        v.push_back(analysis::observable_jz(r, cfg));
    }
    return v;
}

double sample_std(const std::vector<double>& v)
{
    double mean = 0.0;
    for (double x : v) {
        mean += x;
    }
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) {
        ss += (x - mean) * (x - mean);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

ReportTable table1(const std::vector<LoadedRun>& runs, double m)
{
    using Key = std::pair<double, double>;
    struct Group {
        std::vector<const LoadedRun*> squeeze;
        std::vector<const LoadedRun*> rabi;
    };
    std::map<Key, Group> groups;
    for (const LoadedRun& r : runs) {
        const Key k{r.cfg.lattice_ramp_ms, r.cfg.free_fall_ms};
        if (r.cfg.sequence == Sequence::SqueezeChar) {
            groups[k].squeeze.push_back(&r);
        } else if (r.cfg.sequence == Sequence::RabiScan) {
            groups[k].rabi.push_back(&r);
        } else {
            throw ValidationError("table1: expects squeeze_char (and optionally rabi_scan) records, got " +
                                  std::string(to_string(r.cfg.sequence)));
        }
    }

    std::vector<double> lattice, fall, contrast, fitted, xi_big, xi_small, dtheta, lo, hi, kept, removed;
    for (const auto& [key, g] : groups) {
        require(!g.squeeze.empty(), "table1", "every (lattice, fall) group needs a squeeze_char run");
        const ExperimentConfig& cfg = g.squeeze.front()->cfg;

        double c = nominal_contrast(cfg);
        bool from_fit = false;
        if (!g.rabi.empty()) {
            std::vector<double> cs;
            for (const LoadedRun* r : g.rabi) {
                const auto curve = seq::rabi_curve(r->cfg, r->records);
                cs.push_back(analysis::fit_rabi(curve).contrast);
            }
            c = 0.0;
            for (double x : cs) {
                c += x;
            }
            c /= static_cast<double>(cs.size());
            from_fit = true;
        }

        std::vector<double> stds;
        std::vector<std::size_t> ns;
        std::size_t total = 0;
        std::size_t dropped = 0;
        for (const LoadedRun* r : g.squeeze) {
            const analysis::PostSelection ps = analysis::prepare_records(r->records, r->cfg);
            require(ps.kept.size() >= 2, "table1", "fewer than 2 shots survive post-selection");
            stds.push_back(sample_std(observables(ps.kept, r->cfg)));
            ns.push_back(ps.kept.size());
            total += ps.report.total;
            dropped += ps.report.removed;
        }
        const analysis::PooledResult pooled = analysis::pool_datasets(stds, ns, m);
        const double half_n = 0.5 * cfg.n_atoms;
        const double xi = variance_db(pooled.stddev * pooled.stddev / (0.5 * half_n));

        lattice.push_back(key.first);
        fall.push_back(key.second);
        contrast.push_back(c);
        fitted.push_back(from_fit ? 1.0 : 0.0);
        xi_big.push_back(xi);
        xi_small.push_back(xi - 20.0 * std::log10(c));
        dtheta.push_back(pooled.stddev / (c * half_n));
        lo.push_back(pooled.ci_low / (c * half_n));
        hi.push_back(pooled.ci_high / (c * half_n));
        kept.push_back(static_cast<double>(std::accumulate(ns.begin(), ns.end(), std::size_t{0})));
        removed.push_back(total == 0 ? 0.0 : static_cast<double>(dropped) / static_cast<double>(total));
    }

    ReportTable t;
    t.name = "table1";
    t.add_column("lattice_ramp_ms", lattice);
    t.add_column("free_fall_ms", fall);
    t.add_column("contrast", contrast);
    t.add_column("contrast_from_fit", fitted);
    t.add_column("Xi_sq_dB", xi_big);
    t.add_column("xi_sq_dB", xi_small);
    t.add_column("delta_theta_rad", dtheta);
    t.add_column("delta_theta_ci_low_rad", lo);
    t.add_column("delta_theta_ci_high_rad", hi);
    t.add_column("kept_shots", kept);
    t.add_column("removed_fraction", removed);
    return t;
}

ReportTable table_s1(const std::vector<LoadedRun>& runs)
{
    require(runs.size() == 1, "tableS1", "expects exactly one squeeze_char record file");
    const LoadedRun& run = runs.front();
    require(run.cfg.sequence == Sequence::SqueezeChar, "tableS1", "records must come from squeeze_char");

    const analysis::NoiseBudget model = analysis::noise_budget(run.cfg);
    const analysis::NoiseBudget nominal = analysis::nominal_budget();

    const analysis::PostSelection ps = analysis::prepare_records(run.records, run.cfg);
    require(ps.kept.size() >= 2, "tableS1", "fewer than 2 shots survive post-selection");
    const double qpn = 0.25 * run.cfg.n_atoms;
    const double s = sample_std(observables(ps.kept, run.cfg));
    const double readout = measure::resolution_variance(run.cfg.qnd, run.cfg.n_atoms);
    const double excess = s * s - readout;
    const double mc_db = excess > 0.0 ? variance_db(excess / qpn) : kNaN;

    ReportTable t;
    t.name = "tableS1";
    t.label_header = "term";
    std::vector<double> model_db, nominal_db;
    for (std::size_t i = 0; i < model.entries.size(); ++i) {
        t.row_labels.push_back(model.entries[i].label);
        model_db.push_back(model.entries[i].db);
        nominal_db.push_back(nominal.entries[i].db);
    }
    t.row_labels.push_back("total");
    model_db.push_back(model.total_db);
    nominal_db.push_back(nominal.total_db);
    t.row_labels.push_back("monte_carlo_total");
    model_db.push_back(mc_db);
    nominal_db.push_back(kNaN);
    t.add_column("model_dB", model_db);
    t.add_column("nominal_dB", nominal_db);
    t.summary = {{"monte_carlo_total_dB", mc_db}, {"model_total_dB", model.total_db},
                 {"nominal_total_dB", nominal.total_db}};
    return t;
}

ReportTable fig3a(const std::vector<LoadedRun>& runs, double m)
{
    std::vector<const LoadedRun*> sorted;
    for (const LoadedRun& r : runs) {
        require(is_clock(r.cfg.sequence), "fig3a", "records must come from clock_css or clock_squeezed");
        sorted.push_back(&r);
    }
    std::stable_sort(sorted.begin(), sorted.end(), [](const LoadedRun* a, const LoadedRun* b) {
        return std::pair(a->cfg.sequence, a->cfg.ramsey_ms) < std::pair(b->cfg.sequence, b->cfg.ramsey_ms);
    });

    std::vector<double> t_int, squeezed, n, sigma, lo, hi, qpn, gain;
    for (const LoadedRun* r : sorted) {
        const ExperimentConfig& cfg = r->cfg;
        const analysis::PostSelection ps = analysis::prepare_records(r->records, cfg);
        const double taus[] = {cfg.cycle_s};
        const analysis::StabilityCurve c =
            analysis::allan_deviation(ps.flagged, cfg, nominal_contrast(cfg), taus, m);
        const double q = analysis::qpn_stability(cfg.ramsey_s(), cfg.cycle_s, cfg.n_atoms, cfg.cycle_s);
        t_int.push_back(cfg.ramsey_s());
        squeezed.push_back(cfg.sequence == Sequence::ClockSqueezed ? 1.0 : 0.0);
        n.push_back(cfg.n_atoms);
        sigma.push_back(c.sigma_y[0]);
        lo.push_back(c.ci_low[0]);
        hi.push_back(c.ci_high[0]);
        qpn.push_back(q);
        gain.push_back(analysis::metrological_gain_db(c.sigma_y[0], q));
    }
    ReportTable t;
    t.name = "fig3a";
    t.add_column("T_int_s", t_int);
    t.add_column("squeezed", squeezed);
    t.add_column("n_atoms", n);
    t.add_column("sigma_y_1cycle", sigma);
    t.add_column("sigma_y_ci_low", lo);
    t.add_column("sigma_y_ci_high", hi);
    t.add_column("qpn_sigma_y_1cycle", qpn);
    t.add_column("gain_vs_qpn_dB", gain);
    return t;
}

ReportTable fig3b(const std::vector<LoadedRun>& runs, double m)
{
    std::vector<double> taus_col, sigma, lo, hi, pairs, qpn, squeezed, t_int;
    for (const LoadedRun& r : runs) {
        const ExperimentConfig& cfg = r.cfg;
        require(is_clock(cfg.sequence), "fig3b", "records must come from clock_css or clock_squeezed");
        const analysis::PostSelection ps = analysis::prepare_records(r.records, cfg);
        std::vector<double> taus;
        const double total = static_cast<double>(ps.flagged.size()) * cfg.cycle_s;
        for (double tau = cfg.cycle_s; tau <= 0.5 * total; tau *= 2.0) {
            taus.push_back(tau);
        }
        require(!taus.empty(), "fig3b", "need at least 2 shots");
        const analysis::StabilityCurve c = analysis::allan_deviation(ps.flagged, cfg, nominal_contrast(cfg), taus, m);
        for (std::size_t i = 0; i < c.taus.size(); ++i) {
            taus_col.push_back(c.taus[i]);
            sigma.push_back(c.sigma_y[i]);
            lo.push_back(c.ci_low[i]);
            hi.push_back(c.ci_high[i]);
            pairs.push_back(static_cast<double>(c.n_pairs_used[i]));
            qpn.push_back(analysis::qpn_stability(cfg.ramsey_s(), cfg.cycle_s, cfg.n_atoms, c.taus[i]));
            squeezed.push_back(cfg.sequence == Sequence::ClockSqueezed ? 1.0 : 0.0);
            t_int.push_back(cfg.ramsey_s());
        }
    }
    ReportTable t;
    t.name = "fig3b";
    t.add_column("tau_s", taus_col);
    t.add_column("sigma_y", sigma);
    t.add_column("sigma_y_ci_low", lo);
    t.add_column("sigma_y_ci_high", hi);
    t.add_column("pairs_used", pairs);
    t.add_column("qpn_sigma_y", qpn);
    t.add_column("squeezed", squeezed);
    t.add_column("T_int_s", t_int);
    return t;
}

ReportTable fig4a(const std::vector<LoadedRun>& runs, double m)
{
    require(runs.size() == 1, "fig4a", "expects exactly one dynamic_range record file");
    const LoadedRun& run = runs.front();
    const ExperimentConfig& cfg = run.cfg;
    require(cfg.sequence == Sequence::DynamicRange, "fig4a", "records must come from dynamic_range");

    const analysis::PostSelection ps = analysis::prepare_records(run.records, cfg);
    const double c = nominal_contrast(cfg);
    const double half_n = 0.5 * cfg.n_atoms;

    std::vector<double> thetas;
    for (double th : cfg.theta_list_rad) {
        if (std::find(thetas.begin(), thetas.end(), th) == thetas.end()) {
            thetas.push_back(th);
        }
    }
    std::sort(thetas.begin(), thetas.end());

    std::vector<double> dtheta, lo, hi, samples;
    std::vector<std::pair<double, double>> points;
    for (double th : thetas) {
        std::vector<double> v;
        for (const ShotRecord& r : ps.kept) {
            if (r.theta_true == th) {
                v.push_back(analysis::observable_jz(r, cfg));
            }
        }
        require(v.size() >= 2, "fig4a", "fewer than 2 kept shots at some theta");
        const double s = sample_std(v);
        const auto [l, h] = analysis::chi2_interval(s, v.size(), m);
        dtheta.push_back(s / (c * half_n));
        lo.push_back(l / (c * half_n));
        hi.push_back(h / (c * half_n));
        samples.push_back(static_cast<double>(v.size()));
        points.emplace_back(th, dtheta.back());
    }

    const double xi_sq = db_to_variance(cfg.qnd.prepared_var_jz_db);
    const double dx0 = std::hypot(cfg.dr_detection_noise_rad, cfg.dr_technical_noise_rad);
    const analysis::DynamicRangeFit fit = analysis::fit_dynamic_range(points, cfg.n_atoms, xi_sq, dx0);

    // First upward crossing of 1/sqrt(N) in the data on the positive side.
    const double limit = 1.0 / std::sqrt(cfg.n_atoms);
    double data_crossing = kNaN;
    for (std::size_t i = 1; i < thetas.size(); ++i) {
        if (thetas[i - 1] >= 0.0 && dtheta[i - 1] < limit && dtheta[i] >= limit) {
            const double f = (limit - dtheta[i - 1]) / (dtheta[i] - dtheta[i - 1]);
            data_crossing = thetas[i - 1] + f * (thetas[i] - thetas[i - 1]);
            break;
        }
    }

    std::vector<double> model, qpn;
    for (double th : thetas) {
        model.push_back(analysis::dynamic_range_model(th, cfg.n_atoms, fit.xi_sq, fit.gamma_sq, fit.delta_x0));
        qpn.push_back(1.0 / std::sqrt(cfg.n_atoms));
    }
    ReportTable t;
    t.name = "fig4a";
    t.add_column("theta_rad", thetas);
    t.add_column("delta_theta_rad", dtheta);
    t.add_column("delta_theta_ci_low_rad", lo);
    t.add_column("delta_theta_ci_high_rad", hi);
    t.add_column("samples", samples);
    t.add_column("fit_delta_theta_rad", model);
    t.add_column("qpn_rad", qpn);
    t.summary = {{"gamma_sq_dB", variance_db(fit.gamma_sq)},
                 {"delta_x0_rad", fit.delta_x0},
                 {"xi_sq_dB", variance_db(fit.xi_sq)},
                 {"qpn_crossing_rad", analysis::qpn_crossing(fit, cfg.n_atoms)},
                 {"data_crossing_rad", data_crossing},
                 {"residual_norm_rad", fit.residual_norm}};
    return t;
}

std::string format_cell(double v)
{
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

void ReportTable::add_column(std::string header, std::vector<double> values)
{
    if (!data.empty() && values.size() != data.front().size()) {
        throw ValidationError("report " + name + ": column " + header + " has a different length");
    }
    if (!row_labels.empty() && values.size() != row_labels.size()) {
        throw ValidationError("report " + name + ": column " + header + " does not match the row labels");
    }
    columns.push_back(std::move(header));
    data.push_back(std::move(values));
}

std::size_t ReportTable::rows() const
{
    return data.empty() ? row_labels.size() : data.front().size();
}

std::string ReportTable::to_csv() const
{
    std::string out;
    const bool labels = !row_labels.empty();
    if (labels) {
        out += label_header;
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (labels || c > 0) {
            out += ',';
        }
        out += columns[c];
    }
    out += '\n';
    for (std::size_t r = 0; r < rows(); ++r) {
        if (labels) {
            out += row_labels[r];
        }
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (labels || c > 0) {
                out += ',';
            }
            out += format_cell(data[c][r]);
        }
        out += '\n';
    }
    return out;
}

double nominal_contrast(const ExperimentConfig& cfg)
{
    if (cfg.sequence == Sequence::ClockCss) {
        return std::min(1.0, cfg.css_contrast * cfg.final_contrast() / cfg.qnd.contrast_after_qnd);
    }
    return cfg.final_contrast();
}

ReportTable make_report(std::string_view name, const std::vector<LoadedRun>& runs, std::optional<double> confidence)
{
    if (runs.empty()) {
        throw ValidationError(std::string(name) + ": no record files given");
    }
    const bool clock_plot = name == "fig3a" || name == "fig3b";
    const double m = confidence.value_or(clock_plot ? 0.99 : 0.68);

    ReportTable t;
    if (name == "table1") {
        t = table1(runs, m);
    } else if (name == "tableS1") {
        t = table_s1(runs);
    } else if (name == "fig3a") {
        t = fig3a(runs, m);
    } else if (name == "fig3b") {
        t = fig3b(runs, m);
    } else if (name == "fig4a") {
        t = fig4a(runs, m);
    } else {
        throw ValidationError("unknown report '" + std::string(name) +
                              "' (expected table1, tableS1, fig3a, fig3b or fig4a)");
    }
    t.provenance = provenance_of(runs);
    return t;
}

}  // namespace sqclock::io
