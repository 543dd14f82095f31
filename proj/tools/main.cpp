// Command-line front end: simulate / report / selftest.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "sqclock/error.hpp"
#include "sqclock/io.hpp"

namespace {

enum Exit : int { kOk = 0, kValidation = 1, kIo = 2, kSelftestFailed = 3 };

int cmd_simulate(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out,
                 unsigned threads)
{
    sqclock::ExperimentConfig cfg =
        config_path.empty() ? sqclock::io::parse_config_text("") : sqclock::io::parse_config(config_path);
    if (seed) {
        cfg.seed = *seed;
    }
    const sqclock::io::RunManifest m = sqclock::io::simulate(cfg, out, threads);
    std::printf("wrote %llu records to %s (config %s, seed %llu)\n",
                static_cast<unsigned long long>(m.record_count), out.c_str(), m.config_hash.c_str(),
                static_cast<unsigned long long>(m.seed));
    std::printf("post-selection removed %zu of %zu shots (%.1f%%)\n", m.post_selection.removed,
                m.post_selection.total, 100.0 * m.post_selection.removed_fraction());
    return kOk;
}

int cmd_report(const std::vector<std::string>& records, const std::string& name, const std::string& out,
               std::optional<double> confidence)
{
    std::vector<sqclock::io::LoadedRun> runs;
    for (const std::string& path : records) {
        runs.push_back(sqclock::io::load_run(path));
    }
    const sqclock::io::ReportTable t = sqclock::io::make_report(name, runs, confidence);
    const std::string csv = t.to_csv();
    if (out.empty() || out == "-") {
        std::cout << csv;
    } else {
        sqclock::io::write_text_file(out, csv);
        std::printf("wrote %s (%zu rows) from %s\n", out.c_str(), t.rows(), t.provenance.c_str());
    }
    for (const auto& [key, value] : t.summary) {
        std::fprintf(stderr, "%s = %.6g\n", key.c_str(), value);
    }
    return kOk;
}

int cmd_selftest(double omega0_scale)
{
    const auto results = sqclock::io::run_selftest(omega0_scale);
    int failed = 0;
    for (const auto& r : results) {
        std::printf("%s %-32s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        failed += r.passed ? 0 : 1;
    }
    std::printf("%zu checks, %d failed\n", results.size(), failed);
    return failed == 0 ? kOk : kSelftestFailed;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Squeezed-state fountain clock simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    unsigned threads = 0;
    auto* sim = app.add_subcommand("simulate", "Run a sequence and write shot records");
    sim->add_option("--config", config_path, "JSON config (defaults when omitted)");
    sim->add_option("--seed", seed, "Override the config seed");
    sim->add_option("--out", out, "Record file (newline-delimited JSON)")->required();
    sim->add_option("--threads", threads, "Worker threads (0 = all cores)");

    std::vector<std::string> records;
    std::string report_name;
    std::string report_out;
    std::optional<double> confidence;
    auto* rep = app.add_subcommand("report", "Build a CSV report from record files");
    rep->add_option("--records", records, "Record files")->required()->expected(1, -1);
    rep->add_option("--report", report_name, "table1, tableS1, fig3a, fig3b or fig4a")->required();
    rep->add_option("--out", report_out, "CSV path (stdout when omitted)");
    rep->add_option("--confidence", confidence, "Confidence level for error bars")
        ->check(CLI::Range(0.0, 1.0));

    double omega0_scale = 1.0;
    auto* self = app.add_subcommand("selftest", "Run the analytic oracle checks");
    self->add_option("--omega0-scale", omega0_scale)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kValidation;
    }

    try {
        if (*sim) {
            return cmd_simulate(config_path, seed, out, threads);
        }
        if (*rep) {
            return cmd_report(records, report_name, report_out, confidence);
        }
        return cmd_selftest(omega0_scale);
    } catch (const sqclock::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    } catch (const sqclock::IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kValidation;
    }
}
