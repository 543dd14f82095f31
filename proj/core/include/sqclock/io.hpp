#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sqclock/analysis.hpp"
#include "sqclock/experiment.hpp"

namespace sqclock::io {

inline constexpr std::string_view kToolVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Configuration

/// Parse a JSON config document. Missing keys take their defaults; unknown
/// keys are rejected with their dotted path when `strict`. The result is
/// validated.
ExperimentConfig parse_config_text(std::string_view text, bool strict = true);
ExperimentConfig parse_config(const std::filesystem::path& path, bool strict = true);

/// Canonical JSON (sorted keys, every field present).
std::string serialize_config(const ExperimentConfig& cfg);

/// FNV-1a 64 of the canonical form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Shot records

/// One JSON object, fixed field order, %.17g numbers, no trailing newline.
std::string record_to_line(const ShotRecord& r);
ShotRecord record_from_line(std::string_view line);

struct RecordFile {
    std::vector<ShotRecord> records;
    bool truncated = false;  ///< last line was incomplete and dropped
};

RecordFile read_records(const std::filesystem::path& path);
void write_records(const std::filesystem::path& path, const std::vector<ShotRecord>& records);

struct RunManifest {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string tool_version{kToolVersion};
    std::string start_time;
    std::string end_time;
    std::uint64_t record_count = 0;
    bool complete = false;
    analysis::RemovalReport post_selection;
    std::string config_json;
};

std::filesystem::path manifest_path(const std::filesystem::path& records);
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);

/// Stream every shot to `out`, then write the manifest sidecar. On a write
/// failure the manifest is written with complete = false and the number of
/// whole records on disk, and IoError is rethrown.
RunManifest simulate(const ExperimentConfig& cfg, const std::filesystem::path& out, unsigned threads = 0);

struct LoadedRun {
    ExperimentConfig cfg;
    std::vector<ShotRecord> records;
    std::string config_hash;
    std::filesystem::path path;
};

/// Records plus the config recovered from the manifest sidecar.
LoadedRun load_run(const std::filesystem::path& records);

// ---------------------------------------------------------------------------
// Reports

struct ReportTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data;      ///< one vector per column
    std::vector<std::string> row_labels;        ///< optional leading text column
    std::string label_header;
    std::vector<std::pair<std::string, double>> summary;
    std::string provenance;                     ///< config hashes of the inputs

    void add_column(std::string header, std::vector<double> values);
    std::size_t rows() const;
    std::string to_csv() const;
};

/// Contrast used to convert Jz into phase for a run's readout.
double nominal_contrast(const ExperimentConfig& cfg);

/// Build a named report (table1, tableS1, fig3a, fig3b, fig4a). Rabi-scan
/// runs passed alongside table1 inputs supply fitted contrasts.
/// `confidence` defaults to 0.99 for fig3* and 0.68 otherwise.
ReportTable make_report(std::string_view name, const std::vector<LoadedRun>& runs,
                        std::optional<double> confidence = std::nullopt);

void write_text_file(const std::filesystem::path& path, const std::string& text);

// ---------------------------------------------------------------------------
// Self-test

struct CheckResult {
    std::string name;
    bool passed;
    std::string detail;
};

/// Analytic oracle checks. `omega0_scale` perturbs the clock frequency used
/// by the stability checks (for sensitivity testing).
std::vector<CheckResult> run_selftest(double omega0_scale = 1.0);

}  // namespace sqclock::io
