#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "sqclock/error.hpp"
#include "sqclock/io.hpp"
#include "sqclock/sequencer.hpp"

namespace sqclock::io {
namespace {

using nlohmann::json;

struct FlagName {
    ShotFlag flag;
    const char* name;
};

constexpr FlagName kFlagNames[] = {
    {kQndOutOfRange, "qnd_out_of_range"},
    {kFluorFailed, "fluor_failed"},
    {kClockOutlier, "clock_outlier"},
    {kPositionOutOfSpan, "position_out_of_span"},
};

void put_number(std::string& out, double v)
{
    if (!std::isfinite(v)) {
        throw ValidationError("record_to_line: non-finite value");
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}

void put_field(std::string& out, const char* key, double v)
{
    out += '"';
    out += key;
    out += "\":";
    put_number(out, v);
}

void put_optional(std::string& out, const char* key, const std::optional<double>& v)
{
    out += '"';
    out += key;
    out += "\":";
    if (v) {
        put_number(out, *v);
    } else {
        out += "null";
    }
}

double num(const json& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number()) {
        throw IoError(std::string("record: missing or non-numeric field '") + key + "'");
    }
    return it->get<double>();
}

std::string utc_now()
{
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json removal_to_json(const analysis::RemovalReport& r)
{
    return {{"total", r.total},
            {"removed", r.removed},
            {"removed_fraction", r.removed_fraction()},
            {"qnd_out_of_range", r.qnd_out_of_range},
            {"fluor_failed", r.fluor_failed},
            {"clock_outliers", r.clock_outliers},
            {"position_out_of_span", r.position_out_of_span}};
}

}  // namespace

std::string record_to_line(const ShotRecord& r)
{
    std::string out;
    out.reserve(320);
    out += "{\"shot_index\":";
    out += std::to_string(r.shot_index);
    out += ',';
    put_field(out, "t_s", r.t_s);
    out += ',';
    put_optional(out, "qnd1_jz", r.qnd1_jz);
    out += ',';
    put_optional(out, "qnd2_jz", r.qnd2_jz);
    out += ",\"fluor\":{";
    put_field(out, "counts_up", r.fluor.counts_up);
    out += ',';
    put_field(out, "counts_down", r.fluor.counts_down);
    out += ',';
    put_field(out, "pushed_position_mm", r.fluor.pushed_position_mm);
    out += ',';
    put_field(out, "normalized_jz", r.fluor.normalized_jz);
    out += "},";
    put_field(out, "delta_hz", r.delta_hz);
    out += ',';
    put_field(out, "theta_true", r.theta_true);
    out += ',';
    put_field(out, "pulse_area", r.pulse_area);
    out += ",\"flags\":[";
    bool first = true;
    for (const FlagName& f : kFlagNames) {
        if (r.has(f.flag)) {
            out += first ? "\"" : ",\"";
            out += f.name;
            out += '"';
            first = false;
        }
    }
    out += "]}";
    return out;
}

ShotRecord record_from_line(std::string_view line)
{
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw IoError(std::string("record: malformed line: ") + e.what());
    }
    if (!j.is_object()) {
        throw IoError("record: expected an object");
    }
    ShotRecord r;
    const auto idx = j.find("shot_index");
    if (idx == j.end() || !idx->is_number_unsigned()) {
        throw IoError("record: missing shot_index");
    }
    r.shot_index = idx->get<std::uint64_t>();
    r.t_s = num(j, "t_s");
    for (auto [key, slot] : {std::pair{"qnd1_jz", &r.qnd1_jz}, std::pair{"qnd2_jz", &r.qnd2_jz}}) {
        const auto it = j.find(key);
        if (it != j.end() && !it->is_null()) {
            if (!it->is_number()) {
                throw IoError(std::string("record: non-numeric ") + key);
            }
            *slot = it->get<double>();
        }
    }
    const auto fl = j.find("fluor");
    if (fl == j.end() || !fl->is_object()) {
        throw IoError("record: missing fluor");
    }
    r.fluor.counts_up = num(*fl, "counts_up");
    r.fluor.counts_down = num(*fl, "counts_down");
    r.fluor.pushed_position_mm = num(*fl, "pushed_position_mm");
    r.fluor.normalized_jz = num(*fl, "normalized_jz");
    r.delta_hz = num(j, "delta_hz");
    r.theta_true = num(j, "theta_true");
    r.pulse_area = num(j, "pulse_area");
    const auto flags = j.find("flags");
    if (flags != j.end()) {
        if (!flags->is_array()) {
            throw IoError("record: flags must be an array");
        }
        for (const json& f : *flags) {
            bool known = false;
            for (const FlagName& n : kFlagNames) {
                if (f.is_string() && f.get<std::string>() == n.name) {
                    r.flags |= n.flag;
                    known = true;
                }
            }
            if (!known) {
                throw IoError("record: unknown flag " + f.dump());
            }
        }
    }
    return r;
}

RecordFile read_records(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open records " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();

    RecordFile file;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        const std::size_t nl = text.find('\n', pos);
        ++line_no;
        if (nl == std::string::npos) {
            // A write interrupted mid-record leaves an unterminated tail.
            file.truncated = true;
            break;
        }
        const std::string_view line(text.data() + pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) {
            continue;
        }
        try {
            file.records.push_back(record_from_line(line));
        } catch (const IoError& e) {
            throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return file;
}

void write_records(const std::filesystem::path& path, const std::vector<ShotRecord>& records)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot create " + path.string());
    }
    for (const ShotRecord& r : records) {
        out << record_to_line(r) << '\n';
    }
    out.flush();
    if (!out) {
        throw IoError("write failed on " + path.string());
    }
}

std::filesystem::path manifest_path(const std::filesystem::path& records)
{
    return std::filesystem::path(records.string() + ".manifest.json");
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m)
{
    json config = m.config_json.empty() ? json::object() : json::parse(m.config_json);
    const json j{
        {"config_hash", m.config_hash},
        {"seed", m.seed},
        {"tool_version", m.tool_version},
        {"start_time", m.start_time},
        {"end_time", m.end_time},
        {"record_count", m.record_count},
        {"complete", m.complete},
        {"post_selection", removal_to_json(m.post_selection)},
        {"config", config},
    };
    write_text_file(path, j.dump(2) + "\n");
}

RunManifest read_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open manifest " + path.string());
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw IoError("manifest " + path.string() + " is malformed: " + e.what());
    }
    RunManifest m;
    try {
        m.config_hash = j.at("config_hash").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.tool_version = j.at("tool_version").get<std::string>();
        m.start_time = j.at("start_time").get<std::string>();
        m.end_time = j.at("end_time").get<std::string>();
        m.record_count = j.at("record_count").get<std::uint64_t>();
        m.complete = j.at("complete").get<bool>();
        const json& ps = j.at("post_selection");
        m.post_selection.total = ps.at("total").get<std::size_t>();
        m.post_selection.removed = ps.at("removed").get<std::size_t>();
        m.post_selection.qnd_out_of_range = ps.at("qnd_out_of_range").get<std::size_t>();
        m.post_selection.fluor_failed = ps.at("fluor_failed").get<std::size_t>();
        m.post_selection.clock_outliers = ps.at("clock_outliers").get<std::size_t>();
        m.post_selection.position_out_of_span = ps.at("position_out_of_span").get<std::size_t>();
        m.config_json = j.at("config").dump();
    } catch (const json::exception& e) {
        throw IoError("manifest " + path.string() + ": " + e.what());
    }
    return m;
}

RunManifest simulate(const ExperimentConfig& cfg, const std::filesystem::path& out, unsigned threads)
{
    cfg.validate();
    RunManifest m;
    m.config_hash = config_hash(cfg);
    m.seed = cfg.seed;
    m.start_time = utc_now();
    m.config_json = serialize_config(cfg);
    const std::filesystem::path mpath = manifest_path(out);

    std::ofstream file(out, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw IoError("cannot create " + out.string());
    }
    // Written up front so an aborted run is recognizable as incomplete.
    write_manifest(mpath, m);

    std::vector<ShotRecord> all_records;
    all_records.reserve(cfg.shots);
    try {
        seq::stream_records(cfg, [&](const ShotRecord& r) {
            file << record_to_line(r) << '\n';
            if (!file) {
                throw IoError("write failed on " + out.string() + " after " + std::to_string(m.record_count) +
                              " records");
            }
            ++m.record_count;
            all_records.push_back(r);
        }, threads);
        file.flush();
        if (!file) {
            throw IoError("flush failed on " + out.string());
        }
    } catch (const IoError&) {
        m.end_time = utc_now();
        m.complete = false;
        try {
            write_manifest(mpath, m);
        } catch (const IoError&) {
            // The sidecar sits on the same device; nothing more to do.
        }
        throw;
    }
    file.close();

    if (!all_records.empty()) {
        m.post_selection = analysis::prepare_records(all_records, cfg).report;
    }
    m.end_time = utc_now();
    m.complete = true;
    write_manifest(mpath, m);
    return m;
}

LoadedRun load_run(const std::filesystem::path& records)
{
    const RunManifest m = read_manifest(manifest_path(records));
    LoadedRun run;
    run.cfg = parse_config_text(m.config_json);
    run.config_hash = config_hash(run.cfg);
    if (run.config_hash != m.config_hash) {
        throw IoError("manifest for " + records.string() + " has a config hash that does not match its config");
    }
    RecordFile file = read_records(records);
    run.records = std::move(file.records);
    run.path = records;
    return run;
}

void write_text_file(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot create " + path.string());
    }
    out << text;
    out.flush();
    if (!out) {
        throw IoError("write failed on " + path.string());
    }
}

}  // namespace sqclock::io
