#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "sqclock/error.hpp"
#include "sqclock/io.hpp"
#include "sqclock/sequencer.hpp"

using namespace sqclock;
using namespace sqclock::io;
namespace fs = std::filesystem;

namespace {

fs::path tmp(const std::string& name)
{
    const fs::path dir = fs::path(SQCLOCK_TEST_TMP) / "io";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string error_of(auto&& fn)
{
    try {
        fn();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

ExperimentConfig small_run(Sequence s = Sequence::SqueezeChar, std::uint64_t shots = 400)
{
    ExperimentConfig cfg;
    cfg.sequence = s;
    cfg.shots = shots;
    cfg.seed = 5;
    return cfg;
}

}  // namespace

TEST_CASE("empty config yields the defaults")
{
    const std::string defaults = serialize_config(ExperimentConfig{});
    CHECK(serialize_config(parse_config_text("")) == defaults);
    CHECK(serialize_config(parse_config_text("  \n\t ")) == defaults);
    CHECK(serialize_config(parse_config_text("{}")) == defaults);
}

TEST_CASE("config errors name the field")
{
    const std::string fov = error_of([] { parse_config_text(R"({"lattice_ramp_ms": 0.2, "free_fall_ms": 8})"); });
    CHECK(fov.find("free_fall_ms") != std::string::npos);
    const std::string unknown = error_of([] { parse_config_text(R"({"qnd": {"foo": 1}})"); });
    CHECK(unknown.find("qnd.foo") != std::string::npos);
    CHECK_THROWS_AS(parse_config_text(R"({"n_atoms": "many"})"), ValidationError);
    CHECK_THROWS_AS(parse_config_text(R"({"sequence": "bogus"})"), ValidationError);
    CHECK_THROWS_AS(parse_config_text("{not json"), ValidationError);
    CHECK_NOTHROW(parse_config_text(R"({"qnd": {"foo": 1}})", false));
    CHECK(serialize_config(parse_config_text(R"({"lattice_ramp_ms": 7.0, "free_fall_ms": 8})")) !=
          serialize_config(ExperimentConfig{}));
}

TEST_CASE("config round trip and hash")
{
    ExperimentConfig cfg;
    cfg.sequence = Sequence::DynamicRange;
    cfg.ramsey_ms = 0.01;
    cfg.theta_list_rad = {-0.1, 0.0, 0.1};
    cfg.n_atoms = 240000;
    cfg.qnd.antisqueeze_var_jy_db = 36.0;
    cfg.contrast_table[7.0] = 0.731;
    const ExperimentConfig back = parse_config_text(serialize_config(cfg));
    CHECK(serialize_config(back) == serialize_config(cfg));
    CHECK(config_hash(back) == config_hash(cfg));
    CHECK(config_hash(cfg).size() == 16);

    const ExperimentConfig a = parse_config_text(R"({"n_atoms": 240000, "seed": 9, "qnd": {"thermal_beta_sq": 0.05, "linear_range_jz": 150}})");
    const ExperimentConfig b = parse_config_text(R"({"qnd": {"linear_range_jz": 150, "thermal_beta_sq": 0.05}, "seed": 9, "n_atoms": 240000})");
    CHECK(config_hash(a) == config_hash(b));

    const std::string base = config_hash(ExperimentConfig{});
    ExperimentConfig c;
    c.seed = 2;
    CHECK(config_hash(c) != base);
    c = {};
    c.fluor.photons_per_atom = 65.0000001;
    CHECK(config_hash(c) != base);
    c = {};
    c.qnd.beatnote_span_hz = 2.9e6;
    CHECK(config_hash(c) != base);
    c = {};
    c.dr_detection_noise_rad = 741e-6;
    CHECK(config_hash(c) != base);
}

TEST_CASE("config files on disk")
{
    const fs::path p = tmp("cfg.json");
    write_text_file(p, R"({"shots": 12})");
    CHECK(parse_config(p).shots == 12);
    CHECK_THROWS_AS(parse_config(tmp("missing.json")), IoError);
}

TEST_CASE("records round trip exactly")
{
    const auto recs = seq::simulate_records(small_run(Sequence::SqueezeChar, 50));
    for (const ShotRecord& r : recs) CHECK(record_from_line(record_to_line(r)) == r);
    ShotRecord r = recs.front();
    r.qnd1_jz.reset();
    r.qnd2_jz.reset();
    r.flags = kQndOutOfRange | kPositionOutOfSpan;
    r.fluor.normalized_jz = 1.0 / 3.0;
    CHECK(record_from_line(record_to_line(r)) == r);
    CHECK_THROWS_AS(record_from_line(R"({"shot_index": 1})"), IoError);
    CHECK_THROWS_AS(record_from_line("[1,2]"), IoError);
}

TEST_CASE("truncated and malformed record files")
{
    const auto recs = seq::simulate_records(small_run(Sequence::SqueezeChar, 5));
    const fs::path p = tmp("trunc.jsonl");
    write_records(p, recs);
    {
        std::ofstream out(p, std::ios::app | std::ios::binary);
        const std::string partial = record_to_line(recs[0]);
        out << partial.substr(0, partial.size() / 2);
    }
    const RecordFile rf = read_records(p);
    CHECK(rf.truncated);
    CHECK(rf.records == recs);

    const fs::path bad = tmp("bad.jsonl");
    write_text_file(bad, record_to_line(recs[0]) + "\n{oops\n" + record_to_line(recs[1]) + "\n");
    const std::string msg = error_of([&] { read_records(bad); });
    CHECK(msg.find("bad.jsonl:2") != std::string::npos);
    CHECK_THROWS_AS(read_records(tmp("nope.jsonl")), IoError);
}

TEST_CASE("zero-shot run gives an empty file and a valid manifest")
{
    const fs::path p = tmp("zero.jsonl");
    const RunManifest m = simulate(small_run(Sequence::SqueezeChar, 0), p);
    CHECK(fs::file_size(p) == 0);
    CHECK(m.complete);
    CHECK(m.record_count == 0);
    const RunManifest back = read_manifest(manifest_path(p));
    CHECK(back.complete);
    CHECK(back.config_hash == m.config_hash);
    CHECK(load_run(p).records.empty());
}

TEST_CASE("manifest records provenance and detects tampering")
{
    const fs::path p = tmp("run.jsonl");
    const ExperimentConfig cfg = small_run();
    const RunManifest m = simulate(cfg, p, 2);
    CHECK(m.complete);
    CHECK(m.record_count == cfg.shots);
    CHECK(m.seed == cfg.seed);
    CHECK(m.tool_version == std::string(kToolVersion));
    CHECK(m.post_selection.total == cfg.shots);
    const LoadedRun run = load_run(p);
    CHECK(run.records.size() == cfg.shots);
    CHECK(run.config_hash == config_hash(cfg));

    nlohmann::json j = nlohmann::json::parse(slurp(manifest_path(p)));
    j["config_hash"] = "0000000000000000";
    write_text_file(manifest_path(p), j.dump());
    CHECK_THROWS_AS(load_run(p), IoError);
}

TEST_CASE("identical config and seed give byte-identical records and reports")
{
    const ExperimentConfig cfg = small_run(Sequence::SqueezeChar, 600);
    const fs::path a = tmp("det_a.jsonl"), b = tmp("det_b.jsonl");
    simulate(cfg, a, 1);
    simulate(cfg, b, 4);
    CHECK(slurp(a) == slurp(b));
    const std::string before = slurp(a);
    const std::string ra = make_report("table1", {load_run(a)}).to_csv();
    const std::string rb = make_report("table1", {load_run(b)}).to_csv();
    CHECK(ra == rb);
    CHECK(make_report("tableS1", {load_run(a)}).to_csv() == make_report("tableS1", {load_run(b)}).to_csv());
    // Reports never touch their inputs.
    CHECK(slurp(a) == before);
}

TEST_CASE("reports reject the wrong sequence and unknown names")
{
    const fs::path p = tmp("sq.jsonl");
    simulate(small_run(), p);
    const LoadedRun run = load_run(p);
    CHECK_THROWS_AS(make_report("fig4a", {run}), ValidationError);
    CHECK_THROWS_AS(make_report("fig3a", {run}), ValidationError);
    CHECK_THROWS_AS(make_report("fig3b", {run}), ValidationError);
    CHECK_THROWS_AS(make_report("table9", {run}), ValidationError);
    CHECK_THROWS_AS(make_report("table1", {}), ValidationError);
    CHECK_THROWS_AS(make_report("tableS1", {run, run}), ValidationError);
}

TEST_CASE("report tables export CSV")
{
    ReportTable t;
    t.name = "demo";
    t.label_header = "source";
    t.row_labels = {"a", "b"};
    t.add_column("x", {1.5, std::nan("")});
    CHECK(t.rows() == 2);
    CHECK(t.to_csv() == "source,x\na,1.5\nb,nan\n");
    CHECK_THROWS_AS(t.add_column("y", {1.0}), ValidationError);
}

TEST_CASE("self-test passes and is sensitive to the clock frequency")
{
    const auto checks = run_selftest();
    CHECK(checks.size() >= 12);
    for (const CheckResult& c : checks) CHECK_MESSAGE(c.passed, c.name << ": " << c.detail);
    bool qpn_failed = false;
    for (const CheckResult& c : run_selftest(1.01)) {
        if (c.name.rfind("qpn_", 0) == 0 && !c.passed) qpn_failed = true;
    }
    CHECK(qpn_failed);
}
