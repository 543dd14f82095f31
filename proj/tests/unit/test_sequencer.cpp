#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "sqclock/constants.hpp"
#include "sqclock/error.hpp"
#include "sqclock/experiment.hpp"
#include "sqclock/sequencer.hpp"

using namespace sqclock;

namespace {

ExperimentConfig small(Sequence s, std::uint64_t shots = 300)
{
    ExperimentConfig cfg;
    cfg.sequence = s;
    cfg.shots = shots;
    cfg.seed = 42;
    return cfg;
}

}  // namespace

TEST_CASE("output is identical for any thread count")
{
    for (Sequence s : {Sequence::SqueezeChar, Sequence::ClockSqueezed, Sequence::ClockCss}) {
        const ExperimentConfig cfg = small(s, 700);
        const auto one = seq::simulate_records(cfg, 1);
        CHECK(one == seq::simulate_records(cfg, 3));
        CHECK(one == seq::simulate_records(cfg, 8));
    }
}

TEST_CASE("a single shot is pure in its index")
{
    const ExperimentConfig cfg = small(Sequence::ClockSqueezed, 50);
    const seq::FloorProcess floor(cfg.stability_floor, cfg.seed, cfg.shots);
    const auto all = seq::simulate_records(cfg, 2);
    CHECK(seq::simulate_shot(cfg, floor, 17) == all[17]);
    CHECK(seq::simulate_shot(cfg, floor, 17) == seq::simulate_shot(cfg, floor, 17));
}

TEST_CASE("seed changes the stream")
{
    ExperimentConfig a = small(Sequence::SqueezeChar, 20);
    ExperimentConfig b = a;
    b.seed = 43;
    CHECK(seq::simulate_records(a) != seq::simulate_records(b));
}

TEST_CASE("zero shots yields no records")
{
    ExperimentConfig cfg = small(Sequence::SqueezeChar, 0);
    CHECK(seq::simulate_records(cfg).empty());
}

TEST_CASE("record layout by sequence")
{
    const auto sq = seq::simulate_records(small(Sequence::SqueezeChar, 10));
    for (std::size_t i = 0; i < sq.size(); ++i) {
        CHECK(sq[i].shot_index == i);
        CHECK(sq[i].t_s == doctest::Approx(static_cast<double>(i)));
        CHECK(sq[i].qnd1_jz.has_value());
        CHECK(sq[i].qnd2_jz.has_value());
    }
    for (const ShotRecord& r : seq::simulate_records(small(Sequence::ClockCss, 10))) {
        CHECK_FALSE(r.qnd1_jz.has_value());
        CHECK_FALSE(r.qnd2_jz.has_value());
    }
    for (const ShotRecord& r : seq::simulate_records(small(Sequence::ClockSqueezed, 10))) {
        CHECK(r.qnd1_jz.has_value());
    }
}

TEST_CASE("dynamic-range shots interleave the theta list")
{
    ExperimentConfig cfg = small(Sequence::DynamicRange, 12);
    cfg.ramsey_ms = 0.01;
    const std::vector<double> thetas{-0.1, 0.0, 0.1};
    const auto recs = seq::run_dynamic_range(cfg, thetas);
    REQUIRE(recs.size() == 12);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(recs[i].theta_true == doctest::Approx(thetas[i % 3]));
    }
}

TEST_CASE("Rabi curve follows the sine of the pulse area from the prepared equatorial state")
{
    ExperimentConfig cfg = small(Sequence::RabiScan, 4000);
    const std::vector<double> areas{0.0, kPi / 2.0, kPi, 3.0 * kPi / 2.0, 2.0 * kPi};
    const auto curve = seq::run_rabi_scan(cfg, areas);
    REQUIRE(curve.size() == areas.size());
    std::vector<double> y;
    for (const auto& [x, v] : curve) y.push_back(v);
    const double c = cfg.final_contrast();
    CHECK(std::abs(y[0]) < 0.01);
    CHECK(y[1] == doctest::Approx(c).epsilon(0.015));
    CHECK(std::abs(y[2]) < 0.01);
    CHECK(y[3] == doctest::Approx(-c).epsilon(0.015));
    CHECK(std::abs(y[4]) < 0.01);
}

TEST_CASE("floor process has a flat Allan plateau at the configured level")
{
    const double plateau = 4e-12;
    double peak = 0.0;
    double lo = 1.0;
    for (std::uint64_t L = 1; L <= 4096; L *= 2) {
        const double s = std::sqrt(seq::FloorProcess::unit_allan_variance(L)) *
                         seq::FloorProcess::component_sigma(plateau);
        peak = std::max(peak, s);
        if (L >= 16 && L <= 1024) lo = std::min(lo, s);
    }
    CHECK(peak == doctest::Approx(plateau).epsilon(1e-6));
    CHECK(lo > 0.7 * plateau);

    const seq::FloorProcess off(0.0, 1, 100);
    CHECK(off.at(5) == 0.0);
    const seq::FloorProcess a(plateau, 3, 1000), b(plateau, 3, 1000);
    CHECK(a.at(999) == b.at(999));
}

TEST_CASE("configuration errors are rejected before simulation")
{
    ExperimentConfig cfg = small(Sequence::SqueezeChar);
    cfg.free_fall_ms = 8.0;  // beyond the field of view at 0.2 ms lattice ramp
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    CHECK_THROWS_AS(seq::simulate_records(cfg), ValidationError);
    CHECK(max_free_fall_ms(0.2) == doctest::Approx(4.0));
    CHECK(max_free_fall_ms(7.0) == doctest::Approx(8.0));

    cfg = small(Sequence::SqueezeChar);
    cfg.n_atoms = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);

    cfg = small(Sequence::DynamicRange);
    cfg.theta_list_rad.clear();
    CHECK_THROWS_AS(cfg.validate(), ValidationError);

    cfg = small(Sequence::SqueezeChar);
    cfg.lattice_ramp_ms = 3.0;  // no contrast table entry
    CHECK_THROWS_AS(cfg.final_contrast(), ValidationError);
}
