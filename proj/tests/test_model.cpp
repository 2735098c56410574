#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "contrakt/eigen.hpp"
#include "contrakt/model.hpp"

using namespace contrakt;

namespace {

std::string fixture(const std::string& name) {
    return std::string(CONTRAKT_FIXTURES_DIR) + "/" + name;
}

std::string test_data(const std::string& name) {
    return std::string(CONTRAKT_TEST_DATA_DIR) + "/" + name;
}

}  // namespace

TEST_CASE("transcriptional fixture loads with its parameters", "[model]") {
    const auto sys = load_system_file(fixture("transcriptional.sys"));
    CHECK(sys.kind == SystemKind::Pwsc);
    REQUIRE(sys.states.size() == 2);
    CHECK(sys.states[0] == "xt");
    CHECK(sys.parameters.at("k1") == 0.5);
    CHECK(sys.parameters.at("k2") == 5.0);
    CHECK(sys.parameters.at("Xtot") == 1.0);
    CHECK(sys.parameters.at("eT") == 1.0);
    CHECK(sys.parameters.at("delta") == 20.0);
    CHECK(sys.parameters.at("beta") == 1.0);
    CHECK(sys.parameters.at("h") == 0.01);
    REQUIRE(sys.modes.size() == 2);
    CHECK(sys.modes[0].region.size() == 1);
    CHECK(sys.domain.lo[0] == 0.0);
    CHECK(sys.domain.hi[0] == 2.0);
    CHECK(sys.domain.hi[1] == 1.0);
    REQUIRE(sys.period.has_value());
    CHECK(*sys.period == Catch::Approx(2.0 * 3.14159265358979323846 / 10.0));

    // the input enters the field: d(xt) at the origin at t = 0 is u(0)*Xtot = 1.5
    std::vector<double> f(2);
    sys.eval_field(0, std::vector<double>{0.0, 0.0}, 0.0, f);
    CHECK(f[0] == Catch::Approx(1.5));
    CHECK(f[1] == Catch::Approx(0.0));
}

TEST_CASE("degenerate single-mode and TSS fixtures load", "[model]") {
    const auto single = load_system_file(test_data("single_mode.sys"));
    CHECK(single.kind == SystemKind::Pwsc);
    CHECK(single.modes.size() == 1);

    const auto pwl = load_system_file(fixture("pwl.sys"));
    CHECK(pwl.kind == SystemKind::Tss);
    REQUIRE(pwl.signal.has_value());
    CHECK(pwl.signal->times.size() == 20);
    const auto a1 = pwl.constant_mode_matrix(0);
    REQUIRE(a1.has_value());
    CHECK((*a1)(0, 0) == -1.0);
    CHECK((*a1)(0, 1) == 1.5);
    CHECK((*a1)(1, 0) == 0.8);
    CHECK((*a1)(1, 1) == -3.0);
}

TEST_CASE("loader rejects malformed systems", "[model]") {
    // dwell violation
    CHECK_THROWS_AS(load_system("[system]\nname = bad\nkind = tss\nstates = x\n"
                                "domain x = -1 1\n[mode.a]\ndx = \"-x\"\n[mode.b]\ndx = \"-2*x\"\n"
                                "[signal]\ndwell = 1.0\nt = 0 mode = a\nt = 0.5 mode = b\n"),
                    Error);
    // overlapping regions
    CHECK_THROWS_AS(load_system("[system]\nname = bad\nkind = pwsc\nstates = x\n"
                                "domain x = -2 2\n[mode.a]\ndx = \"-x\"\nguard = \"x <= 1\"\n"
                                "[mode.b]\ndx = \"-x\"\nguard = \"x >= -1\"\n"),
                    Error);
    // uncovered gap
    CHECK_THROWS_AS(load_system("[system]\nname = bad\nkind = pwsc\nstates = x\n"
                                "domain x = -2 2\n[mode.a]\ndx = \"-x\"\nguard = \"x <= -1\"\n"
                                "[mode.b]\ndx = \"-x\"\nguard = \"x >= 1\"\n"),
                    Error);
    // missing field for a state
    CHECK_THROWS_AS(load_system("[system]\nname = bad\nkind = pwsc\nstates = x y\n"
                                "domain x = -1 1\ndomain y = -1 1\n[mode.a]\ndx = \"-x\"\n"),
                    Error);
    // undeclared identifier in a field
    CHECK_THROWS_AS(load_system("[system]\nname = bad\nkind = pwsc\nstates = x\n"
                                "domain x = -1 1\n[mode.a]\ndx = \"-z\"\n"),
                    ParseError);
    // unknown mode in the signal
    CHECK_THROWS_AS(load_system("[system]\nname = bad\nkind = tss\nstates = x\n"
                                "domain x = -1 1\n[mode.a]\ndx = \"-x\"\n"
                                "[signal]\ndwell = 0.1\nt = 0 mode = zz\n"),
                    ParseError);
    // TSS without signal
    CHECK_THROWS_AS(load_system("[system]\nname = bad\nkind = tss\nstates = x\n"
                                "domain x = -1 1\n[mode.a]\ndx = \"-x\"\n"),
                    Error);
    // missing domain
    CHECK_THROWS_AS(load_system("[system]\nname = bad\nkind = pwsc\nstates = x\n"
                                "[mode.a]\ndx = \"-x\"\n"),
                    Error);
    // parameter colliding with a state
    CHECK_THROWS_AS(load_system("[system]\nname = bad\nkind = pwsc\nstates = x\n"
                                "domain x = -1 1\n[params]\nx = 2\n[mode.a]\ndx = \"-x\"\n"),
                    ParseError);
}

TEST_CASE("mode_at follows regions with the lowest-index tie-break", "[model]") {
    const auto sys = load_system_file(fixture("transcriptional.sys"));
    const double h = sys.parameters.at("h");

    // xt - y = 0.5 > h: degradation active
    CHECK(sys.mode_at(std::vector<double>{1.0, 0.5}, 0.0) == 1);
    // xt - y = -1 < h: smooth mode
    CHECK(sys.mode_at(std::vector<double>{0.0, 1.0}, 0.0) == 0);
    // exactly on the boundary: both closures hold, lowest index wins
    CHECK(sys.mode_at(std::vector<double>{h, 0.0}, 0.0) == 0);
}

TEST_CASE("signal lookup is right-continuous", "[model]") {
    const auto pwl = load_system_file(fixture("pwl.sys"));
    CHECK(pwl.mode_at(std::vector<double>{0.0, 0.0}, 0.5) == 0);
    CHECK(pwl.mode_at(std::vector<double>{0.0, 0.0}, 1.0) == 1);  // new mode at the breakpoint
    CHECK(pwl.mode_at(std::vector<double>{0.0, 0.0}, 1.5) == 1);
    CHECK(pwl.mode_at(std::vector<double>{0.0, 0.0}, -5.0) == 0);  // before the first breakpoint
    CHECK(pwl.mode_at(std::vector<double>{0.0, 0.0}, 100.0) == 1);  // after the last
    CHECK(pwl.signal->next_breakpoint(19.0).has_value() == false);
    CHECK(*pwl.signal->next_breakpoint(0.0) == 1.0);
}

TEST_CASE("check_continuity passes on continuous fixtures and fails on the relay", "[model]") {
    const auto transcriptional = load_system_file(fixture("transcriptional.sys"));
    const auto rep = check_continuity(transcriptional);
    CHECK(rep.pass);
    CHECK(rep.boundary_points > 0);
    CHECK(rep.max_mismatch <= rep.tolerance());

    const auto matched = load_system_file(test_data("matched_pwl.sys"));
    CHECK(check_continuity(matched).pass);

    const auto relay = load_system_file(test_data("relay.sys"));
    const auto bad = check_continuity(relay);
    CHECK_FALSE(bad.pass);
    CHECK(bad.max_mismatch == Catch::Approx(2.0).margin(1e-6));

    // single mode: no boundaries, vacuous pass
    const auto single = load_system_file(test_data("single_mode.sys"));
    const auto vac = check_continuity(single);
    CHECK(vac.pass);
    CHECK(vac.boundary_points == 0);
}

TEST_CASE("one-sided Lipschitz estimates", "[model]") {
    const auto single = load_system_file(test_data("single_mode.sys"));
    // dx = -2x is exactly one-sided Lipschitz with l = -2
    CHECK(check_one_sided_lipschitz(single) == Catch::Approx(-2.0).margin(1e-9));

    const auto pwl = load_system_file(fixture("pwl.sys"));
    const double l = check_one_sided_lipschitz(pwl);
    // bounded by the worst mu_2 over the modes
    const double bound = std::max(symmetric_part_max_eig(*pwl.constant_mode_matrix(0)),
                                  symmetric_part_max_eig(*pwl.constant_mode_matrix(1)));
    CHECK(l <= bound + 1e-9);

    const auto transcriptional = load_system_file(fixture("transcriptional.sys"));
    CHECK(std::isfinite(check_one_sided_lipschitz(transcriptional)));
}

TEST_CASE("partition sampling report on a valid model", "[model]") {
    const auto sys = load_system_file(fixture("transcriptional.sys"));
    const auto rep = check_partition(sys);
    CHECK(rep.ok());
    CHECK(rep.interior_samples > 0);
}
