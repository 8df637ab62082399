#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "landing/terminal_descent.hpp"

using namespace landing;
using namespace landing::terminal;
using Eigen::Vector2d;
using Eigen::Vector3d;

namespace {

dyn::LocalState start_state(double mass = 912.0) {
    dyn::LocalState x;
    x.position = Vector3d(0.0, 800.0, 0.0);
    x.velocity = Vector3d::Zero();
    x.mass = mass;
    return x;
}

TerminalTrajectory fly(const Vector2d& offset) {
    TerminalSequenceConfig c;
    c.safe_site_offset = offset;
    return simulate_terminal_sequence(start_state(), c, dyn::MoonConstants{});
}

}  // namespace

TEST_CASE("hover thrust") {
    const dyn::MoonConstants k;
    const TerminalSequenceConfig c;
    const auto lim = c.limits(k);
    CHECK(lim.max == doctest::Approx(1520.0));
    CHECK(lim.min == doctest::Approx(456.0));

    dyn::LocalState x = start_state(800.0);
    CHECK(hover_thrust(x, k, lim) == doctest::Approx(1296.0));
    x.velocity.y() = -2.0;
    CHECK(hover_thrust(x, k, lim, 0.1) == doctest::Approx(800.0 * (1.62 + 0.2)));
    CHECK(hover_thrust(x, k, lim, 1.0, -2.0) == doctest::Approx(1296.0));
    x.velocity.y() = 5.0;
    CHECK(hover_thrust(x, k, lim) == doctest::Approx(456.0));

    x = start_state(1000.0);
    CHECK_THROWS_AS(hover_thrust(x, k, lim), SaturationError);
    x.mass = 0.0;
    CHECK_THROWS_AS(hover_thrust(x, k, lim), std::invalid_argument);
}

TEST_CASE("default sequence with a 30 m safe-site offset") {
    const auto r = fly(Vector2d(30.0, 0.0));
    const std::vector<std::string> labels{"first_hover", "descent",  "second_hover",
                                          "retarget",    "handover", "constant_velocity"};
    REQUIRE(r.segments.size() == labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) CHECK(r.segments[i].label == labels[i]);

    CHECK(r.touchdown.position.y() == doctest::Approx(0.0));
    CHECK(r.touchdown.velocity.y() >= -1.2);
    CHECK(r.touchdown.velocity.y() <= 0.0);
    CHECK(r.lateral_error() < 1.0);
    CHECK(r.site.isApprox(Vector3d(30.0, 0.0, 0.0)));
    CHECK(std::abs(r.segment("constant_velocity").duration - 10.0) <= 0.5);

    CHECK(r.segment("first_hover").duration == doctest::Approx(12.0));
    CHECK(r.segment("second_hover").duration == doctest::Approx(22.0));
    CHECK(std::abs(r.segment("first_hover").trace.back().position.y() - 800.0) < 0.1);
    CHECK(std::abs(r.segment("descent").trace.back().position.y() - 150.0) < 0.1);
    CHECK(std::abs(r.segment("retarget").trace.back().position.y() - 60.0) < 0.1);
    CHECK(std::abs(r.segment("handover").trace.back().position.y() - 10.0) < 0.1);
    CHECK(r.segment("handover").trace.back().velocity.y() == doctest::Approx(-1.0).epsilon(0.05));

    double sum = 0.0;
    for (const auto& s : r.segments) {
        CHECK(s.propellant > 0.0);
        sum += s.propellant;
    }
    CHECK(sum == doctest::Approx(r.total_propellant));
    CHECK(912.0 - r.touchdown.mass == doctest::Approx(r.total_propellant));

    const auto trace = r.trace();
    for (std::size_t i = 1; i < trace.size(); ++i) {
        CHECK(trace[i].t > trace[i - 1].t);
        CHECK(trace[i].mass <= trace[i - 1].mass);
    }
    for (const auto& p : trace) CHECK(p.thrust.norm() <= 1520.0 + 1e-9);
}

TEST_CASE("lateral accuracy over safe-site offsets") {
    for (const Vector2d off : {Vector2d(0.0, 0.0), Vector2d(-30.0, 0.0), Vector2d(0.0, 30.0), Vector2d(30.0, 40.0)}) {
        const auto r = fly(off);
        CHECK(r.lateral_error() < 1.0);
        CHECK(r.touchdown.velocity.y() >= -1.2);
        CHECK(r.touchdown.velocity.y() <= 0.0);
    }
    // without a retarget offset the vehicle stays over the start point
    const auto r = fly(Vector2d::Zero());
    for (const auto& p : r.trace()) CHECK(std::hypot(p.position.x(), p.position.z()) < 1e-6);
}

TEST_CASE("hazard decision time shortens the second hover") {
    TerminalSequenceConfig c;
    c.hazard_decision_time = 8.0;
    const auto r = simulate_terminal_sequence(start_state(), c, dyn::MoonConstants{});
    CHECK(r.segment("second_hover").duration == doctest::Approx(8.0));
    c.hazard_decision_time = 40.0;
    CHECK(simulate_terminal_sequence(start_state(), c, dyn::MoonConstants{}).segment("second_hover").duration ==
          doctest::Approx(22.0));
}

TEST_CASE("failures carry the partial trajectory") {
    TerminalSequenceConfig c;
    try {
        simulate_terminal_sequence(start_state(1000.0), c, dyn::MoonConstants{});
        FAIL("expected TerminalSequenceError");
    } catch (const TerminalSequenceError& e) {
        CHECK(e.partial().segments.empty());
        CHECK(std::string(e.what()).find("exceeds") != std::string::npos);
    }

    auto low = start_state();
    low.position.y() = 120.0;
    CHECK_THROWS_AS(simulate_terminal_sequence(low, c, dyn::MoonConstants{}), std::invalid_argument);

    auto bad = c;
    bad.retarget_altitude = 5.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.descent_velocity = 0.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.min_thrust_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = c;
    bad.safe_site_offset.x() = NAN;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
