#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "landing/lunar_dynamics.hpp"

using namespace landing::dyn;

namespace {

Eigen::VectorXd sph_rhs(const Eigen::VectorXd& x, const BodyThrust& c, const MoonConstants& k) {
    return spherical_eom(SphericalState::from_vector(x), c, k);
}

}  // namespace

TEST_CASE("spherical eom closed-form cases") {
    MoonConstants k;
    k.omega = 0.0;
    const double r = k.radius + 30000.0;

    SphericalState circ{r, 0.3, 0.0, 0.0, 0.0, std::sqrt(k.mu / r), 1500.0};
    CHECK(std::abs(spherical_eom(circ, {}, k)(3)) < 1e-12);

    SphericalState rest{r, 0.3, 0.4, 0.0, 0.0, 0.0, 1500.0};
    const auto d = spherical_eom(rest, {}, k);
    CHECK(d(3) == doctest::Approx(-k.mu / (r * r)).epsilon(1e-15));
    for (int i : {0, 1, 2, 4, 5, 6}) CHECK(d(i) == 0.0);

    const auto burn = spherical_eom(rest, {3200.0, 0.2, 0.0}, k);
    CHECK(burn(6) == doctest::Approx(-3200.0 / (320.0 * 9.81)).epsilon(1e-12));
    CHECK(burn(6) == doctest::Approx(-1.0194).epsilon(1e-4));
    // retrograde-positive pitch decelerates the along-track velocity
    CHECK(burn(5) == doctest::Approx(-3200.0 * std::sin(0.2) / 1500.0).epsilon(1e-12));
    CHECK(burn(3) == doctest::Approx(3200.0 * std::cos(0.2) / 1500.0 - k.mu / (r * r)).epsilon(1e-12));

    SphericalState pole = rest;
    pole.phi = kPi / 2.0;
    CHECK_THROWS_AS(spherical_eom(pole, {}, k), DynamicsError);
}

TEST_CASE("rotating-frame terms match the Cartesian rotating-frame acceleration") {
    // Oracle: build the state in Cartesian moon-fixed coordinates and evaluate
    // a = -mu r/|r|^3 - 2 w x v - w x (w x r); project onto (north, up, east).
    MoonConstants k;
    k.omega = 1e-3;  // exaggerated so the rotation terms dominate round-off
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        SphericalState s{k.radius + 20000.0 * (1.0 + ud(rng)), ud(rng) * 3.0, ud(rng) * 1.2, 30.0 * ud(rng),
                         200.0 * ud(rng), 1500.0 * ud(rng), 1200.0};
        const double ct = std::cos(s.theta), st = std::sin(s.theta), cp = std::cos(s.phi), sp = std::sin(s.phi);
        const Eigen::Vector3d up(cp * ct, cp * st, sp), east(-st, ct, 0.0), north(-sp * ct, -sp * st, cp);
        const Eigen::Vector3d pos = s.r * up;
        const Eigen::Vector3d vel = s.w * up + s.u * east + s.v * north;
        const Eigen::Vector3d om(0.0, 0.0, k.omega);
        const Eigen::Vector3d acc = -k.mu * pos / std::pow(s.r, 3) - 2.0 * om.cross(vel) - om.cross(om.cross(pos));

        // time derivative of the local basis contributes the transport terms
        const double thd = s.u / (s.r * cp), phd = s.v / s.r;
        const Eigen::Vector3d d_up = thd * cp * east + phd * north;
        const Eigen::Vector3d d_east = -thd * Eigen::Vector3d(ct, st, 0.0);
        const Eigen::Vector3d d_north = -phd * up - thd * sp * east;
        // v = w up + u east + v north  =>  acc = w' up + u' east + v' north + w d_up + u d_east + v d_north
        const Eigen::Vector3d transport = s.w * d_up + s.u * d_east + s.v * d_north;
        const Eigen::Vector3d rates = acc - transport;
        const auto d = spherical_eom(s, {}, k);
        CHECK(d(3) == doctest::Approx(rates.dot(up)).epsilon(1e-10));
        CHECK(d(4) == doctest::Approx(rates.dot(east)).epsilon(1e-9));
        CHECK(d(5) == doctest::Approx(rates.dot(north)).epsilon(1e-9));
    }
}

TEST_CASE("latitude mirror symmetry") {
    MoonConstants k;
    SphericalState s{k.radius + 7400.0, 0.56, 1.1, -40.0, 3.0, 600.0, 1300.0};
    const BodyThrust c{2500.0, 0.9, 0.01};
    const auto d = spherical_eom(s, c, k);
    const auto dm = spherical_eom(mirror_latitude(s), mirror_thrust(c), k);
    // phi and v derivatives flip sign, all others are unchanged
    for (int i : {0, 1, 3, 4, 6}) CHECK(dm(i) == doctest::Approx(d(i)).epsilon(1e-14));
    for (int i : {2, 5}) CHECK(dm(i) == doctest::Approx(-d(i)).epsilon(1e-14));
}

TEST_CASE("flat eom") {
    MoonConstants k;
    LocalState s{{0, 800, 0}, {0, 0, 0}, 800.0};
    const auto hover = flat_eom(s, -k.g_local(), 800.0 * 1.62, k);
    CHECK(hover.segment<3>(3).norm() < 1e-15);

    const auto traj = propagate(
        [&](double, const Eigen::VectorXd& x) {
            return Eigen::VectorXd(flat_eom(LocalState::from_vector(x), Eigen::Vector3d::Zero(), 0.0, k));
        },
        s.to_vector(), 3.0, 0.1);
    CHECK(traj.x.back()(4) == doctest::Approx(-1.62 * 3.0).epsilon(1e-12));

    const double thrust = 800.0 * 1.62;
    const auto h = propagate(
        [&](double, const Eigen::VectorXd& x) {
            const auto ls = LocalState::from_vector(x);
            return Eigen::VectorXd(flat_eom(ls, -k.g_local(), thrust, k));
        },
        s.to_vector(), 10.0, 0.01);
    CHECK(800.0 - h.x.back()(6) == doctest::Approx(4.128).epsilon(1e-3));
    CHECK(800.0 - h.x.back()(6) == doctest::Approx(800.0 * 1.62 / (320.0 * 9.81) * 10.0).epsilon(1e-10));

    LocalState dry{{0, 10, 0}, {0, 0, 0}, k.dry_mass};
    CHECK_THROWS_AS(flat_eom(dry, Eigen::Vector3d::Zero(), 0.0, k), DynamicsError);
}

TEST_CASE("rk4 propagation") {
    auto zero = [](double, const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()).eval(); };
    Eigen::VectorXd x0(3);
    x0 << 1, 2, 3;
    CHECK((propagate(zero, x0, 5.0, 0.3).x.back() - x0).norm() == 0.0);

    auto expo = [](double, const Eigen::VectorXd& x) { return x; };
    const auto e = propagate(expo, Eigen::VectorXd::Ones(1), 1.0, 1e-3);
    CHECK(std::abs(e.x.back()(0) - std::exp(1.0)) < 1e-10);
    CHECK(e.t.back() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(e.t.size() == 1001);

    // non-multiple duration lands exactly on the end time
    const auto f = propagate(expo, Eigen::VectorXd::Ones(1), 0.25, 0.1);
    CHECK(f.t.back() == doctest::Approx(0.25).epsilon(1e-15));

    CHECK_THROWS_AS(propagate(expo, x0, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(propagate(expo, x0, 1.0, 0.0), std::invalid_argument);

    auto blowup = [](double t, const Eigen::VectorXd& x) -> Eigen::VectorXd {
        if (t > 0.5) throw DynamicsError("singular");
        return x;
    };
    try {
        propagate(blowup, Eigen::VectorXd::Ones(1), 1.0, 0.1);
        FAIL("expected PropagationError");
    } catch (const PropagationError& err) {
        CHECK(err.partial().t.size() >= 5);
    }
}

TEST_CASE("free orbit conserves energy and angular momentum") {
    MoonConstants k;
    k.omega = 0.0;
    const double r = k.radius + 30000.0;
    const double vc = std::sqrt(k.mu / r);
    // slightly eccentric equatorial orbit, eastward
    SphericalState s{r, 0.0, 0.0, 5.0, vc * 1.01, 0.0, 1500.0};
    const double period = 2.0 * kPi * std::sqrt(r * r * r / k.mu);
    const auto traj = propagate([&](double, const Eigen::VectorXd& x) { return sph_rhs(x, {}, k); },
                                s.to_vector(), period, 0.1);
    const auto end = SphericalState::from_vector(traj.x.back());
    const double e0 = specific_energy(s, k);
    CHECK(std::abs((specific_energy(end, k) - e0) / e0) < 1e-6);

    const auto short_traj = propagate([&](double, const Eigen::VectorXd& x) { return sph_rhs(x, {}, k); },
                                      s.to_vector(), 1000.0, 0.1);
    const auto e1 = SphericalState::from_vector(short_traj.x.back());
    const double h0 = s.r * std::hypot(s.u, s.v);
    CHECK(std::abs((e1.r * std::hypot(e1.u, e1.v) - h0) / h0) < 1e-6);
    CHECK(std::abs((specific_energy(e1, k) - e0) / e0) < 1e-6);
}

TEST_CASE("mass decreases only under thrust") {
    MoonConstants k;
    SphericalState s{k.radius + 10000.0, 0.1, 0.9, -20.0, 0.0, 900.0, 1400.0};
    CHECK(spherical_eom(s, {0.0, 0.5, 0.0}, k)(6) == 0.0);
    CHECK(spherical_eom(s, {100.0, 0.5, 0.0}, k)(6) < 0.0);
}

TEST_CASE("attitude hold") {
    MoonConstants k;
    SphericalState s{k.radius + 7400.0, 0.56, 0.9, -30.0, 0.0, 80.0, 1200.0};
    const double thrust = 2800.0;
    const auto out = propagate_attitude_hold(s, thrust, k);
    CHECK(s.m - out.m == doctest::Approx(thrust * 10.0 / (320.0 * 9.81)).epsilon(1e-12));
    CHECK(out.r < s.r);

    const auto coast = propagate_attitude_hold(s, 0.0, k);
    const auto ref = propagate([&](double, const Eigen::VectorXd& x) { return sph_rhs(x, {}, k); }, s.to_vector(),
                               10.0, 0.1);
    CHECK((coast.to_vector() - ref.x.back()).norm() == doctest::Approx(0.0));

    const auto back = invert_attitude_hold(out, thrust, k);
    const Eigen::VectorXd rel = (back.to_vector() - s.to_vector()).cwiseQuotient(
        s.to_vector().cwiseAbs().cwiseMax(Eigen::VectorXd::Ones(7)));
    CHECK(rel.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("spherical to local frame") {
    MoonConstants k;
    SphericalState ref{k.radius + 800.0, 0.56, 1.21, -3.0, 0.5, 20.0, 1000.0};
    const auto at = spherical_to_local(ref, ref, k);
    CHECK(at.position.isApprox(Eigen::Vector3d(0.0, 800.0, 0.0)));
    CHECK(at.velocity.isApprox(Eigen::Vector3d(20.0, -3.0, 0.5)));
    CHECK(at.mass == 1000.0);

    SphericalState still = ref;
    still.w = still.u = still.v = 0.0;
    CHECK(spherical_to_local(still, ref, k).velocity.norm() == 0.0);

    // along-track displacement of 0.01 deg at the equator
    SphericalState eq{k.radius, 0.0, 0.0, 0, 0, 0, 1000.0};
    SphericalState moved = eq;
    moved.phi = deg2rad(0.01);
    CHECK(spherical_to_local(moved, eq, k).position(0) == doctest::Approx(k.radius * 0.01 * kPi / 180.0));
    moved = eq;
    moved.theta = deg2rad(0.01);
    CHECK(spherical_to_local(moved, eq, k).position(2) == doctest::Approx(k.radius * 0.01 * kPi / 180.0));

    // terrain datum shifts the altitude only
    CHECK(spherical_to_local(ref, ref, k, 883.0).position(1) == doctest::Approx(-83.0));
}

TEST_CASE("local to spherical round trip") {
    MoonConstants k;
    SphericalState ref{k.radius, 0.56, -1.21, 0.0, 0.0, 0.0, 1729.0};
    SphericalState s{k.radius + 7400.0, 0.5601, -1.205, -40.0, 0.3, 95.0, 1012.0};
    for (double datum : {0.0, 883.0}) {
        const auto back = local_to_spherical(spherical_to_local(s, ref, k, datum), ref, k, datum);
        CHECK(back.r == doctest::Approx(s.r).epsilon(1e-14));
        CHECK(back.theta == doctest::Approx(s.theta).epsilon(1e-13));
        CHECK(back.phi == doctest::Approx(s.phi).epsilon(1e-13));
        CHECK(back.w == s.w);
        CHECK(back.u == s.u);
        CHECK(back.v == s.v);
        CHECK(back.m == s.m);
    }
}

TEST_CASE("flat and spherical models agree near the surface") {
    MoonConstants k;
    k.omega = 2.6617e-6;
    SphericalState s{k.radius + 1000.0, 0.56, 1.2, -20.0, 5.0, 40.0, 900.0};
    const double thrust = 900.0 * 1.5;
    const BodyThrust c{thrust, 0.3, 0.1};
    const auto sph = propagate([&](double, const Eigen::VectorXd& x) { return sph_rhs(x, c, k); }, s.to_vector(),
                               10.0, 0.1);
    const auto l0 = spherical_to_local(s, s, k);
    const auto flat = propagate(
        [&](double, const Eigen::VectorXd& x) {
            const auto ls = LocalState::from_vector(x);
            return Eigen::VectorXd(flat_eom(ls, thrust / ls.mass * thrust_direction(c.alpha, c.beta), thrust, k));
        },
        l0.to_vector(), 10.0, 0.1);
    const auto ls = spherical_to_local(SphericalState::from_vector(sph.x.back()), s, k);
    const Eigen::Vector3d pf = flat.x.back().head<3>();
    CHECK((ls.position - pf).norm() < 0.01 * pf.norm());
}
