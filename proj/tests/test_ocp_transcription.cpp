#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "landing/ocp_transcription.hpp"
#include "landing/sqp_solver.hpp"

using namespace landing;
using namespace landing::ocp;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) r(i++) = x;
    return r;
}

PhaseSpec small_phase(int n) {
    PhaseSpec ph;
    ph.state_dim = 2;
    ph.control_dim = 1;
    ph.n_collocation = n;
    ph.dynamics = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double) {
        return Eigen::Vector2d(x(1), u(0)).eval();
    };
    return ph;
}

// Rest-to-rest double integrator from x=a to x=b over [t0, tf] fixed.
PhaseSpec double_integrator(int n, double t0, double tf, double a, double b, bool pin_start, bool pin_end) {
    PhaseSpec ph = small_phase(n);
    ph.lagrange_cost = [](const Eigen::VectorXd&, const Eigen::VectorXd& u, double) { return u(0) * u(0); };
    ph.t0_lower = ph.t0_upper = t0;
    ph.tf_lower = ph.tf_upper = tf;
    ph.guess_t0 = t0;
    ph.guess_tf = tf;
    ph.guess_initial_state = vec({a, 0.0});
    ph.guess_final_state = vec({b, 0.0});
    if (pin_start) {
        ph.boundary_constraints.push_back(
            {[](const PhaseEnd& i, const PhaseEnd&) { return i.x; }, vec({a, 0.0}), vec({a, 0.0}), {}, "start"});
    }
    if (pin_end) {
        ph.boundary_constraints.push_back(
            {[](const PhaseEnd&, const PhaseEnd& f) { return f.x; }, vec({b, 0.0}), vec({b, 0.0}), {}, "end"});
    }
    return ph;
}

}  // namespace

TEST_CASE("layout dimensions and round trip") {
    MultiphaseProblem one;
    one.phases.push_back(small_phase(3));
    const auto l1 = build_layout(one);
    CHECK(l1.total == 13);
    CHECK(l1.phases[0].state_offset == 0);
    CHECK(l1.phases[0].control_offset == 8);
    CHECK(l1.phases[0].t0_index == 11);
    CHECK(l1.phases[0].tf_index == 12);

    MultiphaseProblem three;
    for (int i = 0; i < 3; ++i) three.phases.push_back(small_phase(3));
    const auto l3 = build_layout(three);
    CHECK(l3.total == 39);
    CHECK(l3.phases[2].state_offset == 26);

    std::mt19937 rng(7);
    std::normal_distribution<double> nd;
    Eigen::VectorXd z(39);
    for (auto& v : z) v = nd(rng);
    CHECK((pack(three, l3, unpack(three, l3, z)).array() == z.array()).all());

    // with scaling the map is affine and still round-trips
    three.phases[1].state_scale = vec({1000.0, 3.0});
    three.phases[1].state_offset = vec({1.7e6, -2.0});
    three.phases[1].control_scale = vec({3200.0});
    three.phases[1].time_scale = 100.0;
    const Eigen::VectorXd back = pack(three, l3, unpack(three, l3, z));
    CHECK((back - z).cwiseAbs().maxCoeff() < 1e-12);

    MultiphaseProblem bad;
    bad.phases.push_back(small_phase(3));
    bad.phases[0].state_dim = 0;
    CHECK_THROWS_AS(build_layout(bad), std::invalid_argument);
    CHECK_THROWS_AS(build_layout(MultiphaseProblem{}), std::invalid_argument);
}

TEST_CASE("defects of exact solutions") {
    SUBCASE("constant state, zero dynamics") {
        PhaseSpec ph;
        ph.state_dim = 1;
        ph.control_dim = 0;
        ph.n_collocation = 6;
        ph.dynamics = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) { return Eigen::VectorXd::Zero(1).eval(); };
        const auto g = lgr::LGRGrid::build(6);
        PhaseValues v{Eigen::MatrixXd::Constant(7, 1, 4.2), Eigen::MatrixXd(6, 0), 0.0, 3.0};
        CHECK(assemble_defects(ph, g, v).cwiseAbs().maxCoeff() < 1e-13);
    }
    SUBCASE("x' = 1 on [0, 2]") {
        PhaseSpec ph;
        ph.state_dim = 1;
        ph.n_collocation = 5;
        ph.dynamics = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) { return Eigen::VectorXd::Ones(1).eval(); };
        const auto g = lgr::LGRGrid::build(5);
        PhaseValues v{Eigen::MatrixXd(6, 1), Eigen::MatrixXd(5, 0), 0.0, 2.0};
        for (int k = 0; k <= 5; ++k) v.states(k, 0) = lgr::time_map(0.0, 2.0, g.nodes(k));
        CHECK(assemble_defects(ph, g, v).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("x' = x on [0, 1] sampled from the exponential") {
        PhaseSpec ph;
        ph.state_dim = 1;
        ph.n_collocation = 10;
        ph.dynamics = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) { return x; };
        const auto g = lgr::LGRGrid::build(10);
        PhaseValues v{Eigen::MatrixXd(11, 1), Eigen::MatrixXd(10, 0), 0.0, 1.0};
        for (int k = 0; k <= 10; ++k) v.states(k, 0) = std::exp(lgr::time_map(0.0, 1.0, g.nodes(k)));
        CHECK(assemble_defects(ph, g, v).cwiseAbs().maxCoeff() < 1e-8);
        v.tf = 0.0;
        CHECK_THROWS_AS(assemble_defects(ph, g, v), std::invalid_argument);
    }
}

TEST_CASE("cost assembly") {
    SUBCASE("unit running cost measures elapsed time") {
        MultiphaseProblem p;
        p.phases.push_back(small_phase(4));
        p.phases[0].lagrange_cost = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) { return 1.0; };
        std::vector<lgr::LGRGrid> grids{lgr::LGRGrid::build(4)};
        PhaseValues v{Eigen::MatrixXd::Zero(5, 2), Eigen::MatrixXd::Zero(4, 1), 0.0, 5.0};
        CHECK(std::abs(assemble_cost(p, grids, {v}) - 5.0) < 1e-12);
    }
    SUBCASE("Mayer term reads the final state") {
        MultiphaseProblem p;
        p.phases.push_back(small_phase(4));
        p.phases[0].mayer_cost = [](const PhaseEnd&, const PhaseEnd& f) { return -f.x(1); };
        std::vector<lgr::LGRGrid> grids{lgr::LGRGrid::build(4)};
        PhaseValues v{Eigen::MatrixXd::Zero(5, 2), Eigen::MatrixXd::Zero(4, 1), 0.0, 5.0};
        v.states(4, 1) = 812.5;
        CHECK(assemble_cost(p, grids, {v}) == -812.5);
    }
    SUBCASE("quadratic control profile") {
        // u(t) = 1 + 2t - 3t^2 on [1, 4]; integral of u^2 computed from the antiderivative
        MultiphaseProblem p;
        p.phases.push_back(small_phase(8));
        p.phases[0].lagrange_cost = [](const Eigen::VectorXd&, const Eigen::VectorXd& u, double) { return u(0) * u(0); };
        const auto g = lgr::LGRGrid::build(8);
        PhaseValues v{Eigen::MatrixXd::Zero(9, 2), Eigen::MatrixXd(8, 1), 1.0, 4.0};
        for (int k = 0; k < 8; ++k) {
            const double t = lgr::time_map(1.0, 4.0, g.nodes(k));
            v.controls(k, 0) = 1.0 + 2.0 * t - 3.0 * t * t;
        }
        // (1 + 2t - 3t^2)^2 = 1 + 4t - 2t^2 - 12t^3 + 9t^4
        auto anti = [](double t) {
            return t + 2.0 * t * t - 2.0 / 3.0 * t * t * t - 3.0 * std::pow(t, 4) + 9.0 / 5.0 * std::pow(t, 5);
        };
        CHECK(std::abs(assemble_cost(p, {g}, {v}) - (anti(4.0) - anti(1.0))) < 1e-10);
    }
}

TEST_CASE("double integrator minimum effort matches the analytic optimum") {
    MultiphaseProblem p;
    p.phases.push_back(double_integrator(10, 0.0, 1.0, 0.0, 1.0, true, true));
    const auto tr = transcribe(p);
    const auto res = sqp::solve(tr.nlp());
    REQUIRE(res.status == sqp::SolverStatus::converged);
    CHECK(std::abs(res.objective - 12.0) < 1e-4);
    const auto v = tr.unpack(res.solution);
    const auto& g = tr.grids()[0];
    double worst = 0.0;
    for (int k = 0; k < g.n; ++k) {
        const double t = lgr::time_map(0.0, 1.0, g.nodes(k));
        worst = std::max(worst, std::abs(v[0].controls(k, 0) - (6.0 - 12.0 * t)));
    }
    CHECK(worst < 1e-4);
    CHECK(res.eq_violation < 1e-8);
}

TEST_CASE("feasibility-only linear problem") {
    MultiphaseProblem p;
    p.phases.push_back(double_integrator(6, 0.0, 2.0, 0.0, 3.0, true, true));
    p.phases[0].lagrange_cost = nullptr;
    p.phases[0].control_lower = vec({-10.0});
    p.phases[0].control_upper = vec({10.0});
    const auto tr = transcribe(p);
    const auto res = sqp::solve(tr.nlp());
    CHECK(res.status == sqp::SolverStatus::converged);
    CHECK(res.eq_violation < 1e-8);
}

TEST_CASE("two phases linked by state continuity") {
    MultiphaseProblem p;
    p.phases.push_back(double_integrator(8, 0.0, 1.0, 0.0, 0.5, true, false));
    p.phases.push_back(double_integrator(8, 1.0, 2.0, 0.5, 1.0, false, true));
    LinkageSpec lk;
    lk.left_phase = 0;
    lk.right_phase = 1;
    lk.fn = [](const PhaseEnd& l, const PhaseEnd& r) { return (r.x - l.x).eval(); };
    lk.lower = lk.upper = Eigen::VectorXd::Zero(2);
    lk.name = "continuity";
    p.linkages.push_back(lk);
    const auto tr = transcribe(p);
    const auto res = sqp::solve(tr.nlp());
    REQUIRE(res.status == sqp::SolverStatus::converged);
    const auto v = tr.unpack(res.solution);
    CHECK((v[0].states.row(8) - v[1].states.row(0)).cwiseAbs().maxCoeff() < 1e-8);
    // over T = 2 the minimum effort is 12 / T^3
    CHECK(std::abs(res.objective - 1.5) < 1e-4);
}

TEST_CASE("free final time with path constraint and row labels") {
    // reach x = 1 at rest with |u| <= 1 in minimum time: bang-bang, T = 2
    MultiphaseProblem p;
    PhaseSpec ph = double_integrator(16, 0.0, 0.0, 0.0, 1.0, true, true);
    ph.lagrange_cost = nullptr;
    ph.mayer_cost = [](const PhaseEnd& i, const PhaseEnd& f) { return f.t - i.t; };
    ph.tf_lower = 0.1;
    ph.tf_upper = 10.0;
    ph.guess_tf = 3.0;
    ph.control_lower = vec({-1.0});
    ph.control_upper = vec({1.0});
    ph.path_constraints.push_back(
        {[](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) { return Eigen::VectorXd::Constant(1, x(1)); },
         vec({-10.0}), vec({10.0}), {}, "speed"});
    p.phases.push_back(ph);
    const auto tr = transcribe(p);
    CHECK(tr.eq_labels().size() == static_cast<std::size_t>(tr.nlp().num_eq));
    CHECK(tr.ineq_labels().size() == static_cast<std::size_t>(tr.nlp().num_ineq));
    // 17 points x 2 sides of the speed row, 2 end-control rows, 1 time-ordering row
    CHECK(tr.nlp().num_ineq == 17 * 2 + 2 + 1);
    const auto res = sqp::solve(tr.nlp());
    REQUIRE(res.status == sqp::SolverStatus::converged);
    CHECK(std::abs(res.objective - 2.0) < 1e-2);
}

TEST_CASE("inconsistent bounds are rejected") {
    MultiphaseProblem p;
    p.phases.push_back(small_phase(3));
    p.phases[0].control_lower = vec({1.0});
    p.phases[0].control_upper = vec({0.0});
    CHECK_THROWS_AS(transcribe(p), std::invalid_argument);

    MultiphaseProblem q;
    q.phases.push_back(small_phase(3));
    q.phases.push_back(small_phase(3));
    LinkageSpec lk;
    lk.left_phase = 1;
    lk.right_phase = 0;
    lk.fn = [](const PhaseEnd& l, const PhaseEnd&) { return l.x; };
    q.linkages.push_back(lk);
    CHECK_THROWS_AS(transcribe(q), std::invalid_argument);
}
