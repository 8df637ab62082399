#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "landing/controllability.hpp"

using namespace landing;
using namespace landing::controllability;
using Eigen::Vector2d;
using Eigen::Vector3d;

namespace {

struct Ellipse {
    Vector2d center{0.3, -0.2};
    double a = 1.2, b = 0.6, rot = 0.4;

    // > 0 inside
    double inside(const Vector2d& p) const {
        const double c = std::cos(rot), s = std::sin(rot);
        const Vector2d q = p - center;
        const double u = c * q(0) + s * q(1), v = -s * q(0) + c * q(1);
        return 1.0 - (u * u / (a * a) + v * v / (b * b));
    }
    Vector2d point(double t) const {
        const double c = std::cos(rot), s = std::sin(rot);
        const double u = a * std::cos(t), v = b * std::sin(t);
        return center + Vector2d(c * u - s * v, s * u + c * v);
    }
};

void ellipse_data(const Ellipse& e, int n, double gap, std::uint64_t seed, std::vector<Vector2d>& s,
                  std::vector<int>& y) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    s.clear();
    y.clear();
    while (static_cast<int>(s.size()) < n) {
        const Vector2d p(U(rng), U(rng));
        const double v = e.inside(p);
        if (std::abs(v) < gap) continue;
        s.push_back(p);
        y.push_back(v > 0.0 ? 1 : -1);
    }
}

// Zero set of the fitted conic along rays from `c` (assumes c inside).
std::vector<Vector2d> zero_set(const ConicBoundary& b, const Vector2d& c, int rays) {
    std::vector<Vector2d> out;
    const auto& k = b.coefficients;
    for (int i = 0; i < rays; ++i) {
        const double t = 2.0 * M_PI * i / rays;
        const Vector2d u(std::cos(t), std::sin(t));
        // q(r) = A r^2 + B r + C along c + r u
        const double A = k[0] * u(0) * u(0) + k[1] * u(0) * u(1) + k[2] * u(1) * u(1);
        const double B = 2.0 * k[0] * c(0) * u(0) + k[1] * (c(0) * u(1) + c(1) * u(0)) + 2.0 * k[2] * c(1) * u(1) +
                         k[3] * u(0) + k[4] * u(1);
        const double C = k[0] * c(0) * c(0) + k[1] * c(0) * c(1) + k[2] * c(1) * c(1) + k[3] * c(0) + k[4] * c(1) + k[5];
        const double disc = B * B - 4.0 * A * C;
        REQUIRE(disc >= 0.0);
        const double r1 = (-B + std::sqrt(disc)) / (2.0 * A), r2 = (-B - std::sqrt(disc)) / (2.0 * A);
        out.push_back(c + std::max(r1, r2) * u);
    }
    return out;
}

double hausdorff(const std::vector<Vector2d>& p, const std::vector<Vector2d>& q) {
    double h = 0.0;
    for (const auto& a : p) {
        double d = INFINITY;
        for (const auto& b : q) d = std::min(d, (a - b).norm());
        h = std::max(h, d);
    }
    for (const auto& b : q) {
        double d = INFINITY;
        for (const auto& a : p) d = std::min(d, (a - b).norm());
        h = std::max(h, d);
    }
    return h;
}

RolloutSetup fine_braking_setup() {
    RolloutSetup s;
    s.target = {Vector3d(0.0, 1683.0, 0.0), Vector3d::Zero(), Vector3d(0.0, 1.62, 0.0)};
    s.a0 = Vector3d(-2.0, 1.0, 0.0);
    s.mass = 950.0;
    s.range = {150.0, 200.0, 5.0};
    s.limits = {912.0, 3040.0};
    return s;
}

// Circle of radius r about c in reduced coordinates, positive inside.
ConicBoundary circle(const Vector2d& c, double r) {
    ConicBoundary b;
    b.coefficients = {-1.0, 0.0, -1.0, 2.0 * c(0), 2.0 * c(1), r * r - c.squaredNorm()};
    return b;
}

DmSurrogate quadratic_surrogate(std::function<double(const GuidanceFeatures&)> f, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<GuidanceRow> rows;
    for (int i = 0; i < 200; ++i) {
        GuidanceFeatures x{6000.0 + 1500.0 * n(rng), 5700.0 + 300.0 * n(rng), -50.0 + 10.0 * n(rng),
                           80.0 + 10.0 * n(rng)};
        rows.push_back({x, 0.0, f(x), 0.0});
    }
    return fit_dm_surrogate(rows);
}

}  // namespace

TEST_CASE("dispersion sampling") {
    DispersionModel m;
    m.mean = {8000.0, 5700.0, -50.0, 90.0};
    const auto xi = sample_dispersions(m);
    REQUIRE(xi.size() == 2000);
    Eigen::Vector4d mean = Eigen::Vector4d::Zero();
    for (const auto& x : xi) mean += x.vector();
    mean /= 2000.0;
    const Eigen::Vector4d sd(500.0, 500.0, 10.0, 10.0);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(mean(j) - m.mean.vector()(j)) < 5.0 * sd(j) / std::sqrt(2000.0));
    Eigen::Vector4d var = Eigen::Vector4d::Zero();
    for (const auto& x : xi) var += (x.vector() - mean).cwiseAbs2();
    var /= 1999.0;
    for (int j = 0; j < 4; ++j) CHECK(std::sqrt(var(j)) == doctest::Approx(sd(j)).epsilon(0.1));

    const auto again = sample_dispersions(m);
    for (std::size_t i = 0; i < xi.size(); ++i) CHECK(xi[i].vector() == again[i].vector());
    m.seed = 2;
    CHECK(sample_dispersions(m)[0].vector() != xi[0].vector());

    m.covariance.setZero();
    for (const auto& x : sample_dispersions(m)) CHECK(x.vector() == m.mean.vector());

    m.covariance.setZero();
    m.covariance(0, 0) = 100.0;
    for (const auto& x : sample_dispersions(m)) CHECK(x.vector().tail<3>() == m.mean.vector().tail<3>());

    m.covariance = Eigen::Matrix4d::Identity();
    m.covariance(1, 1) = -1.0;
    CHECK_THROWS_AS(sample_dispersions(m), std::invalid_argument);
    m.covariance = Eigen::Matrix4d::Identity();
    m.covariance(0, 1) = 0.5;
    CHECK_THROWS_AS(sample_dispersions(m), std::invalid_argument);
}

TEST_CASE("datasets and labels") {
    auto setup = fine_braking_setup();
    DispersionModel m;
    m.mean = {8000.0, 4000.0, -50.0, 90.0};
    m.count = 12;
    m.covariance = DispersionModel::default_covariance() * 1e-4;
    const auto xi = sample_dispersions(m);

    const auto all = build_datasets(xi, setup, 1);
    CHECK(all.classification.controllable() == 12);
    CHECK(all.guidance.size() == 12);

    auto dead = setup;
    dead.limits = {0.0, 0.0};
    const auto none = build_datasets(xi, dead, 1);
    CHECK(none.classification.controllable() == 0);
    CHECK(none.guidance.empty());
    for (const auto& r : none.rollouts) CHECK(r.feasible.empty());

    m.covariance = DispersionModel::default_covariance() * 16.0;
    m.count = 24;
    const auto wide = sample_dispersions(m);
    const auto d1 = build_datasets(wide, setup, 1);
    const auto d3 = build_datasets(wide, setup, 3);
    CHECK(static_cast<int>(d1.guidance.size()) == d1.classification.controllable());
    for (std::size_t i = 0; i < wide.size(); ++i) {
        const auto& s = d1.classification.samples[i];
        CHECK(s.label == (d1.rollouts[i].feasible.empty() ? -1 : 1));
        CHECK(s.label == d3.classification.samples[i].label);
        CHECK(d1.rollouts[i].final_mass_star == d3.rollouts[i].final_mass_star);
        CHECK(is_controllable(wide[i], setup) == (s.label == 1));
    }
    for (std::size_t i = 0; i < d1.guidance.size(); ++i) {
        CHECK(d1.guidance[i].dm_star == doctest::Approx(setup.mass - d1.guidance[i].final_mass));
    }
}

TEST_CASE("reduced coordinates exclude slow samples") {
    CHECK(reduced_coordinates({100.0, 50.0, -5.0, 20.0}).isApprox(Vector2d(5.0, -10.0)));
    CHECK_FALSE(reducible({1.0, 1.0, -0.05, 20.0}));
    CHECK_FALSE(reducible({1.0, 1.0, -1.0, 0.0}));
    CHECK(reducible({1.0, 1.0, -0.1, 0.1}));
}

TEST_CASE("conic fit recovers a separable ellipse") {
    const Ellipse e;
    std::vector<Vector2d> s;
    std::vector<int> y;
    ellipse_data(e, 2000, 0.1, 4, s, y);
    const auto b = fit_conic_boundary(s, y);
    int correct = 0;
    for (std::size_t i = 0; i < s.size(); ++i) correct += (b.value(s[i]) > 0.0) == (y[i] > 0);
    CHECK(correct == 2000);
    CHECK(b.discriminant() < 0.0);
    double norm = 0.0;
    for (double c : b.coefficients) norm += c * c;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0));

    std::vector<Vector2d> truth;
    for (int i = 0; i < 2000; ++i) truth.push_back(e.point(2.0 * M_PI * i / 2000));
    const auto fitted = zero_set(b, e.center, 2000);
    CHECK(hausdorff(fitted, truth) < 0.05 * e.a);

    // positive rescaling leaves every decision unchanged
    ConicBoundary scaled = b;
    for (auto& c : scaled.coefficients) c *= 37.5;
    for (const auto& p : s) CHECK(scaled.controllable(p) == b.controllable(p));
    for (const auto& p : {Vector2d(0.3, -0.2), Vector2d(1.0, 0.4)}) {
        CHECK(robustness_margin(scaled, p) == doctest::Approx(robustness_margin(b, p)));
    }
}

TEST_CASE("soft margin tolerates one flipped label") {
    const Ellipse e;
    std::vector<Vector2d> s;
    std::vector<int> y;
    ellipse_data(e, 2000, 0.1, 8, s, y);
    std::size_t flip = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (e.inside(s[i]) > 0.5) flip = i;
    y[flip] = -1;
    const auto b = fit_conic_boundary(s, y);
    int correct = 0;
    for (std::size_t i = 0; i < s.size(); ++i) correct += (b.value(s[i]) > 0.0) == (y[i] > 0);
    CHECK(correct >= 1999);
}

TEST_CASE("conic fit rejects non-convex controllable sets") {
    const Ellipse e;
    std::vector<Vector2d> s;
    std::vector<int> y;
    ellipse_data(e, 500, 0.1, 5, s, y);
    for (auto& l : y) l = -l;
    SvmOptions free;
    free.convex = false;
    try {
        fit_conic_boundary(s, y, free);
        FAIL("expected ConvexityError");
    } catch (const ConvexityError& err) {
        double n = 0.0;
        for (double c : err.coefficients()) n += c * c;
        CHECK(n == doctest::Approx(1.0));
        CHECK(std::string(err.what()).find("exterior") != std::string::npos);
    }
    CHECK_THROWS_AS(fit_conic_boundary(std::vector<Vector2d>(5, Vector2d::Zero()), std::vector<int>(5, 1)),
                    std::invalid_argument);
    CHECK_THROWS_AS(fit_conic_boundary(s, std::vector<int>(s.size(), 1)), std::invalid_argument);
}

TEST_CASE("convex fit of a straight boundary is a flat ellipse") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    std::vector<Vector2d> s;
    std::vector<int> y;
    while (s.size() < 1000) {
        const Vector2d p(U(rng), U(rng));
        const double g = 0.8 - p(0) - 0.5 * p(1);
        if (std::abs(g) < 0.1) continue;
        s.push_back(p);
        y.push_back(g > 0.0 ? 1 : -1);
    }
    SvmOptions free;
    free.convex = false;
    CHECK_THROWS_AS(fit_conic_boundary(s, y, free), ConvexityError);
    const auto b = fit_conic_boundary(s, y);
    CHECK(b.discriminant() < 0.0);
    CHECK(b.coefficients[0] < 0.0);
    int correct = 0;
    for (std::size_t i = 0; i < s.size(); ++i) correct += (b.value(s[i]) > 0.0) == (y[i] > 0);
    CHECK(correct >= 995);
}

TEST_CASE("robustness margin") {
    ConicBoundary b;
    b.coefficients = {1.0, 0.0, 1.0, 0.0, 0.0, -1.0};
    b.orientation = -1;
    CHECK(robustness_margin(b, Vector2d(0.5, 0.0)) == doctest::Approx(0.75));
    CHECK(robustness_margin(b, Vector2d(1.0, 0.0)) == doctest::Approx(0.0));
    CHECK(robustness_margin(b, Vector2d(0.6, 0.8)) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_THROWS_AS(robustness_margin(b, Vector2d(0.0, 0.0)), DegeneratePointError);
    for (double t : {0.1, 1.0, 2.5}) {
        const Vector2d u(std::cos(t), std::sin(t));
        CHECK(robustness_margin(b, 0.9 * u) > 0.0);
        CHECK(robustness_margin(b, 1.1 * u) < 0.0);
    }
}

TEST_CASE("boundary distance") {
    const auto c = circle(Vector2d(1.0, 2.0), 3.0);
    CHECK(boundary_distance(c, Vector2d(1.0, 2.0)) == doctest::Approx(3.0));
    CHECK(boundary_distance(c, Vector2d(2.0, 2.0)) == doctest::Approx(2.0));
    CHECK(boundary_distance(c, Vector2d(1.0, 7.0)) == doctest::Approx(-2.0));

    const Ellipse e;
    ConicBoundary b;
    {
        // expand 1 - q' R diag(1/a^2, 1/b^2) R' q with q = s - centre
        const double co = std::cos(e.rot), si = std::sin(e.rot);
        Eigen::Matrix2d R;
        R << co, -si, si, co;
        const Eigen::Matrix2d P = R * Vector2d(1.0 / (e.a * e.a), 1.0 / (e.b * e.b)).asDiagonal() * R.transpose();
        const Vector2d g = 2.0 * P * e.center;
        b.coefficients = {-P(0, 0), -2.0 * P(0, 1), -P(1, 1), g(0), g(1), 1.0 - e.center.dot(P * e.center)};
    }
    std::vector<Vector2d> curve;
    for (int i = 0; i < 20000; ++i) curve.push_back(e.point(2.0 * M_PI * i / 20000));
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> U(-2.5, 2.5);
    for (int i = 0; i < 200; ++i) {
        const Vector2d p(U(rng), U(rng));
        double d = INFINITY;
        for (const auto& q : curve) d = std::min(d, (p - q).norm());
        const double got = boundary_distance(b, p);
        CHECK(std::abs(got) == doctest::Approx(d).epsilon(1e-5));
        CHECK((got > 0.0) == (e.inside(p) > 0.0));
    }
    CHECK(boundary_distance(b, e.center) == doctest::Approx(e.b));

    ConicBoundary flipped = b;
    for (auto& k : flipped.coefficients) k = -k;
    flipped.orientation = -1;
    CHECK(boundary_distance(flipped, Vector2d(1.0, 0.5)) == doctest::Approx(boundary_distance(b, Vector2d(1.0, 0.5))));

    ConicBoundary hyperbola;
    hyperbola.coefficients = {1.0, 0.0, -1.0, 0.0, 0.0, 1.0};
    CHECK_THROWS_AS(boundary_distance(hyperbola, Vector2d(0.0, 0.0)), std::invalid_argument);
    ConicBoundary empty;
    empty.coefficients = {-1.0, 0.0, -1.0, 0.0, 0.0, -1.0};
    CHECK_THROWS_AS(boundary_distance(empty, Vector2d(0.0, 0.0)), std::invalid_argument);
}

TEST_CASE("margin sigma is the sample deviation over controllable samples") {
    ConicBoundary b;
    b.coefficients = {1.0, 0.0, 1.0, 0.0, 0.0, -1.0};
    b.orientation = -1;
    ClassificationDataset d;
    const std::vector<double> radii{0.2, 0.5, 0.7, 1.3};
    for (double r : radii) d.samples.push_back({{}, r < 1.0 ? 1 : -1, Vector2d(r, 0.0), true});
    d.samples.push_back({{}, 1, Vector2d(0.1, 0.0), false});
    std::vector<double> m;
    for (double r : {0.2, 0.5, 0.7}) m.push_back((1.0 - r * r) / (2.0 * r));
    const double mean = (m[0] + m[1] + m[2]) / 3.0;
    double ss = 0.0;
    for (double v : m) ss += (v - mean) * (v - mean);
    CHECK(margin_sigma(b, d, MarginMetric::gradient_ratio) == doctest::Approx(std::sqrt(ss / 2.0)));
    // distances 0.8, 0.5, 0.3
    CHECK(margin_sigma(b, d) == doctest::Approx(0.25166114784235836));
    CHECK(d.excluded() == 1);
}

TEST_CASE("propellant surrogate") {
    auto f = [](const GuidanceFeatures& x) {
        return 60.0 + 0.002 * (x.S - 6000.0) + 1e-6 * (x.S - 6000.0) * (x.S - 6000.0) + 0.01 * (x.v - 80.0) * (x.v - 80.0) -
               0.3 * x.w + 1e-4 * x.H * x.w;
    };
    const auto s = quadratic_surrogate(f, 3);
    CHECK(s.model.terms() == 15);
    CHECK(s.rms() < 1e-8);
    GuidanceFeatures probe{7000.0, 5600.0, -45.0, 85.0};
    CHECK(s(probe) == doctest::Approx(f(probe)).epsilon(1e-6));

    const auto c = quadratic_surrogate([](const GuidanceFeatures&) { return 42.0; }, 4);
    CHECK(c(probe) == doctest::Approx(42.0).epsilon(1e-10));
    CHECK_THROWS_AS(fit_dm_surrogate(std::vector<GuidanceRow>(14)), std::invalid_argument);
}

namespace {

RefineConfig refine_box() {
    RefineConfig c;
    c.H = 5700.0;
    c.S_bounds = {3000.0, 9000.0};
    c.v_bounds = {60.0, 120.0};
    c.w_bounds = {-80.0, -30.0};
    c.v_sops = 100.0;
    return c;
}

// S/v in [25, 150], H/w in [-190, -71]; the circle centre lies outside
const ConicBoundary kRegion = circle(Vector2d(40.0, -60.0), 45.0);

double surrogate_dm(const GuidanceFeatures& x) { return 40.0 + 0.004 * x.S + 0.002 * (x.v - 90.0) * (x.v - 90.0) - 0.2 * x.w; }

}  // namespace

TEST_CASE("refinement reduces to its single objectives") {
    const auto dm = quadratic_surrogate(surrogate_dm, 6);
    auto cfg = refine_box();

    // brute-force oracle over the box
    double best_dm = INFINITY, best_margin = -INFINITY;
    for (int i = 0; i <= 60; ++i)
        for (int j = 0; j <= 60; ++j)
            for (int l = 0; l <= 60; ++l) {
                GuidanceFeatures x{3000.0 + 100.0 * i, cfg.H, -80.0 + 50.0 * l / 60.0, 60.0 + j};
                if (x.v > cfg.v_sops) continue;
                const double M = 45.0 - (reduced_coordinates(x) - Vector2d(40.0, -60.0)).norm();
                if (!(M > 0.0)) continue;
                best_dm = std::min(best_dm, dm(x));
                best_margin = std::max(best_margin, M);
            }
    REQUIRE(std::isfinite(best_dm));

    cfg.lambda = 0.0;
    const auto w0 = refine_waypoint(kRegion, dm, cfg);
    CHECK(w0.dm <= best_dm + 1e-3);
    CHECK(w0.margin > 0.0);
    CHECK(w0.x.v <= cfg.v_sops);
    CHECK(w0.x.H == cfg.H);

    cfg.lambda = 1.0;
    const auto w1 = refine_waypoint(kRegion, dm, cfg);
    CHECK(w1.margin >= best_margin - 1e-3);
    CHECK(w1.x.v <= cfg.v_sops);
    CHECK(w1.margin >= w0.margin);

    cfg.v_sops = 50.0;
    try {
        refine_waypoint(kRegion, dm, cfg);
        FAIL("expected InfeasibleRefinement");
    } catch (const InfeasibleRefinement& e) {
        REQUIRE_FALSE(e.violated().empty());
        CHECK(e.violated().front() == "v <= v_sops");
    }
}

TEST_CASE("trade-off curve is monotone and Pareto") {
    const auto dm = quadratic_surrogate(surrogate_dm, 6);
    const auto curve = trace_tradeoff(kRegion, dm, lambda_grid(21), 5.0, refine_box());
    REQUIRE(curve.entries.size() == 21);
    for (std::size_t i = 0; i < 21; ++i) {
        const auto& e = curve.entries[i];
        CHECK(e.feasible);
        CHECK(e.lambda == doctest::Approx(i / 20.0));
        CHECK(e.margin_sigma > 0.0);
        if (i > 0) CHECK(e.margin_sigma >= curve.entries[i - 1].margin_sigma);
    }
    for (const auto& a : curve.entries) {
        for (const auto& b : curve.entries) {
            if (b.margin_sigma > a.margin_sigma) CHECK(b.dm >= a.dm);
            const bool dominates = b.margin_sigma >= a.margin_sigma && b.dm <= a.dm &&
                                   (b.margin_sigma > a.margin_sigma || b.dm < a.dm);
            CHECK_FALSE(dominates);
        }
    }
    CHECK(curve.entries.back().dm > curve.entries.front().dm);
    CHECK_THROWS_AS(trace_tradeoff(kRegion, dm, {0.0, 1.5}, 1.0, refine_box()), std::invalid_argument);

    const auto w = waypoint_at_margin(kRegion, dm, 2.0, 5.0, refine_box());
    CHECK(w.margin_sigma >= 2.0);
    CHECK(w.dm >= curve.entries.front().dm - 1e-9);
}

TEST_CASE("fine-braking state maps back to the site frame") {
    mission::MissionConfig c;
    const auto setup = fine_braking_setup();
    const GuidanceFeatures x{8000.0, 5700.0, -50.0, 90.0};
    const auto s = fine_braking_state(x, setup, c);
    dyn::SphericalState ref;
    ref.r = c.moon.radius;
    ref.theta = dyn::deg2rad(c.site_longitude_deg);
    ref.phi = c.site_track_latitude();
    const auto back = dyn::spherical_to_local(s, ref, c.moon);
    const auto f = guidance::features(back, setup.target);
    CHECK(f.S == doctest::Approx(x.S));
    CHECK(f.H == doctest::Approx(x.H));
    CHECK(f.w == x.w);
    CHECK(f.v == x.v);
    CHECK(s.m == setup.mass);
}

TEST_CASE("rough-braking line search") {
    mission::MissionConfig c;
    c.collocation = {8, 8, 6};
    dyn::SphericalState fb{c.moon.radius + 7370.0, dyn::deg2rad(c.site_longitude_deg), 1.2077, -65.5, 0.0, 93.0, 986.0};
    const double hold = c.max_thrust(0);
    sqp::SolverOptions opt;
    opt.kkt_tolerance = 1e-5;

    const auto one = controllability::rough_braking_line_search(fb, hold, c, 745e3, 745e3, 1e3, opt);
    REQUIRE(one.candidates.size() == 1);
    CHECK(one.selected_downrange == 745e3);
    CHECK(one.candidates[0].feasible);
    CHECK(one.candidates[0].propellant > 0.0);

    const auto held = dyn::propagate_attitude_hold(one.rough_braking_end, hold, c.moon, c.attitude_hold);
    const Eigen::VectorXd rel = (held.to_vector() - fb.to_vector())
                                    .cwiseQuotient(fb.to_vector().cwiseAbs().cwiseMax(Eigen::VectorXd::Ones(7)));
    CHECK(rel.cwiseAbs().maxCoeff() < 1e-6);

    const auto sweep = controllability::rough_braking_line_search(fb, hold, c, 735e3, 755e3, 10e3, opt);
    REQUIRE(sweep.candidates.size() == 3);
    CHECK(sweep.selected_downrange >= 735e3);
    CHECK(sweep.selected_downrange <= 755e3);

    CHECK_THROWS_AS(controllability::rough_braking_line_search(fb, hold, c, 5.0, 1.0, 1.0, opt), std::invalid_argument);
}
