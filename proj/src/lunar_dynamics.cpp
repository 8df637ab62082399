#include "landing/lunar_dynamics.hpp"

#include <cmath>
#include <string>

namespace landing::dyn {

void MoonConstants::validate() const {
    if (!(mu > 0 && radius > 0 && omega >= 0 && g0 > 0 && isp > 0 && engine_max_thrust > 0 && g_moon > 0 &&
          dry_mass > 0)) {
        throw std::invalid_argument("moon constants must be positive");
    }
    if (!(underperformance > 0.0 && underperformance <= 1.0)) {
        throw std::invalid_argument("underperformance factor must lie in (0, 1]");
    }
}

Eigen::Matrix<double, 7, 1> SphericalState::to_vector() const {
    Eigen::Matrix<double, 7, 1> x;
    x << r, theta, phi, w, u, v, m;
    return x;
}

SphericalState SphericalState::from_vector(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != 7) throw std::invalid_argument("spherical state needs 7 entries");
    return {x(0), x(1), x(2), x(3), x(4), x(5), x(6)};
}

Eigen::Matrix<double, 7, 1> LocalState::to_vector() const {
    Eigen::Matrix<double, 7, 1> x;
    x << position, velocity, mass;
    return x;
}

LocalState LocalState::from_vector(const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != 7) throw std::invalid_argument("local state needs 7 entries");
    return {x.head<3>(), x.segment<3>(3), x(6)};
}

Eigen::Vector3d thrust_direction(double alpha, double beta) {
    return {-std::sin(alpha) * std::cos(beta), std::cos(alpha), std::sin(alpha) * std::sin(beta)};
}

Eigen::Matrix<double, 7, 1> spherical_eom(const SphericalState& s, const BodyThrust& c, const MoonConstants& k) {
    if (!(s.r > 0.0)) throw DynamicsError("spherical_eom: radius must be positive");
    if (!(s.m > 0.0)) throw DynamicsError("spherical_eom: mass must be positive");
    const double cp = std::cos(s.phi);
    if (std::abs(cp) < 1e-12) throw DynamicsError("spherical_eom: singular coordinates at the pole");
    const double sp = std::sin(s.phi);
    const double tp = sp / cp;
    const double w = k.omega;
    const double ta = c.T / s.m;
    const Eigen::Vector3d a = ta * thrust_direction(c.alpha, c.beta);  // (north, up, east)

    Eigen::Matrix<double, 7, 1> d;
    d(0) = s.w;
    d(1) = s.u / (s.r * cp);
    d(2) = s.v / s.r;
    d(3) = a(1) - k.mu / (s.r * s.r) + (s.u * s.u + s.v * s.v) / s.r + 2.0 * s.u * w * cp + s.r * w * w * cp * cp;
    d(4) = a(2) + (-s.u * s.w + s.u * s.v * tp) / s.r - 2.0 * s.w * w * cp + 2.0 * s.v * w * sp;
    d(5) = a(0) + (-s.v * s.w - s.u * s.u * tp) / s.r - 2.0 * s.u * w * sp - s.r * w * w * sp * cp;
    d(6) = k.mass_rate(c.T);
    return d;
}

Eigen::Matrix<double, 7, 1> flat_eom(const LocalState& s, const Eigen::Vector3d& accel, double thrust,
                                     const MoonConstants& k) {
    if (s.mass <= k.dry_mass) throw DynamicsError("flat_eom: mass depleted to the dry-mass floor");
    Eigen::Matrix<double, 7, 1> d;
    d << s.velocity, k.g_local() + accel, k.mass_rate(thrust);
    return d;
}

SphericalState mirror_latitude(const SphericalState& s) {
    SphericalState out = s;
    out.phi = -s.phi;
    out.v = -s.v;
    return out;
}

BodyThrust mirror_thrust(const BodyThrust& c) { return {c.T, -c.alpha, -c.beta}; }

Eigen::VectorXd rk4_step(const Rhs& rhs, double t, const Eigen::VectorXd& x, double h) {
    const Eigen::VectorXd k1 = rhs(t, x);
    const Eigen::VectorXd k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
    const Eigen::VectorXd k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
    const Eigen::VectorXd k4 = rhs(t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory propagate(const Rhs& rhs, const Eigen::VectorXd& x0, double duration, double step, double t0) {
    if (!(duration > 0.0)) throw std::invalid_argument("propagate: duration must be positive");
    if (!(step > 0.0)) throw std::invalid_argument("propagate: step must be positive");
    Trajectory traj;
    const auto steps = static_cast<long>(std::ceil(duration / step - 1e-9));
    traj.t.reserve(static_cast<std::size_t>(steps) + 1);
    traj.x.reserve(static_cast<std::size_t>(steps) + 1);
    traj.t.push_back(t0);
    traj.x.push_back(x0);
    Eigen::VectorXd x = x0;
    for (long i = 0; i < steps; ++i) {
        const double t = t0 + static_cast<double>(i) * step;
        const double h = (i == steps - 1) ? (t0 + duration - t) : step;
        try {
            x = rk4_step(rhs, t, x, h);
        } catch (const std::exception& e) {
            throw PropagationError(std::string("propagate: ") + e.what(), std::move(traj));
        }
        if (!x.allFinite()) throw PropagationError("propagate: non-finite state", std::move(traj));
        traj.t.push_back(t + h);
        traj.x.push_back(x);
    }
    return traj;
}

namespace {

Eigen::VectorXd hold_rhs(const Eigen::VectorXd& x, double thrust, const MoonConstants& k, const AttitudeHold& hold,
                         double sign) {
    const auto s = SphericalState::from_vector(x);
    return sign * Eigen::VectorXd(spherical_eom(s, {thrust, hold.alpha, hold.beta}, k));
}

}  // namespace

SphericalState propagate_attitude_hold(const SphericalState& s, double thrust, const MoonConstants& k,
                                       const AttitudeHold& hold) {
    const auto traj = propagate(
        [&](double, const Eigen::VectorXd& x) { return hold_rhs(x, thrust, k, hold, 1.0); }, s.to_vector(),
        hold.duration, hold.step);
    return SphericalState::from_vector(traj.x.back());
}

SphericalState invert_attitude_hold(const SphericalState& s, double thrust, const MoonConstants& k,
                                    const AttitudeHold& hold) {
    const auto traj = propagate(
        [&](double, const Eigen::VectorXd& x) { return hold_rhs(x, thrust, k, hold, -1.0); }, s.to_vector(),
        hold.duration, hold.step);
    return SphericalState::from_vector(traj.x.back());
}

LocalState spherical_to_local(const SphericalState& s, const SphericalState& reference, const MoonConstants& k,
                              double datum_elevation) {
    LocalState out;
    out.position << k.radius * (s.phi - reference.phi), s.r - k.radius - datum_elevation,
        k.radius * std::cos(reference.phi) * (s.theta - reference.theta);
    out.velocity << s.v, s.w, s.u;
    out.mass = s.m;
    return out;
}

SphericalState local_to_spherical(const LocalState& s, const SphericalState& reference, const MoonConstants& k,
                                  double datum_elevation) {
    SphericalState out;
    out.phi = reference.phi + s.position.x() / k.radius;
    out.r = s.position.y() + k.radius + datum_elevation;
    out.theta = reference.theta + s.position.z() / (k.radius * std::cos(reference.phi));
    out.v = s.velocity.x();
    out.w = s.velocity.y();
    out.u = s.velocity.z();
    out.m = s.mass;
    return out;
}

double specific_energy(const SphericalState& s, const MoonConstants& k) {
    return 0.5 * (s.w * s.w + s.u * s.u + s.v * s.v) - k.mu / s.r;
}

}  // namespace landing::dyn
