#ifndef LANDING_LUNAR_DYNAMICS_HPP
#define LANDING_LUNAR_DYNAMICS_HPP

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <vector>

namespace landing::dyn {

constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double d) { return d * kPi / 180.0; }

struct MoonConstants {
    double mu = 4.9028e12;       // m^3/s^2
    double radius = 1737400.0;   // m
    double omega = 2.6617e-6;    // rad/s
    double g0 = 9.81;            // m/s^2
    double isp = 320.0;          // s
    double engine_max_thrust = 800.0;  // N per engine
    double underperformance = 0.95;
    double g_moon = 1.62;        // m/s^2, flat-moon model
    double dry_mass = 600.0;     // kg

    Eigen::Vector3d g_local() const { return {0.0, -g_moon, 0.0}; }
    double max_thrust(int engines) const { return engines * engine_max_thrust * underperformance; }
    double mass_rate(double thrust) const { return -thrust / (isp * g0); }
    void validate() const;
};

/// Moon-fixed spherical state; vector order (r, theta, phi, w, u, v, m).
struct SphericalState {
    double r = 0.0;
    double theta = 0.0;  // longitude
    double phi = 0.0;    // latitude
    double w = 0.0;      // radial velocity
    double u = 0.0;      // east (across) velocity
    double v = 0.0;      // north (tangential) velocity
    double m = 0.0;

    Eigen::Matrix<double, 7, 1> to_vector() const;
    static SphericalState from_vector(const Eigen::Ref<const Eigen::VectorXd>& x);
};

struct BodyThrust {
    double T = 0.0;
    double alpha = 0.0;  // pitch from local vertical, positive against the north velocity
    double beta = 0.0;   // yaw out of the north-up plane, positive east
};

/// Flat-moon state; axes (downrange/north, up, crossrange/east).
struct LocalState {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    double mass = 0.0;

    Eigen::Matrix<double, 7, 1> to_vector() const;
    static LocalState from_vector(const Eigen::Ref<const Eigen::VectorXd>& x);
};

class DynamicsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unit thrust direction in local axes for pitch alpha and yaw beta.
Eigen::Vector3d thrust_direction(double alpha, double beta);

/// Rotating spherical-moon equations of motion. Throws DynamicsError at the poles
/// or for non-positive r, m.
Eigen::Matrix<double, 7, 1> spherical_eom(const SphericalState& s, const BodyThrust& c, const MoonConstants& k);

/// Flat-moon equations: r' = v, v' = g + a, m' = -T/(Isp g0). Throws
/// DynamicsError at or below the dry-mass floor.
Eigen::Matrix<double, 7, 1> flat_eom(const LocalState& s, const Eigen::Vector3d& accel, double thrust,
                                     const MoonConstants& k);

/// Mirror across the equator (phi -> -phi, v -> -v). Together with
/// mirror_thrust the equations of motion are invariant under this map, so a
/// southbound track can be flown as a northbound one.
SphericalState mirror_latitude(const SphericalState& s);
BodyThrust mirror_thrust(const BodyThrust& c);

struct Trajectory {
    std::vector<double> t;
    std::vector<Eigen::VectorXd> x;
};

class PropagationError : public DynamicsError {
public:
    PropagationError(const std::string& what, Trajectory partial)
        : DynamicsError(what), partial_(std::move(partial)) {}
    const Trajectory& partial() const { return partial_; }

private:
    Trajectory partial_;
};

using Rhs = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd& x)>;

/// Classic RK4 with fixed step (last step shortened to land on t0 + duration).
/// Dense output holds every step. Non-finite derivatives or a throwing rhs
/// raise PropagationError carrying the trajectory so far.
Trajectory propagate(const Rhs& rhs, const Eigen::VectorXd& x0, double duration, double step, double t0 = 0.0);

/// Single RK4 step.
Eigen::VectorXd rk4_step(const Rhs& rhs, double t, const Eigen::VectorXd& x, double h);

struct AttitudeHold {
    double duration = 10.0;
    double step = 0.1;
    double alpha = deg2rad(50.0);
    double beta = 0.0;
};

/// The attitude-hold operator: constant thrust magnitude, fixed pitch/yaw.
SphericalState propagate_attitude_hold(const SphericalState& s, double thrust, const MoonConstants& k,
                                       const AttitudeHold& hold = {});

/// Inverse of propagate_attitude_hold by backward-time RK4.
SphericalState invert_attitude_hold(const SphericalState& s, double thrust, const MoonConstants& k,
                                    const AttitudeHold& hold = {});

/**
 * Local frame anchored at the ground projection of `reference`: position is
 * (along-track arc R_M (phi - phi_ref), r - R_M - datum_elevation,
 * cross-track arc R_M cos(phi_ref) (theta - theta_ref)), velocity is (v, w, u).
 */
LocalState spherical_to_local(const SphericalState& s, const SphericalState& reference, const MoonConstants& k,
                              double datum_elevation = 0.0);

/// Inverse of spherical_to_local for the same reference and datum.
SphericalState local_to_spherical(const LocalState& s, const SphericalState& reference, const MoonConstants& k,
                                  double datum_elevation = 0.0);

/// Specific mechanical energy in the inertial sense (valid for omega = 0).
double specific_energy(const SphericalState& s, const MoonConstants& k);

}  // namespace landing::dyn

#endif  // LANDING_LUNAR_DYNAMICS_HPP
