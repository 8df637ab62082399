#ifndef LANDING_POLYNOMIAL_GUIDANCE_HPP
#define LANDING_POLYNOMIAL_GUIDANCE_HPP

#include <Eigen/Dense>

#include <array>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "landing/lunar_dynamics.hpp"

namespace landing::guidance {

/// Boundary triples in a flat local frame (downrange, up, crossrange).
/// Accelerations are thrust accelerations; the net acceleration is a + g.
struct GuidanceBoundary {
    Eigen::Vector3d r0 = Eigen::Vector3d::Zero(), v0 = Eigen::Vector3d::Zero(), a0 = Eigen::Vector3d::Zero();
    Eigen::Vector3d rf = Eigen::Vector3d::Zero(), vf = Eigen::Vector3d::Zero(), af = Eigen::Vector3d::Zero();
};

/// Net acceleration abar(t) = C0 + C1 t + C2 t^2 + C3 t^3 per axis.
struct PolyCoeffs {
    std::array<Eigen::Vector3d, 4> c{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                                     Eigen::Vector3d::Zero()};

    Eigen::Vector3d net_acceleration(double t) const;
    /// v(t) - v(0)
    Eigen::Vector3d velocity_change(double t) const;
    /// r(t) - r(0) - v(0) t
    Eigen::Vector3d position_change(double t) const;
};

class SingularSystemError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/**
 * Solves the 4x4 boundary system per axis. Throws SingularSystemError for
 * t_go <= 0. `near_singular` (optional) is set when t_go < 1e-3 s.
 */
PolyCoeffs solve_coeffs(const GuidanceBoundary& boundary, double t_go, const Eigen::Vector3d& g,
                        bool* near_singular = nullptr);

struct TerminalTarget {
    Eigen::Vector3d rf = Eigen::Vector3d::Zero();
    Eigen::Vector3d vf = Eigen::Vector3d::Zero();
    Eigen::Vector3d af = Eigen::Vector3d::Zero();
};

struct ThrustLimits {
    double min = 0.0;  // N
    double max = 0.0;  // N
};

struct RolloutOptions {
    double period = 0.1;               // s, guidance cycle
    double position_tolerance = 1.0;   // m
    double velocity_tolerance = 0.1;   // m/s
    bool record = false;               // keep the dense trace
    bool fast_path = true;             // open-loop evaluation when the first polynomial never saturates
};

struct RolloutSample {
    double t = 0.0;
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    double mass = 0.0;
    Eigen::Vector3d thrust = Eigen::Vector3d::Zero();  // N, commanded (after saturation) at t
};

struct RolloutResult {
    std::vector<RolloutSample> trace;
    Eigen::Vector3d final_position = Eigen::Vector3d::Zero();
    Eigen::Vector3d final_velocity = Eigen::Vector3d::Zero();
    double final_mass = 0.0;
    double t_go = 0.0;
    double position_error = 0.0;
    double velocity_error = 0.0;
    bool converged = false;       // terminal errors within tolerance and no divergence
    bool diverged = false;        // mass floor breached or non-finite state
    bool saturated = false;       // thrust demand left [T_min, T_max] at some cycle
    double saturated_time = 0.0;  // s spent saturated
    bool open_loop = false;       // result obtained on the fast path
    std::string diagnostic;
};

/**
 * Closed-loop polynomial guidance from x0 to `target` with horizon t_go.
 * Every cycle re-solves the coefficients from the current state, the net
 * acceleration realized at the end of the previous cycle and the remaining
 * time; the commanded thrust m |abar - g| is clamped to `limits` and the flat
 * equations are integrated with one RK4 step per cycle.
 */
RolloutResult closed_loop_rollout(const dyn::LocalState& x0, const Eigen::Vector3d& a0, const TerminalTarget& target,
                                  double t_go, const dyn::MoonConstants& k, const ThrustLimits& limits,
                                  const RolloutOptions& options = {});

struct TgoRange {
    double min = 150.0;
    double max = 500.0;
    double step = 1.0;

    std::vector<double> grid() const;
};

struct TgoSearch {
    std::vector<std::pair<double, double>> feasible;  // (t_go, m_f) of converged rollouts
    bool controllable = false;
    double t_go_star = 0.0;
    double final_mass_star = 0.0;
    double dm_star = 0.0;  // m0 - m_f(t_go*)
};

TgoSearch grid_search_tgo(const dyn::LocalState& x0, const Eigen::Vector3d& a0, const TerminalTarget& target,
                          const TgoRange& range, const dyn::MoonConstants& k, const ThrustLimits& limits,
                          const RolloutOptions& options = {});

/// Policy features relative to the target: downrange to go S, height above
/// the target H, vertical velocity w and downrange velocity v.
struct GuidanceFeatures {
    double S = 0.0, H = 0.0, w = 0.0, v = 0.0;

    Eigen::Vector4d vector() const { return {S, H, w, v}; }
};
GuidanceFeatures features(const dyn::LocalState& x, const TerminalTarget& target);
/// Inverse of `features` with zero crossrange position and velocity.
dyn::LocalState state_from_features(const GuidanceFeatures& f, const TerminalTarget& target, double mass);

class RankDeficientFit : public std::runtime_error {
public:
    RankDeficientFit(const std::string& what, std::vector<std::string> monomials)
        : std::runtime_error(what), monomials_(std::move(monomials)) {}
    const std::vector<std::string>& monomials() const { return monomials_; }

private:
    std::vector<std::string> monomials_;
};

/// Full multivariate polynomial of total degree <= `degree` on standardized features.
class PolynomialModel {
public:
    PolynomialModel() = default;

    /// Least squares on rows of X. Throws RankDeficientFit naming deficient monomials.
    static PolynomialModel fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int degree,
                               std::vector<std::string> names = {});

    double evaluate(const Eigen::VectorXd& x) const;
    Eigen::VectorXd evaluate_rows(const Eigen::MatrixXd& X) const;

    int degree() const { return degree_; }
    int dims() const { return static_cast<int>(mean_.size()); }
    std::size_t terms() const { return exponents_.size(); }
    const std::vector<std::vector<int>>& exponents() const { return exponents_; }
    const Eigen::VectorXd& coefficients() const { return coeffs_; }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::VectorXd& scale() const { return scale_; }
    double rms() const { return rms_; }
    std::string monomial_name(std::size_t term) const;

    static std::vector<std::vector<int>> monomials(int dims, int degree);

    /// Rebuild from stored parameters (serialization).
    static PolynomialModel from_parameters(int degree, Eigen::VectorXd mean, Eigen::VectorXd scale,
                                           Eigen::VectorXd coefficients, double rms,
                                           std::vector<std::string> names = {});

private:
    Eigen::RowVectorXd row(const Eigen::VectorXd& x) const;

    int degree_ = 0;
    std::vector<std::vector<int>> exponents_;
    std::vector<std::string> names_;
    Eigen::VectorXd mean_, scale_, coeffs_;
    double rms_ = 0.0;
};

/// Cubic t_go policy over (S, H, w, v): 35 monomials.
struct TgoPolicy {
    PolynomialModel model;

    double operator()(const GuidanceFeatures& f) const { return model.evaluate(f.vector()); }
    double rms() const { return model.rms(); }
};

struct TgoSample {
    GuidanceFeatures x;
    double t_go = 0.0;
};

TgoPolicy fit_tgo_policy(const std::vector<TgoSample>& data);

/// Trace columns: t_s, downrange_m, altitude_m, crossrange_m, v_mps, w_mps, u_mps, mass_kg, thrust_N, alpha_rad,
/// beta_rad.
void write_trace_csv(std::ostream& out, const std::vector<RolloutSample>& trace);
std::string trace_csv_header();

/// Pitch and yaw of a thrust vector in local axes (inverse of thrust_direction).
std::pair<double, double> thrust_angles(const Eigen::Vector3d& thrust);

}  // namespace landing::guidance

#endif  // LANDING_POLYNOMIAL_GUIDANCE_HPP
