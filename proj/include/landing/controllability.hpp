#ifndef LANDING_CONTROLLABILITY_HPP
#define LANDING_CONTROLLABILITY_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "landing/descent_mission.hpp"
#include "landing/polynomial_guidance.hpp"

namespace landing::controllability {

using guidance::GuidanceFeatures;

/// Gaussian dispersions of (S, H, w, v) about the forward-pass waypoint.
struct DispersionModel {
    GuidanceFeatures mean;
    Eigen::Matrix4d covariance = default_covariance();
    int count = 2000;
    std::uint64_t seed = 1;

    /// diag(500 m, 500 m, 10 m/s, 10 m/s)^2
    static Eigen::Matrix4d default_covariance();
    void validate() const;
};

/// Deterministic in the seed. Throws std::invalid_argument for an asymmetric
/// or indefinite covariance; small negative eigenvalues are clipped to zero.
std::vector<GuidanceFeatures> sample_dispersions(const DispersionModel& model);

/// Guidance problem the samples are rolled out against.
struct RolloutSetup {
    guidance::TerminalTarget target;
    Eigen::Vector3d a0 = Eigen::Vector3d::Zero();  // thrust acceleration at the phase start
    double mass = 0.0;                            // kg at the phase start
    guidance::TgoRange range;
    guidance::ThrustLimits limits;
    guidance::RolloutOptions options;
    dyn::MoonConstants moon;

    dyn::LocalState state(const GuidanceFeatures& x) const;
};

/// Reduced coordinates s = (S/v, H/w).
Eigen::Vector2d reduced_coordinates(const GuidanceFeatures& x);
/// Reduced coordinates are used only when |v| and |w| are at least this large (m/s).
constexpr double kMinReducedSpeed = 0.1;
bool reducible(const GuidanceFeatures& x);

struct GuidanceRow {
    GuidanceFeatures x;
    double t_go_star = 0.0;
    double dm_star = 0.0;
    double final_mass = 0.0;
};

struct LabeledSample {
    GuidanceFeatures x;
    int label = -1;  // +1 controllable
    Eigen::Vector2d s = Eigen::Vector2d::Zero();
    bool usable = true;  // reduced coordinates defined
};

struct ClassificationDataset {
    std::vector<LabeledSample> samples;

    int excluded() const;
    int controllable() const;
};

struct Datasets {
    std::vector<GuidanceRow> guidance;  // one row per controllable sample
    ClassificationDataset classification;
    std::vector<guidance::TgoSearch> rollouts;  // F(x_i) per sample; their union is X_C
};

/// Grid-searches t_go for every sample. Rollouts are spread over `threads`
/// workers (0 = hardware concurrency); results do not depend on the count.
Datasets build_datasets(const std::vector<GuidanceFeatures>& samples, const RolloutSetup& setup, int threads = 0);

/// Existence of a converged t_go on the grid (stops at the first one).
bool is_controllable(const GuidanceFeatures& x, const RolloutSetup& setup);

/// a s1^2 + b s1 s2 + c s2^2 + d s1 + e s2 + f, multiplied by `orientation`.
struct ConicBoundary {
    std::array<double, 6> coefficients{};
    int orientation = 1;

    double value(const Eigen::Vector2d& s) const;
    Eigen::Vector2d gradient(const Eigen::Vector2d& s) const;
    double discriminant() const;
    bool controllable(const Eigen::Vector2d& s) const { return value(s) > 0.0; }
};

class ConvexityError : public std::runtime_error {
public:
    ConvexityError(const std::string& what, std::array<double, 6> coefficients)
        : std::runtime_error(what), coefficients_(coefficients) {}
    const std::array<double, 6>& coefficients() const { return coefficients_; }

private:
    std::array<double, 6> coefficients_;
};

class DegeneratePointError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct SvmOptions {
    double C = 10.0;
    int iterations = 100000;
    std::uint64_t seed = 1;
    /// Keep the quadratic part negative definite (eigenvalues <= -curvature_floor
    /// in standardized coordinates) at every iterate.
    bool convex = true;
    double curvature_floor = 1e-3;
};

/**
 * Soft-margin linear classifier on (s1^2, s1 s2, s2^2, s1, s2, 1) by averaged
 * stochastic projected subgradient descent on standardized coordinates, with
 * the iterates optionally projected onto the concave quadratics. The
 * returned coefficients are in raw s units, unit norm, positive on the
 * controllable side. Throws ConvexityError unless the zero set is an ellipse
 * enclosing the controllable side.
 */
ConicBoundary fit_conic_boundary(const std::vector<Eigen::Vector2d>& s, const std::vector<int>& labels,
                                 const SvmOptions& options = {});
ConicBoundary fit_conic_boundary(const ClassificationDataset& data, const SvmOptions& options = {});

/// M = value / |gradient|. Throws DegeneratePointError where the gradient vanishes.
double robustness_margin(const ConicBoundary& boundary, const Eigen::Vector2d& s);

/**
 * Signed Euclidean distance from s to the zero set of an elliptic boundary,
 * positive on the controllable side. Throws std::invalid_argument unless the
 * zero set is a real ellipse.
 */
double boundary_distance(const ConicBoundary& boundary, const Eigen::Vector2d& s);

enum class MarginMetric {
    distance,        // boundary_distance
    gradient_ratio,  // robustness_margin
};

double margin(const ConicBoundary& boundary, const Eigen::Vector2d& s, MarginMetric metric);

/// Sample standard deviation of the margin over the usable controllable samples.
double margin_sigma(const ConicBoundary& boundary, const ClassificationDataset& data,
                    MarginMetric metric = MarginMetric::distance);

/// Quadratic propellant surrogate over (S, H, w, v).
struct DmSurrogate {
    guidance::PolynomialModel model;

    double operator()(const GuidanceFeatures& x) const { return model.evaluate(x.vector()); }
    double rms() const { return model.rms(); }
};

DmSurrogate fit_dm_surrogate(const std::vector<GuidanceRow>& data);

struct RefineConfig {
    double lambda = 0.0;
    double H = 0.0;  // fixed height above the target
    std::array<double, 2> S_bounds{0.0, 0.0};
    std::array<double, 2> v_bounds{0.0, 0.0};
    std::array<double, 2> w_bounds{0.0, 0.0};
    double v_sops = 100.0;
    double dm_max = std::numeric_limits<double>::infinity();
    double margin_scale = 1.0;  // sigma; the objective uses M / margin_scale
    MarginMetric metric = MarginMetric::distance;
    double step_tolerance = 1e-7;  // pattern size, fraction of the box

    void validate() const;
};

struct RefinedWaypoint {
    GuidanceFeatures x;
    double margin = 0.0;        // raw M
    double margin_sigma = 0.0;  // M / margin_scale
    double dm = 0.0;
    double objective = 0.0;
};

class InfeasibleRefinement : public std::runtime_error {
public:
    InfeasibleRefinement(const std::string& what, std::vector<std::string> violated)
        : std::runtime_error(what), violated_(std::move(violated)) {}
    const std::vector<std::string>& violated() const { return violated_; }

private:
    std::vector<std::string> violated_;
};

/**
 * min -lambda M / sigma + (1 - lambda) dm over (S, v, w) with H fixed, subject
 * to v <= v_sops, M > 0 and dm <= dm_max, by compass search from a 3x3x3
 * start grid. Ties within 1e-9 of the best objective go to the lowest dm.
 */
RefinedWaypoint refine_waypoint(const ConicBoundary& boundary, const DmSurrogate& surrogate,
                                const RefineConfig& config);

struct TradeoffEntry {
    double lambda = 0.0;
    GuidanceFeatures x;
    double margin_sigma = 0.0;
    double dm = 0.0;
    bool feasible = false;
};

struct TradeoffCurve {
    std::vector<TradeoffEntry> entries;  // sorted by lambda
};

/// Uniform grid of `points` values on [0, 1].
std::vector<double> lambda_grid(int points = 21);

/**
 * Refines at every lambda. All local optima found over the sweep are pooled
 * and each lambda takes its best pooled point, so the curve is a set of
 * weighted-sum minimizers over one candidate set.
 */
TradeoffCurve trace_tradeoff(const ConicBoundary& boundary, const DmSurrogate& surrogate,
                             const std::vector<double>& lambdas, double sigma, const RefineConfig& base);

/// First entry of a lambda bisection whose margin reaches `target_sigma`.
RefinedWaypoint waypoint_at_margin(const ConicBoundary& boundary, const DmSurrogate& surrogate, double target_sigma,
                                   double sigma, const RefineConfig& base, int bisections = 30);

struct DownrangeCandidate {
    double downrange = 0.0;
    bool feasible = false;
    double propellant = 0.0;
};

struct RoughBrakingSearch {
    dyn::SphericalState fine_braking_start;
    dyn::SphericalState rough_braking_end;  // back-propagated through the attitude hold
    std::vector<DownrangeCandidate> candidates;
    double selected_downrange = 0.0;
    mission::RoughBrakingSolve selected;
};

/// Site-frame local state of refined features, back in spherical track coordinates.
dyn::SphericalState fine_braking_state(const GuidanceFeatures& x, const RolloutSetup& setup,
                                       const mission::MissionConfig& config);

/**
 * Back-propagates the fine-braking start through the attitude hold, solves
 * the rough-braking phase for each downrange in [min, max] by `step` and
 * returns the feasible candidate nearest the middle of the feasible range.
 */
RoughBrakingSearch rough_braking_line_search(const dyn::SphericalState& fine_braking_start, double hold_thrust,
                                             const mission::MissionConfig& config, double downrange_min,
                                             double downrange_max, double step,
                                             const sqp::SolverOptions& options = {});

}  // namespace landing::controllability

#endif  // LANDING_CONTROLLABILITY_HPP
