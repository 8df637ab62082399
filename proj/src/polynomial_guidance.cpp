#include "landing/polynomial_guidance.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

namespace landing::guidance {

using Eigen::Vector3d;

Vector3d PolyCoeffs::net_acceleration(double t) const { return c[0] + t * (c[1] + t * (c[2] + t * c[3])); }

Vector3d PolyCoeffs::velocity_change(double t) const {
    return t * (c[0] + t * (c[1] / 2.0 + t * (c[2] / 3.0 + t * c[3] / 4.0)));
}

Vector3d PolyCoeffs::position_change(double t) const {
    return t * t * (c[0] / 2.0 + t * (c[1] / 6.0 + t * (c[2] / 12.0 + t * c[3] / 20.0)));
}

namespace {

// Rows 2-4 of the boundary system in normalized time tau = t / t_go, after
// eliminating the first coefficient.
const Eigen::Matrix3d& normalized_inverse() {
    static const Eigen::Matrix3d inv = [] {
        Eigen::Matrix3d m;
        m << 1.0, 1.0, 1.0, 1.0 / 2.0, 1.0 / 3.0, 1.0 / 4.0, 1.0 / 6.0, 1.0 / 12.0, 1.0 / 20.0;
        return Eigen::Matrix3d(m.inverse());
    }();
    return inv;
}

PolyCoeffs solve_net(const Vector3d& abar0, const Vector3d& abarf, const Vector3d& dv, const Vector3d& dr,
                     double t_go) {
    // in normalized time abar = D0 + D1 tau + D2 tau^2 + D3 tau^3 with D_j = C_j t_go^j
    Eigen::Matrix3d rhs;
    rhs.row(0) = (abarf - abar0).transpose();
    rhs.row(1) = (dv / t_go - abar0).transpose();
    rhs.row(2) = (dr / (t_go * t_go) - abar0 / 2.0).transpose();
    const Eigen::Matrix3d d = normalized_inverse() * rhs;
    PolyCoeffs p;
    p.c[0] = abar0;
    p.c[1] = d.row(0).transpose() / t_go;
    p.c[2] = d.row(1).transpose() / (t_go * t_go);
    p.c[3] = d.row(2).transpose() / (t_go * t_go * t_go);
    return p;
}

struct Command {
    Vector3d thrust_accel;
    bool saturated = false;
};

Command saturate(const Vector3d& a, double mass, const ThrustLimits& limits) {
    Command c;
    const double norm = a.norm();
    const double thrust = mass * norm;
    if (thrust > limits.max) {
        c.thrust_accel = a * (limits.max / thrust);
        c.saturated = true;
    } else if (thrust < limits.min) {
        const Vector3d dir = norm > 0.0 ? Vector3d(a / norm) : Vector3d::UnitY();
        c.thrust_accel = dir * (limits.min / mass);
        c.saturated = true;
    } else {
        c.thrust_accel = a;
    }
    return c;
}

void finalize(RolloutResult& r, const TerminalTarget& target, const RolloutOptions& options) {
    r.position_error = (r.final_position - target.rf).norm();
    r.velocity_error = (r.final_velocity - target.vf).norm();
    r.converged = !r.diverged && r.position_error < options.position_tolerance &&
                  r.velocity_error < options.velocity_tolerance;
    if (!r.converged && r.diagnostic.empty()) {
        std::ostringstream os;
        os << "terminal error " << r.position_error << " m, " << r.velocity_error << " m/s";
        if (r.saturated) os << " after " << r.saturated_time << " s of thrust saturation";
        r.diagnostic = os.str();
    }
}

struct CycleGrid {
    long cycles = 0;
    double period = 0.0;
    double last = 0.0;  // length of the final cycle
};

CycleGrid cycle_grid(double t_go, double period) {
    CycleGrid g;
    g.period = period;
    g.cycles = static_cast<long>(std::ceil(t_go / period - 1e-9));
    g.cycles = std::max<long>(g.cycles, 1);
    g.last = t_go - static_cast<double>(g.cycles - 1) * period;
    return g;
}

// Open-loop evaluation of the first-cycle polynomial. Returns false when the
// thrust would leave its limits at any RK4 stage, in which case the closed loop
// must be simulated.
bool open_loop(const dyn::LocalState& x0, const PolyCoeffs& p, const Vector3d& g, const TerminalTarget& target,
               double t_go, const dyn::MoonConstants& k, const ThrustLimits& limits, const RolloutOptions& options,
               RolloutResult& r) {
    const CycleGrid grid = cycle_grid(t_go, options.period);
    const double c = 1.0 / (k.isp * k.g0);
    double m = x0.mass;
    double t = 0.0;
    auto accel_norm = [&](double s) { return (p.net_acceleration(s) - g).norm(); };
    auto within = [&](double mass, double an) {
        const double thrust = mass * an;
        return thrust <= limits.max && thrust >= limits.min;
    };
    if (options.record) r.trace.reserve(static_cast<std::size_t>(grid.cycles) + 1);
    for (long i = 0; i < grid.cycles; ++i) {
        const double h = i == grid.cycles - 1 ? grid.last : grid.period;
        const double n1 = accel_norm(t), n2 = accel_norm(t + 0.5 * h), n4 = accel_norm(t + h);
        if (!within(m, n1)) return false;
        if (options.record) {
            r.trace.push_back({t, x0.position + x0.velocity * t + p.position_change(t),
                               x0.velocity + p.velocity_change(t), m, m * (p.net_acceleration(t) - g)});
        }
        const double k1 = -c * m * n1;
        const double m2 = m + 0.5 * h * k1;
        const double k2 = -c * m2 * n2;
        const double m3 = m + 0.5 * h * k2;
        const double k3 = -c * m3 * n2;
        const double m4 = m + h * k3;
        const double k4 = -c * m4 * n4;
        if (!within(m2, n2) || !within(m3, n2) || !within(m4, n4)) return false;
        m += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        if (m <= k.dry_mass) return false;
    }
    r.final_position = x0.position + x0.velocity * t_go + p.position_change(t_go);
    r.final_velocity = x0.velocity + p.velocity_change(t_go);
    r.final_mass = m;
    r.open_loop = true;
    if (options.record) {
        r.trace.push_back({t_go, r.final_position, r.final_velocity, m, m * (target.af)});
    }
    return true;
}

}  // namespace

PolyCoeffs solve_coeffs(const GuidanceBoundary& b, double t_go, const Vector3d& g, bool* near_singular) {
    if (!(t_go > 0.0)) throw SingularSystemError("solve_coeffs: t_go must be positive (singular system)");
    if (near_singular) *near_singular = t_go < 1e-3;
    return solve_net(b.a0 + g, b.af + g, b.vf - b.v0, b.rf - b.r0 - b.v0 * t_go, t_go);
}

RolloutResult closed_loop_rollout(const dyn::LocalState& x0, const Vector3d& a0, const TerminalTarget& target,
                                  double t_go, const dyn::MoonConstants& k, const ThrustLimits& limits,
                                  const RolloutOptions& options) {
    if (!(t_go > 0.0)) throw SingularSystemError("closed_loop_rollout: t_go must be positive");
    if (!(options.period > 0.0)) throw std::invalid_argument("closed_loop_rollout: guidance period must be positive");
    if (!(limits.max >= limits.min && limits.min >= 0.0)) {
        throw std::invalid_argument("closed_loop_rollout: thrust limits must satisfy 0 <= min <= max");
    }
    const Vector3d g = k.g_local();
    RolloutResult r;
    r.t_go = t_go;

    if (options.fast_path) {
        GuidanceBoundary b{x0.position, x0.velocity, a0, target.rf, target.vf, target.af};
        const PolyCoeffs p = solve_coeffs(b, t_go, g);
        if (open_loop(x0, p, g, target, t_go, k, limits, options, r)) {
            finalize(r, target, options);
            return r;
        }
        r = RolloutResult{};
        r.t_go = t_go;
    }

    const CycleGrid grid = cycle_grid(t_go, options.period);
    const double c = 1.0 / (k.isp * k.g0);
    Vector3d pos = x0.position, vel = x0.velocity;
    double m = x0.mass;
    Vector3d abar_prev = a0 + g;
    double t = 0.0;
    if (options.record) r.trace.reserve(static_cast<std::size_t>(grid.cycles) + 1);

    for (long i = 0; i < grid.cycles; ++i) {
        const double h = i == grid.cycles - 1 ? grid.last : grid.period;
        const double remaining = t_go - t;
        const PolyCoeffs p = solve_net(abar_prev, target.af + g, target.vf - vel, target.rf - pos - vel * remaining,
                                       remaining);
        bool sat = false;
        // derivative of (r, v, m) at offset s into the cycle
        auto deriv = [&](double s, const Vector3d& vv, double mm, Vector3d& dr, Vector3d& dv, double& dm) {
            const Command cmd = saturate(p.net_acceleration(s) - g, mm, limits);
            sat = sat || cmd.saturated;
            dr = vv;
            dv = g + cmd.thrust_accel;
            dm = -c * mm * cmd.thrust_accel.norm();
        };
        if (options.record) {
            const Command cmd = saturate(p.net_acceleration(0.0) - g, m, limits);
            r.trace.push_back({t, pos, vel, m, m * cmd.thrust_accel});
        }
        Vector3d r1, v1, r2, v2, r3, v3, r4, v4;
        double m1, m2, m3, m4;
        deriv(0.0, vel, m, r1, v1, m1);
        deriv(0.5 * h, vel + 0.5 * h * v1, m + 0.5 * h * m1, r2, v2, m2);
        deriv(0.5 * h, vel + 0.5 * h * v2, m + 0.5 * h * m2, r3, v3, m3);
        deriv(h, vel + h * v3, m + h * m3, r4, v4, m4);
        pos += h / 6.0 * (r1 + 2.0 * r2 + 2.0 * r3 + r4);
        vel += h / 6.0 * (v1 + 2.0 * v2 + 2.0 * v3 + v4);
        m += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
        t += h;
        if (sat) {
            r.saturated = true;
            r.saturated_time += h;
        }
        if (!(m > k.dry_mass) || !pos.allFinite() || !vel.allFinite()) {
            r.diverged = true;
            r.diagnostic = m > k.dry_mass ? "non-finite state" : "mass floor breached";
            break;
        }
        abar_prev = g + saturate(p.net_acceleration(h) - g, m, limits).thrust_accel;
    }
    r.final_position = pos;
    r.final_velocity = vel;
    r.final_mass = m;
    if (options.record && !r.diverged) {
        r.trace.push_back({t, pos, vel, m, m * (abar_prev - g)});
    }
    finalize(r, target, options);
    return r;
}

std::vector<double> TgoRange::grid() const {
    if (!(min > 0.0 && max > min && step > 0.0)) {
        throw std::invalid_argument("t_go range must satisfy 0 < min < max and step > 0");
    }
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((max - min) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(min + static_cast<double>(i) * step);
    return out;
}

TgoSearch grid_search_tgo(const dyn::LocalState& x0, const Vector3d& a0, const TerminalTarget& target,
                          const TgoRange& range, const dyn::MoonConstants& k, const ThrustLimits& limits,
                          const RolloutOptions& options) {
    RolloutOptions opt = options;
    opt.record = false;
    TgoSearch s;
    for (double tg : range.grid()) {
        const RolloutResult r = closed_loop_rollout(x0, a0, target, tg, k, limits, opt);
        if (!r.converged) continue;
        s.feasible.emplace_back(tg, r.final_mass);
        if (!s.controllable || r.final_mass > s.final_mass_star) {
            s.controllable = true;
            s.t_go_star = tg;
            s.final_mass_star = r.final_mass;
        }
    }
    if (s.controllable) s.dm_star = x0.mass - s.final_mass_star;
    return s;
}

GuidanceFeatures features(const dyn::LocalState& x, const TerminalTarget& target) {
    return {target.rf(0) - x.position(0), x.position(1) - target.rf(1), x.velocity(1), x.velocity(0)};
}

dyn::LocalState state_from_features(const GuidanceFeatures& f, const TerminalTarget& target, double mass) {
    dyn::LocalState x;
    x.position = Vector3d(target.rf(0) - f.S, target.rf(1) + f.H, 0.0);
    x.velocity = Vector3d(f.v, f.w, 0.0);
    x.mass = mass;
    return x;
}

std::vector<std::vector<int>> PolynomialModel::monomials(int dims, int degree) {
    std::vector<std::vector<int>> out;
    std::vector<int> e(static_cast<std::size_t>(dims), 0);
    // graded order: total degree 0, 1, ..., each block in lexicographic order
    for (int total = 0; total <= degree; ++total) {
        std::vector<std::vector<int>> block;
        auto rec = [&](auto&& self, int idx, int left) -> void {
            if (idx == dims - 1) {
                e[static_cast<std::size_t>(idx)] = left;
                block.push_back(e);
                return;
            }
            for (int p = left; p >= 0; --p) {
                e[static_cast<std::size_t>(idx)] = p;
                self(self, idx + 1, left - p);
            }
        };
        if (dims > 0) rec(rec, 0, total);
        out.insert(out.end(), block.begin(), block.end());
    }
    return out;
}

Eigen::RowVectorXd PolynomialModel::row(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd z = (x - mean_).cwiseQuotient(scale_);
    Eigen::RowVectorXd r(static_cast<Eigen::Index>(exponents_.size()));
    for (std::size_t t = 0; t < exponents_.size(); ++t) {
        double v = 1.0;
        for (std::size_t d = 0; d < exponents_[t].size(); ++d) {
            for (int p = 0; p < exponents_[t][d]; ++p) v *= z(static_cast<Eigen::Index>(d));
        }
        r(static_cast<Eigen::Index>(t)) = v;
    }
    return r;
}

std::string PolynomialModel::monomial_name(std::size_t term) const {
    const auto& e = exponents_.at(term);
    std::string s;
    for (std::size_t d = 0; d < e.size(); ++d) {
        if (e[d] == 0) continue;
        if (!s.empty()) s += "*";
        s += d < names_.size() ? names_[d] : "x" + std::to_string(d);
        if (e[d] > 1) s += "^" + std::to_string(e[d]);
    }
    return s.empty() ? "1" : s;
}

PolynomialModel PolynomialModel::fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int degree,
                                     std::vector<std::string> names) {
    if (degree < 0) throw std::invalid_argument("polynomial fit: degree must be non-negative");
    if (X.rows() != y.size()) throw std::invalid_argument("polynomial fit: row count mismatch");
    PolynomialModel m;
    m.degree_ = degree;
    m.names_ = std::move(names);
    m.exponents_ = monomials(static_cast<int>(X.cols()), degree);
    const auto terms = static_cast<Eigen::Index>(m.exponents_.size());
    if (X.rows() < terms) {
        throw std::invalid_argument("polynomial fit: need at least " + std::to_string(terms) + " samples, got " +
                                    std::to_string(X.rows()));
    }
    if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("polynomial fit: non-finite data");
    m.mean_ = X.colwise().mean().transpose();
    m.scale_.resize(X.cols());
    for (Eigen::Index d = 0; d < X.cols(); ++d) {
        const double var = (X.col(d).array() - m.mean_(d)).square().sum() / static_cast<double>(X.rows());
        m.scale_(d) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    Eigen::MatrixXd A(X.rows(), terms);
    for (Eigen::Index i = 0; i < X.rows(); ++i) A.row(i) = m.row(X.row(i).transpose());

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < terms) {
        std::vector<std::string> bad;
        for (Eigen::Index k = qr.rank(); k < terms; ++k) {
            bad.push_back(m.monomial_name(static_cast<std::size_t>(qr.colsPermutation().indices()(k))));
        }
        std::string msg = "polynomial fit: rank deficient design matrix; deficient monomials:";
        for (const auto& b : bad) msg += " " + b;
        throw RankDeficientFit(msg, bad);
    }
    m.coeffs_ = qr.solve(y);
    m.rms_ = std::sqrt((A * m.coeffs_ - y).squaredNorm() / static_cast<double>(y.size()));
    return m;
}

PolynomialModel PolynomialModel::from_parameters(int degree, Eigen::VectorXd mean, Eigen::VectorXd scale,
                                                 Eigen::VectorXd coefficients, double rms,
                                                 std::vector<std::string> names) {
    PolynomialModel m;
    m.degree_ = degree;
    m.exponents_ = monomials(static_cast<int>(mean.size()), degree);
    if (coefficients.size() != static_cast<Eigen::Index>(m.exponents_.size()) || scale.size() != mean.size()) {
        throw std::invalid_argument("polynomial model: parameter sizes do not match the degree");
    }
    m.mean_ = std::move(mean);
    m.scale_ = std::move(scale);
    m.coeffs_ = std::move(coefficients);
    m.rms_ = rms;
    m.names_ = std::move(names);
    return m;
}

double PolynomialModel::evaluate(const Eigen::VectorXd& x) const {
    if (x.size() != mean_.size()) throw std::invalid_argument("polynomial model: wrong input dimension");
    return row(x).dot(coeffs_);
}

Eigen::VectorXd PolynomialModel::evaluate_rows(const Eigen::MatrixXd& X) const {
    Eigen::VectorXd out(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) = evaluate(X.row(i).transpose());
    return out;
}

TgoPolicy fit_tgo_policy(const std::vector<TgoSample>& data) {
    if (data.size() < 35) throw std::invalid_argument("fit_tgo_policy: need at least 35 samples");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), 4);
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        X.row(static_cast<Eigen::Index>(i)) = data[i].x.vector().transpose();
        y(static_cast<Eigen::Index>(i)) = data[i].t_go;
    }
    return {PolynomialModel::fit(X, y, 3, {"S", "H", "w", "v"})};
}

std::pair<double, double> thrust_angles(const Vector3d& thrust) {
    const double n = thrust.norm();
    if (n == 0.0) return {0.0, 0.0};
    const Vector3d d = thrust / n;
    const double horizontal = std::hypot(d(0), d(2));
    if (horizontal == 0.0) return {std::atan2(0.0, d(1)), 0.0};
    // pick the branch with cos(beta) >= 0
    const double sgn = d(0) > 0.0 ? -1.0 : 1.0;
    return {std::atan2(sgn * horizontal, d(1)), std::atan2(sgn * d(2), std::abs(d(0)))};
}

std::string trace_csv_header() {
    return "t_s,downrange_m,altitude_m,crossrange_m,v_mps,w_mps,u_mps,mass_kg,thrust_N,alpha_rad,beta_rad";
}

void write_trace_csv(std::ostream& out, const std::vector<RolloutSample>& trace) {
    out << trace_csv_header() << '\n';
    const auto flags = out.flags();
    const auto prec = out.precision();
    out << std::setprecision(12);
    for (const auto& s : trace) {
        const auto [alpha, beta] = thrust_angles(s.thrust);
        out << s.t << ',' << s.position(0) << ',' << s.position(1) << ',' << s.position(2) << ',' << s.velocity(0)
            << ',' << s.velocity(1) << ',' << s.velocity(2) << ',' << s.mass << ',' << s.thrust.norm() << ','
            << alpha << ',' << beta << '\n';
    }
    out.flags(flags);
    out.precision(prec);
}

}  // namespace landing::guidance
