#include "landing/controllability.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace landing::controllability {

namespace {

using Eigen::Vector2d;

Eigen::Matrix<double, 6, 1> conic_features(const Vector2d& z) {
    Eigen::Matrix<double, 6, 1> p;
    p << z(0) * z(0), std::sqrt(2.0) * z(0) * z(1), z(1) * z(1), z(0), z(1), 1.0;
    return p;
}

// Clips the eigenvalues of [[w0, w1/sqrt2], [w1/sqrt2, w2]] to <= -floor.
void clip_curvature(Eigen::Matrix<double, 6, 1>& w, double floor) {
    Eigen::Matrix2d q;
    q << w(0), w(1) / std::sqrt(2.0), w(1) / std::sqrt(2.0), w(2);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(q);
    const Eigen::Vector2d lam = eig.eigenvalues().cwiseMin(-floor);
    if (lam == eig.eigenvalues()) return;
    q = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
    w(0) = q(0, 0);
    w(1) = std::sqrt(2.0) * q(0, 1);
    w(2) = q(1, 1);
}

struct Candidate {
    GuidanceFeatures x;
    double margin = 0.0;
    double dm = 0.0;
};

struct Evaluation {
    bool defined = false;
    double margin = 0.0;
    double dm = 0.0;
    double violation = 0.0;
    bool feasible = false;
    std::vector<std::string> violated;
};

class RefineProblem {
public:
    RefineProblem(const ConicBoundary& b, const DmSurrogate& m, const RefineConfig& c)
        : boundary_(b), surrogate_(m), config_(c) {}

    GuidanceFeatures point(const Eigen::Vector3d& y) const {
        auto lerp = [](const std::array<double, 2>& r, double t) { return r[0] + t * (r[1] - r[0]); };
        return {lerp(config_.S_bounds, y(0)), config_.H, lerp(config_.w_bounds, y(2)), lerp(config_.v_bounds, y(1))};
    }

    Evaluation evaluate(const Eigen::Vector3d& y) const {
        Evaluation e;
        const auto x = point(y);
        try {
            e.margin = margin(boundary_, reduced_coordinates(x), config_.metric);
        } catch (const DegeneratePointError&) {
            return e;
        }
        e.dm = surrogate_(x);
        e.defined = std::isfinite(e.margin) && std::isfinite(e.dm);
        if (!e.defined) return e;
        if (x.v > config_.v_sops) {
            e.violation += (x.v - config_.v_sops) / std::max(1.0, config_.v_sops);
            e.violated.emplace_back("v <= v_sops");
        }
        if (!(e.margin > 0.0)) {
            e.violation += -e.margin / config_.margin_scale + 1e-12;
            e.violated.emplace_back("M > 0");
        }
        if (e.dm > config_.dm_max) {
            e.violation += (e.dm - config_.dm_max) / std::max(1.0, std::abs(config_.dm_max));
            e.violated.emplace_back("dm <= dm_max");
        }
        e.feasible = e.violated.empty();
        return e;
    }

    double objective(double margin, double dm) const {
        return -config_.lambda * margin / config_.margin_scale + (1.0 - config_.lambda) * dm;
    }

    template <class F>
    Eigen::Vector3d compass(Eigen::Vector3d y, F&& f) const {
        double fy = f(y);
        double step = 0.25;
        while (step >= config_.step_tolerance) {
            bool moved = false;
            for (int d = 0; d < 3 && !moved; ++d) {
                for (double sign : {1.0, -1.0}) {
                    Eigen::Vector3d trial = y;
                    trial(d) = std::clamp(trial(d) + sign * step, 0.0, 1.0);
                    if (trial(d) == y(d)) continue;
                    const double ft = f(trial);
                    if (ft < fy) {
                        y = trial;
                        fy = ft;
                        moved = true;
                        break;
                    }
                }
            }
            if (!moved) step *= 0.5;
        }
        return y;
    }

    std::vector<Candidate> search(std::vector<std::string>* violated) const {
        std::vector<Candidate> out;
        const double kInf = std::numeric_limits<double>::infinity();
        auto violation = [&](const Eigen::Vector3d& y) {
            const auto e = evaluate(y);
            return e.defined ? e.violation : kInf;
        };
        auto barrier = [&](const Eigen::Vector3d& y) {
            const auto e = evaluate(y);
            return e.defined && e.feasible ? objective(e.margin, e.dm) : kInf;
        };
        for (double a : {1.0 / 6.0, 0.5, 5.0 / 6.0}) {
            for (double b : {1.0 / 6.0, 0.5, 5.0 / 6.0}) {
                for (double c : {1.0 / 6.0, 0.5, 5.0 / 6.0}) {
                    Eigen::Vector3d y(a, b, c);
                    auto e = evaluate(y);
                    if (!e.feasible) {
                        y = compass(y, violation);
                        e = evaluate(y);
                        if (!e.feasible) {
                            if (violated) violated->insert(violated->end(), e.violated.begin(), e.violated.end());
                            continue;
                        }
                    }
                    y = compass(y, barrier);
                    e = evaluate(y);
                    out.push_back({point(y), e.margin, e.dm});
                }
            }
        }
        return out;
    }

private:
    const ConicBoundary& boundary_;
    const DmSurrogate& surrogate_;
    const RefineConfig& config_;
};

// Best pooled candidate for lambda: lowest objective, then lowest dm, then highest margin.
const Candidate& select(const std::vector<Candidate>& pool, double lambda, double sigma) {
    auto J = [&](const Candidate& c) { return -lambda * c.margin / sigma + (1.0 - lambda) * c.dm; };
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : pool) best = std::min(best, J(c));
    const Candidate* pick = nullptr;
    for (const auto& c : pool) {
        if (J(c) > best + 1e-9) continue;
        if (!pick || c.dm < pick->dm || (c.dm == pick->dm && c.margin > pick->margin)) pick = &c;
    }
    return *pick;
}

RefinedWaypoint to_waypoint(const Candidate& c, const RefineConfig& config) {
    RefinedWaypoint w;
    w.x = c.x;
    w.margin = c.margin;
    w.margin_sigma = c.margin / config.margin_scale;
    w.dm = c.dm;
    w.objective = -config.lambda * w.margin_sigma + (1.0 - config.lambda) * c.dm;
    return w;
}

std::vector<Candidate> search_or_throw(const ConicBoundary& boundary, const DmSurrogate& surrogate,
                                       const RefineConfig& config) {
    config.validate();
    std::vector<std::string> violated;
    auto pool = RefineProblem(boundary, surrogate, config).search(&violated);
    if (pool.empty()) {
        std::sort(violated.begin(), violated.end());
        violated.erase(std::unique(violated.begin(), violated.end()), violated.end());
        std::string msg = "refine_waypoint: no feasible point; violated:";
        for (const auto& v : violated) msg += " [" + v + "]";
        throw InfeasibleRefinement(msg, violated);
    }
    return pool;
}

}  // namespace

Eigen::Matrix4d DispersionModel::default_covariance() {
    return Eigen::Vector4d(500.0 * 500.0, 500.0 * 500.0, 10.0 * 10.0, 10.0 * 10.0).asDiagonal();
}

void DispersionModel::validate() const {
    if (count < 1) throw std::invalid_argument("dispersion sample count must be >= 1");
    if (!covariance.allFinite() || !mean.vector().allFinite()) {
        throw std::invalid_argument("dispersion model must be finite");
    }
}

std::vector<GuidanceFeatures> sample_dispersions(const DispersionModel& model) {
    model.validate();
    const Eigen::Matrix4d& cov = model.covariance;
    const double size = std::max(1.0, cov.cwiseAbs().maxCoeff());
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12 * size) {
        throw std::invalid_argument("covariance must be symmetric");
    }
    Eigen::Matrix4d L;
    Eigen::LLT<Eigen::Matrix4d> llt(cov);
    if (llt.info() == Eigen::Success) {
        L = llt.matrixL();
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(cov);
        const Eigen::Vector4d lam = es.eigenvalues();
        if (lam.minCoeff() < -1e-10 * size) {
            std::ostringstream os;
            os << "covariance is not positive semidefinite (eigenvalue " << lam.minCoeff() << ")";
            throw std::invalid_argument(os.str());
        }
        L = es.eigenvectors() * lam.cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    std::mt19937_64 rng(model.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<GuidanceFeatures> out;
    out.reserve(static_cast<std::size_t>(model.count));
    const Eigen::Vector4d mean = model.mean.vector();
    for (int i = 0; i < model.count; ++i) {
        Eigen::Vector4d z;
        for (int j = 0; j < 4; ++j) z(j) = normal(rng);
        const Eigen::Vector4d x = mean + L * z;
        out.push_back({x(0), x(1), x(2), x(3)});
    }
    return out;
}

dyn::LocalState RolloutSetup::state(const GuidanceFeatures& x) const {
    return guidance::state_from_features(x, target, mass);
}

Eigen::Vector2d reduced_coordinates(const GuidanceFeatures& x) { return {x.S / x.v, x.H / x.w}; }

bool reducible(const GuidanceFeatures& x) {
    return std::abs(x.v) >= kMinReducedSpeed && std::abs(x.w) >= kMinReducedSpeed;
}

int ClassificationDataset::excluded() const {
    return static_cast<int>(std::count_if(samples.begin(), samples.end(), [](const auto& s) { return !s.usable; }));
}

int ClassificationDataset::controllable() const {
    return static_cast<int>(std::count_if(samples.begin(), samples.end(), [](const auto& s) { return s.label > 0; }));
}

Datasets build_datasets(const std::vector<GuidanceFeatures>& samples, const RolloutSetup& setup, int threads) {
    Datasets out;
    const std::size_t n = samples.size();
    out.rollouts.resize(n);
    auto work = [&](std::size_t first, std::size_t stride) {
        for (std::size_t i = first; i < n; i += stride) {
            out.rollouts[i] = guidance::grid_search_tgo(setup.state(samples[i]), setup.a0, setup.target, setup.range,
                                                        setup.moon, setup.limits, setup.options);
        }
    };
    std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::thread::hardware_concurrency();
    workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(1, n));
    if (workers == 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w, workers);
        for (auto& t : pool) t.join();
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = out.rollouts[i];
        LabeledSample ls;
        ls.x = samples[i];
        ls.label = r.controllable ? 1 : -1;
        ls.usable = reducible(samples[i]);
        if (ls.usable) ls.s = reduced_coordinates(samples[i]);
        out.classification.samples.push_back(ls);
        if (r.controllable) out.guidance.push_back({samples[i], r.t_go_star, r.dm_star, r.final_mass_star});
    }
    return out;
}

bool is_controllable(const GuidanceFeatures& x, const RolloutSetup& setup) {
    const auto x0 = setup.state(x);
    for (double t_go : setup.range.grid()) {
        if (guidance::closed_loop_rollout(x0, setup.a0, setup.target, t_go, setup.moon, setup.limits, setup.options)
                .converged) {
            return true;
        }
    }
    return false;
}

double ConicBoundary::value(const Eigen::Vector2d& s) const {
    const auto& k = coefficients;
    return orientation * (k[0] * s(0) * s(0) + k[1] * s(0) * s(1) + k[2] * s(1) * s(1) + k[3] * s(0) + k[4] * s(1) + k[5]);
}

Eigen::Vector2d ConicBoundary::gradient(const Eigen::Vector2d& s) const {
    const auto& k = coefficients;
    return orientation * Eigen::Vector2d(2.0 * k[0] * s(0) + k[1] * s(1) + k[3], k[1] * s(0) + 2.0 * k[2] * s(1) + k[4]);
}

double ConicBoundary::discriminant() const {
    const auto& k = coefficients;
    return k[1] * k[1] - 4.0 * k[0] * k[2];
}

ConicBoundary fit_conic_boundary(const std::vector<Eigen::Vector2d>& s, const std::vector<int>& labels,
                                 const SvmOptions& options) {
    const std::size_t n = s.size();
    if (labels.size() != n) throw std::invalid_argument("fit_conic_boundary: size mismatch");
    if (n < 6) throw std::invalid_argument("fit_conic_boundary: need at least 6 samples");
    if (!(options.C > 0.0) || options.iterations < 2 || !(options.curvature_floor >= 0.0)) throw std::invalid_argument("fit_conic_boundary: bad options");
    int positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 1 && labels[i] != -1) throw std::invalid_argument("fit_conic_boundary: labels must be +-1");
        if (!s[i].allFinite()) throw std::invalid_argument("fit_conic_boundary: non-finite reduced coordinates");
        positives += labels[i] == 1;
    }
    if (positives == 0 || positives == static_cast<int>(n)) {
        throw std::invalid_argument("fit_conic_boundary: both labels must be present");
    }

    Vector2d mean = Vector2d::Zero();
    for (const auto& p : s) mean += p;
    mean /= static_cast<double>(n);
    Vector2d sd = Vector2d::Zero();
    for (const auto& p : s) sd += (p - mean).cwiseAbs2();
    sd = (sd / static_cast<double>(n)).cwiseSqrt();
    for (int j = 0; j < 2; ++j)
        if (sd(j) == 0.0) sd(j) = 1.0;

    std::vector<Eigen::Matrix<double, 6, 1>> phi(n);
    for (std::size_t i = 0; i < n; ++i) phi[i] = conic_features((s[i] - mean).cwiseQuotient(sd));

    // min lambda/2 |w|^2 + mean hinge, lambda = 1 / (C n)
    const double lambda = 1.0 / (options.C * static_cast<double>(n));
    const double radius = 1.0 / std::sqrt(lambda);
    std::mt19937_64 rng(options.seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    Eigen::Matrix<double, 6, 1> w = Eigen::Matrix<double, 6, 1>::Zero();
    Eigen::Matrix<double, 6, 1> avg = Eigen::Matrix<double, 6, 1>::Zero();
    const int half = options.iterations / 2;
    for (int t = 1; t <= options.iterations; ++t) {
        const std::size_t i = pick(rng);
        const double y = labels[i];
        const bool active = y * w.dot(phi[i]) < 1.0;
        w *= 1.0 - 1.0 / t;
        if (active) w += y / (lambda * t) * phi[i];
        const double norm = w.norm();
        if (norm > radius) w *= radius / norm;
        if (options.convex) clip_curvature(w, options.curvature_floor);
        if (t > half) avg += w;
    }
    avg /= static_cast<double>(options.iterations - half);

    // back to raw s: z = (s - mean) / sd
    const double A = avg(0), B = std::sqrt(2.0) * avg(1), C = avg(2), D = avg(3), E = avg(4), F = avg(5);
    const double m1 = mean(0), m2 = mean(1), d1 = sd(0), d2 = sd(1);
    Eigen::Matrix<double, 6, 1> k;
    k(0) = A / (d1 * d1);
    k(1) = B / (d1 * d2);
    k(2) = C / (d2 * d2);
    k(3) = -2.0 * A * m1 / (d1 * d1) - B * m2 / (d1 * d2) + D / d1;
    k(4) = -2.0 * C * m2 / (d2 * d2) - B * m1 / (d1 * d2) + E / d2;
    k(5) = A * m1 * m1 / (d1 * d1) + B * m1 * m2 / (d1 * d2) + C * m2 * m2 / (d2 * d2) - D * m1 / d1 - E * m2 / d2 + F;
    const double kn = k.norm();
    if (!(kn > 0.0) || !std::isfinite(kn)) throw ConvexityError("fit_conic_boundary: degenerate classifier", {});
    k /= kn;

    ConicBoundary out;
    for (int j = 0; j < 6; ++j) out.coefficients[static_cast<std::size_t>(j)] = k(j);
    out.orientation = 1;

    std::ostringstream os;
    os.precision(6);
    const double disc = out.discriminant();
    if (!(disc < 0.0)) {
        os << "fit_conic_boundary: b^2 - 4ac = " << disc << " >= 0, zero set is not an ellipse";
        throw ConvexityError(os.str(), out.coefficients);
    }
    if (out.coefficients[0] > 0.0) {
        os << "fit_conic_boundary: controllable side is the exterior of the ellipse (a = " << out.coefficients[0]
           << ")";
        throw ConvexityError(os.str(), out.coefficients);
    }
    int inside = 0;
    for (std::size_t i = 0; i < n; ++i) inside += labels[i] == 1 && out.value(s[i]) > 0.0;
    if (2 * inside <= positives) {
        os << "fit_conic_boundary: only " << inside << " of " << positives << " controllable samples have M > 0";
        throw ConvexityError(os.str(), out.coefficients);
    }
    return out;
}

ConicBoundary fit_conic_boundary(const ClassificationDataset& data, const SvmOptions& options) {
    std::vector<Vector2d> s;
    std::vector<int> labels;
    for (const auto& x : data.samples) {
        if (!x.usable) continue;
        s.push_back(x.s);
        labels.push_back(x.label);
    }
    return fit_conic_boundary(s, labels, options);
}

double robustness_margin(const ConicBoundary& boundary, const Eigen::Vector2d& s) {
    const Vector2d g = boundary.gradient(s);
    const double gn = g.norm();
    double size = 0.0;
    for (double c : boundary.coefficients) size += std::abs(c);
    if (!(gn > 1e-14 * size * (1.0 + s.norm()))) {
        throw DegeneratePointError("robustness_margin: boundary gradient vanishes at the point");
    }
    return boundary.value(s) / gn;
}

double boundary_distance(const ConicBoundary& boundary, const Eigen::Vector2d& s) {
    const auto& k = boundary.coefficients;
    const double o = boundary.orientation;
    Eigen::Matrix2d q;
    q << o * k[0], 0.5 * o * k[1], 0.5 * o * k[1], o * k[2];
    const Vector2d g(o * k[3], o * k[4]);
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(q);
    const Vector2d lam = eig.eigenvalues();
    if (!(lam(0) * lam(1) > 0.0)) throw std::invalid_argument("boundary_distance: zero set is not an ellipse");
    // sign so that the quadratic part is negative definite: value = h - (s - c)' P (s - c)
    const double flip = lam(1) < 0.0 ? 1.0 : -1.0;
    const Vector2d c = -0.5 * q.ldlt().solve(g);
    const double h = flip * boundary.value(c);
    if (!(h > 0.0)) throw std::invalid_argument("boundary_distance: ellipse has no real points");
    // axes of P = -flip q, largest semi-axis first
    Vector2d mu = -flip * lam;
    Eigen::Matrix2d V = eig.eigenvectors();
    if (mu(0) > mu(1)) {
        std::swap(mu(0), mu(1));
        V.col(0).swap(V.col(1));
    }
    const double e0 = std::sqrt(h / mu(0)), e1 = std::sqrt(h / mu(1));
    const Vector2d y = (V.transpose() * (s - c)).cwiseAbs();

    double d = 0.0;
    if (y(1) > 0.0) {
        if (y(0) > 0.0) {
            const double z0 = y(0) / e0, z1 = y(1) / e1;
            double gz = z0 * z0 + z1 * z1 - 1.0;
            if (gz != 0.0) {
                const double r0 = (e0 / e1) * (e0 / e1);
                const double n0 = r0 * z0;
                double s0 = z1 - 1.0, s1 = gz < 0.0 ? 0.0 : std::hypot(n0, z1) - 1.0, t = 0.0;
                for (int i = 0; i < 2000; ++i) {
                    t = 0.5 * (s0 + s1);
                    if (t == s0 || t == s1) break;
                    const double a = n0 / (t + r0), b = z1 / (t + 1.0);
                    gz = a * a + b * b - 1.0;
                    if (gz > 0.0) {
                        s0 = t;
                    } else if (gz < 0.0) {
                        s1 = t;
                    } else {
                        break;
                    }
                }
                d = std::hypot(r0 * y(0) / (t + r0) - y(0), y(1) / (t + 1.0) - y(1));
            }
        } else {
            d = std::abs(y(1) - e1);
        }
    } else {
        const double num = e0 * y(0), den = e0 * e0 - e1 * e1;
        if (num < den) {
            const double x = num / den;
            d = std::hypot(e0 * x - y(0), e1 * std::sqrt(1.0 - x * x));
        } else {
            d = std::abs(y(0) - e0);
        }
    }
    return boundary.value(s) >= 0.0 ? d : -d;
}

double margin(const ConicBoundary& boundary, const Eigen::Vector2d& s, MarginMetric metric) {
    return metric == MarginMetric::distance ? boundary_distance(boundary, s) : robustness_margin(boundary, s);
}

double margin_sigma(const ConicBoundary& boundary, const ClassificationDataset& data, MarginMetric metric) {
    std::vector<double> m;
    for (const auto& x : data.samples) {
        if (x.usable && x.label > 0) m.push_back(margin(boundary, x.s, metric));
    }
    if (m.size() < 2) throw std::invalid_argument("margin_sigma: need at least two controllable samples");
    double mean = 0.0;
    for (double v : m) mean += v;
    mean /= static_cast<double>(m.size());
    double ss = 0.0;
    for (double v : m) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(m.size() - 1));
}

DmSurrogate fit_dm_surrogate(const std::vector<GuidanceRow>& data) {
    if (data.size() < 15) throw std::invalid_argument("fit_dm_surrogate: need at least 15 rows");
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), 4);
    Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
    for (std::size_t i = 0; i < data.size(); ++i) {
        X.row(static_cast<Eigen::Index>(i)) = data[i].x.vector().transpose();
        y(static_cast<Eigen::Index>(i)) = data[i].dm_star;
    }
    return {guidance::PolynomialModel::fit(X, y, 2, {"S", "H", "w", "v"})};
}

void RefineConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");
    if (!(S_bounds[0] <= S_bounds[1])) throw std::invalid_argument("S bounds are reversed");
    if (!(v_bounds[0] > 0.0 && v_bounds[0] <= v_bounds[1])) {
        throw std::invalid_argument("v bounds must be positive and ordered");
    }
    const bool w_neg = w_bounds[1] < 0.0 && w_bounds[0] <= w_bounds[1];
    const bool w_pos = w_bounds[0] > 0.0 && w_bounds[0] <= w_bounds[1];
    if (!(w_neg || w_pos)) throw std::invalid_argument("w bounds must be ordered and exclude zero");
    if (!(margin_scale > 0.0)) throw std::invalid_argument("margin_scale must be positive");
    if (!(step_tolerance > 0.0 && step_tolerance < 0.25)) throw std::invalid_argument("step_tolerance out of range");
    if (!std::isfinite(H)) throw std::invalid_argument("H must be finite");
}

RefinedWaypoint refine_waypoint(const ConicBoundary& boundary, const DmSurrogate& surrogate,
                                const RefineConfig& config) {
    const auto pool = search_or_throw(boundary, surrogate, config);
    return to_waypoint(select(pool, config.lambda, config.margin_scale), config);
}

std::vector<double> lambda_grid(int points) {
    if (points < 2) throw std::invalid_argument("lambda grid needs at least two points");
    std::vector<double> out;
    for (int i = 0; i < points; ++i) out.push_back(static_cast<double>(i) / (points - 1));
    return out;
}

TradeoffCurve trace_tradeoff(const ConicBoundary& boundary, const DmSurrogate& surrogate,
                             const std::vector<double>& lambdas, double sigma, const RefineConfig& base) {
    for (double l : lambdas)
        if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("trace_tradeoff: lambda outside [0, 1]");
    std::vector<double> sorted = lambdas;
    std::sort(sorted.begin(), sorted.end());

    RefineConfig cfg = base;
    cfg.margin_scale = sigma;
    std::vector<Candidate> pool;
    for (double l : sorted) {
        cfg.lambda = l;
        try {
            const auto found = search_or_throw(boundary, surrogate, cfg);
            pool.insert(pool.end(), found.begin(), found.end());
        } catch (const InfeasibleRefinement&) {
        }
    }

    TradeoffCurve curve;
    for (double l : sorted) {
        TradeoffEntry e;
        e.lambda = l;
        if (!pool.empty()) {
            const auto& c = select(pool, l, sigma);
            e.x = c.x;
            e.margin_sigma = c.margin / sigma;
            e.dm = c.dm;
            e.feasible = true;
        }
        curve.entries.push_back(e);
    }
    return curve;
}

RefinedWaypoint waypoint_at_margin(const ConicBoundary& boundary, const DmSurrogate& surrogate, double target_sigma,
                                   double sigma, const RefineConfig& base, int bisections) {
    RefineConfig cfg = base;
    cfg.margin_scale = sigma;
    auto at = [&](double l) {
        cfg.lambda = l;
        return refine_waypoint(boundary, surrogate, cfg);
    };
    auto lo = at(0.0);
    if (lo.margin_sigma >= target_sigma) return lo;
    auto hi = at(1.0);
    if (hi.margin_sigma < target_sigma) return hi;
    double a = 0.0, b = 1.0;
    for (int i = 0; i < bisections; ++i) {
        const double mid = 0.5 * (a + b);
        auto w = at(mid);
        if (w.margin_sigma >= target_sigma) {
            b = mid;
            hi = w;
        } else {
            a = mid;
        }
    }
    return hi;
}

dyn::SphericalState fine_braking_state(const GuidanceFeatures& x, const RolloutSetup& setup,
                                       const mission::MissionConfig& config) {
    dyn::SphericalState ref;
    ref.r = config.moon.radius;
    ref.theta = dyn::deg2rad(config.site_longitude_deg);
    ref.phi = config.site_track_latitude();
    return dyn::local_to_spherical(setup.state(x), ref, config.moon);
}

RoughBrakingSearch rough_braking_line_search(const dyn::SphericalState& fine_braking_start, double hold_thrust,
                                             const mission::MissionConfig& config, double downrange_min,
                                             double downrange_max, double step, const sqp::SolverOptions& options) {
    if (!(downrange_min > 0.0 && downrange_min <= downrange_max)) {
        throw std::invalid_argument("rough_braking_line_search: need 0 < min <= max");
    }
    if (downrange_max > downrange_min && !(step > 0.0)) {
        throw std::invalid_argument("rough_braking_line_search: step must be positive");
    }
    RoughBrakingSearch out;
    out.fine_braking_start = fine_braking_start;
    out.rough_braking_end = dyn::invert_attitude_hold(fine_braking_start, hold_thrust, config.moon,
                                                      config.attitude_hold);

    const int count = downrange_max > downrange_min
                          ? static_cast<int>(std::floor((downrange_max - downrange_min) / step + 1e-9)) + 1
                          : 1;
    std::vector<mission::RoughBrakingSolve> solves;
    for (int i = 0; i < count; ++i) {
        const double d = downrange_min + i * step;
        solves.push_back(mission::solve_rough_braking(config, out.rough_braking_end, hold_thrust, d, options));
        out.candidates.push_back({d, solves.back().converged, solves.back().propellant});
    }

    double first = 0.0, last = 0.0;
    bool any = false;
    for (const auto& c : out.candidates) {
        if (!c.feasible) continue;
        if (!any) first = c.downrange;
        last = c.downrange;
        any = true;
    }
    if (!any) throw std::runtime_error("rough_braking_line_search: no feasible downrange candidate");
    const double middle = 0.5 * (first + last);
    std::size_t best = 0;
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < out.candidates.size(); ++i) {
        if (!out.candidates[i].feasible) continue;
        const double g = std::abs(out.candidates[i].downrange - middle);
        if (g < gap) {
            gap = g;
            best = i;
        }
    }
    out.selected_downrange = out.candidates[best].downrange;
    out.selected = std::move(solves[best]);
    return out;
}

}  // namespace landing::controllability
