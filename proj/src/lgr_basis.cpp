#include "landing/lgr_basis.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace landing::lgr {

LegendreValue legendre(int k, double x) {
    if (k == 0) return {1.0, 0.0};
    double p_prev = 1.0;
    double p = x;
    double dp_prev = 0.0;
    double dp = 1.0;
    for (int j = 2; j <= k; ++j) {
        const double p_next = ((2.0 * j - 1.0) * x * p - (j - 1.0) * p_prev) / j;
        const double dp_next = dp_prev + (2.0 * j - 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    return {p, dp};
}

namespace {

// Interior Radau nodes are the zeros of the Jacobi polynomial P^{(0,1)}_{n-1}:
// eigenvalues of its symmetric tridiagonal recurrence matrix.
Eigen::VectorXd radau_interior_by_eigenvalues(int n) {
    const int m = n - 1;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) {
        jac(k, k) = 1.0 / ((2.0 * k + 1.0) * (2.0 * k + 3.0));
        if (k + 1 < m) {
            const double kk = k + 1.0;
            const double b = std::sqrt(kk * (kk + 1.0)) / (2.0 * kk + 1.0);
            jac(k, k + 1) = b;
            jac(k + 1, k) = b;
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    return es.eigenvalues();  // ascending
}

bool newton_radau(int n, Eigen::VectorXd& out) {
    out.resize(n);
    out(0) = -1.0;
    for (int j = 1; j < n; ++j) {
        double x = -std::cos(2.0 * std::numbers::pi * j / (2.0 * n - 1.0));
        bool converged = false;
        for (int it = 0; it < 100; ++it) {
            const auto a = legendre(n - 1, x);
            const auto b = legendre(n, x);
            const double f = a.p + b.p;
            const double df = a.dp + b.dp;
            if (df == 0.0 || !std::isfinite(df)) return false;
            const double dx = f / df;
            x -= dx;
            if (std::abs(dx) < 1e-15) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            // Newton may stall at the last ulp; accept if the residual is tiny.
            const double f = legendre(n - 1, x).p + legendre(n, x).p;
            if (!(std::abs(f) < 1e-13)) return false;
        }
        out(j) = x;
    }
    for (int j = 1; j < n; ++j) {
        if (!(out(j) > out(j - 1)) || out(j) >= 1.0) return false;
    }
    return true;
}

}  // namespace

Eigen::VectorXd compute_lgr_nodes(int n) {
    if (n < 1) throw std::invalid_argument("compute_lgr_nodes: n must be >= 1, got " + std::to_string(n));
    Eigen::VectorXd nodes(n + 1);
    nodes(0) = -1.0;
    nodes(n) = 1.0;
    if (n == 1) return nodes;

    Eigen::VectorXd roots;
    if (newton_radau(n, roots)) {
        nodes.head(n) = roots;
    } else {
        nodes.segment(1, n - 1) = radau_interior_by_eigenvalues(n);
        // polish the eigenvalue estimates
        for (int j = 1; j < n; ++j) {
            double x = nodes(j);
            for (int it = 0; it < 5; ++it) {
                const auto a = legendre(n - 1, x);
                const auto b = legendre(n, x);
                x -= (a.p + b.p) / (a.dp + b.dp);
            }
            nodes(j) = x;
        }
    }
    return nodes;
}

Eigen::VectorXd compute_quadrature_weights(const Eigen::VectorXd& nodes) {
    const int n = static_cast<int>(nodes.size()) - 1;
    if (n < 1) throw std::invalid_argument("compute_quadrature_weights: need at least two nodes");
    Eigen::VectorXd w(n);
    const double n2 = static_cast<double>(n) * n;
    w(0) = 2.0 / n2;
    for (int j = 1; j < n; ++j) {
        const double p = legendre(n - 1, nodes(j)).p;
        w(j) = (1.0 - nodes(j)) / (n2 * p * p);
    }
    return w;
}

Eigen::VectorXd barycentric_weights(const Eigen::VectorXd& points) {
    const Eigen::Index m = points.size();
    Eigen::VectorXd bary = Eigen::VectorXd::Ones(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            if (i == j) continue;
            const double diff = points(i) - points(j);
            if (diff == 0.0) throw std::invalid_argument("barycentric_weights: duplicate nodes");
            bary(i) /= diff;
        }
    }
    return bary;
}

Eigen::MatrixXd compute_differentiation_matrix(const Eigen::VectorXd& nodes) {
    const int m = static_cast<int>(nodes.size());
    if (m < 2) throw std::invalid_argument("compute_differentiation_matrix: need at least two nodes");
    const Eigen::VectorXd bary = barycentric_weights(nodes);
    const int n = m - 1;
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, m);
    for (int k = 0; k < n; ++k) {
        double diag = 0.0;
        for (int i = 0; i < m; ++i) {
            if (i == k) continue;
            d(k, i) = (bary(i) / bary(k)) / (nodes(k) - nodes(i));
            diag -= d(k, i);
        }
        d(k, k) = diag;
    }
    return d;
}

Eigen::RowVectorXd interpolation_row(const Eigen::VectorXd& points, const Eigen::VectorXd& bary,
                                     double x) {
    const Eigen::Index m = points.size();
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        if (x == points(i)) {
            row(i) = 1.0;
            return row;
        }
    }
    double denom = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        row(i) = bary(i) / (x - points(i));
        denom += row(i);
    }
    return row / denom;
}

double barycentric_interpolate(const Eigen::VectorXd& points, const Eigen::VectorXd& bary,
                               const Eigen::VectorXd& values, double x) {
    return interpolation_row(points, bary, x).dot(values);
}

double interpolate(const LGRGrid& grid, const Eigen::VectorXd& values, double tau) {
    if (values.size() != grid.n + 1) {
        throw std::invalid_argument("interpolate: expected " + std::to_string(grid.n + 1) + " values");
    }
    if (!(tau >= -1.0 && tau <= 1.0)) {
        throw std::out_of_range("interpolate: tau outside [-1, 1]");
    }
    return barycentric_interpolate(grid.nodes, barycentric_weights(grid.nodes), values, tau);
}

double time_map(double t0, double tf, double tau) {
    if (!(tf > t0)) throw std::invalid_argument("time_map: requires tf > t0");
    return 0.5 * (tf - t0) * tau + 0.5 * (tf + t0);
}

LGRGrid LGRGrid::build(int n) {
    LGRGrid g;
    g.n = n;
    g.nodes = compute_lgr_nodes(n);
    g.weights = compute_quadrature_weights(g.nodes);
    g.diff_matrix = compute_differentiation_matrix(g.nodes);
    return g;
}

}  // namespace landing::lgr
