#ifndef LANDING_LGR_BASIS_HPP
#define LANDING_LGR_BASIS_HPP

#include <Eigen/Dense>

namespace landing::lgr {

/**
 * Legendre-Gauss-Radau grid on [-1, 1] for one phase.
 *
 * `nodes` holds the n collocation points (roots of P_{n-1} + P_n, first node
 * exactly -1) followed by the non-collocated endpoint +1. `diff_matrix` is
 * n x (n+1): row k is the derivative of every Lagrange basis polynomial
 * (built on all n+1 nodes) evaluated at collocation node k.
 */
struct LGRGrid {
    int n = 0;
    Eigen::VectorXd nodes;        // n + 1
    Eigen::VectorXd weights;      // n
    Eigen::MatrixXd diff_matrix;  // n x (n + 1)

    static LGRGrid build(int n);

    /// Collocation nodes only (first n entries of `nodes`).
    Eigen::VectorXd collocation_nodes() const { return nodes.head(n); }
};

/// Legendre polynomial P_k(x) and its derivative, by three-term recurrence.
struct LegendreValue {
    double p;
    double dp;
};
LegendreValue legendre(int k, double x);

Eigen::VectorXd compute_lgr_nodes(int n);
Eigen::VectorXd compute_quadrature_weights(const Eigen::VectorXd& nodes);
Eigen::MatrixXd compute_differentiation_matrix(const Eigen::VectorXd& nodes);

/// Barycentric weights 1 / prod_{j != i} (x_i - x_j).
Eigen::VectorXd barycentric_weights(const Eigen::VectorXd& points);

/// Lagrange interpolant through (points, values) evaluated at x (any real x).
double barycentric_interpolate(const Eigen::VectorXd& points, const Eigen::VectorXd& bary,
                               const Eigen::VectorXd& values, double x);

/// Row vector r with r.dot(values) equal to the interpolant at x.
Eigen::RowVectorXd interpolation_row(const Eigen::VectorXd& points,
                                     const Eigen::VectorXd& bary, double x);

/// Interpolates state samples at the n+1 grid nodes. Throws std::out_of_range
/// when tau lies outside [-1, 1].
double interpolate(const LGRGrid& grid, const Eigen::VectorXd& values, double tau);

/// t = (tf - t0)/2 * tau + (tf + t0)/2.
double time_map(double t0, double tf, double tau);

}  // namespace landing::lgr

#endif  // LANDING_LGR_BASIS_HPP
