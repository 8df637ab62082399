#include "landing/qp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace landing::sqp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Apply the plane rotation [c s; -s c] to the column pair (a, b) of a matrix.
void rotate_columns(Eigen::MatrixXd& m, Eigen::Index a, Eigen::Index b, double c, double s) {
    double* pa = m.col(a).data();
    double* pb = m.col(b).data();
    const Eigen::Index rows = m.rows();
    for (Eigen::Index i = 0; i < rows; ++i) {
        const double x = pa[i];
        const double y = pb[i];
        pa[i] = c * x + s * y;
        pb[i] = -s * x + c * y;
    }
}

/*
 * Goldfarb-Idnani dual method on constraints written as n'x >= b.
 *
 * Inequality ids: [0, mi) general rows (-C_k p >= -d_k), [mi, mi+n) lower
 * bounds, [mi+n, mi+2n) upper bounds. Equalities are added up front in one
 * block factorization and never dropped.
 */
class DualActiveSet {
public:
    DualActiveSet(const QpProblem& qp, const QpOptions& opt)
        : qp_(qp), opt_(opt), n_(static_cast<int>(qp.gradient.size())),
          mi_(static_cast<int>(qp.ineq_rhs.size())) {}

    QpSolution run() {
        QpSolution out;
        out.step = Eigen::VectorXd::Zero(n_);
        out.eq_multipliers = Eigen::VectorXd::Zero(qp_.eq_rhs.size());
        out.ineq_multipliers = Eigen::VectorXd::Zero(mi_);
        out.bound_multipliers = Eigen::VectorXd::Zero(n_);

        for (int i = 0; i < n_; ++i) {
            if (qp_.lower(i) > qp_.upper(i)) {
                out.status = QpStatus::infeasible;
                return out;
            }
        }

        Eigen::LLT<Eigen::MatrixXd> llt(qp_.hessian);
        if (llt.info() != Eigen::Success) {
            out.status = QpStatus::numerical_failure;
            return out;
        }
        // J = L^{-T}
        J_ = Eigen::MatrixXd::Identity(n_, n_);
        llt.matrixU().solveInPlace(J_);
        R_ = Eigen::MatrixXd::Zero(n_, n_);
        x_ = -(J_ * (J_.transpose() * qp_.gradient));

        if (!add_equalities(llt)) {
            out.status = QpStatus::infeasible;
            return out;
        }

        is_active_.assign(static_cast<std::size_t>(mi_ + 2 * n_), 0);
        const int max_iter = opt_.max_iterations > 0 ? opt_.max_iterations
                                                     : 10 * (n_ + mi_ + static_cast<int>(qp_.eq_rhs.size())) + 100;
        int iter = 0;
        Eigen::VectorXd d(n_);
        Eigen::VectorXd z(n_);
        Eigen::VectorXd r;

        for (;;) {
            const int p = most_violated();
            if (p < 0) break;
            double up = 0.0;
            double sp = slack(p);
            for (;;) {
                if (++iter > max_iter) {
                    out.status = QpStatus::numerical_failure;
                    out.iterations = iter;
                    return out;
                }
                normal_times_j(p, d);
                z.noalias() = J_.rightCols(n_ - q_) * d.tail(n_ - q_);
                r = R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));

                double t1 = kInf;
                int l = -1;
                for (int k = me_; k < q_; ++k) {
                    if (r(k) > 1e-14 * std::max(1.0, std::abs(u_(k)))) {
                        const double ratio = u_(k) / r(k);
                        if (ratio < t1) {
                            t1 = ratio;
                            l = k;
                        }
                    }
                }
                const double zn = normal_dot(p, z);
                const double t2 = zn > 1e-14 * std::max(1.0, d.squaredNorm()) ? -sp / zn : kInf;

                if (t1 == kInf && t2 == kInf) {
                    out.status = QpStatus::infeasible;
                    out.iterations = iter;
                    return out;
                }
                if (t2 == kInf) {
                    u_.head(q_) -= t1 * r;
                    up += t1;
                    delete_constraint(l);
                    continue;
                }
                const double t = std::min(t1, t2);
                x_ += t * z;
                u_.head(q_) -= t * r;
                up += t;
                if (t2 <= t1) {
                    if (!add_constraint(d)) {
                        out.status = QpStatus::numerical_failure;
                        out.iterations = iter;
                        return out;
                    }
                    active_.push_back(p);
                    is_active_[static_cast<std::size_t>(p)] = 1;
                    u_.conservativeResize(q_);
                    u_(q_ - 1) = up;
                    break;
                }
                delete_constraint(l);
                sp = slack(p);
            }
        }

        // redundant equalities dropped during factorization must still hold
        for (int i : dropped_eq_) {
            const double res = qp_.eq_matrix.row(i).dot(x_) - qp_.eq_rhs(i);
            if (std::abs(res) > 1e-8 * (1.0 + std::abs(qp_.eq_rhs(i)))) {
                out.status = QpStatus::infeasible;
                out.iterations = iter;
                return out;
            }
        }

        out.status = QpStatus::optimal;
        out.iterations = iter;
        out.step = x_;
        for (int k = 0; k < me_; ++k) out.eq_multipliers(eq_ids_[static_cast<std::size_t>(k)]) = -u_(k);
        for (int k = me_; k < q_; ++k) {
            const int id = active_[static_cast<std::size_t>(k - me_)];
            if (id < mi_) {
                out.ineq_multipliers(id) = u_(k);
            } else if (id < mi_ + n_) {
                out.bound_multipliers(id - mi_) -= u_(k);
            } else {
                out.bound_multipliers(id - mi_ - n_) += u_(k);
            }
        }
        return out;
    }

private:
    bool add_equalities(const Eigen::LLT<Eigen::MatrixXd>& llt) {
        const int me = static_cast<int>(qp_.eq_rhs.size());
        if (me == 0) {
            u_.resize(0);
            return true;
        }
        // M = L^{-1} A'
        Eigen::MatrixXd m = qp_.eq_matrix.transpose();
        llt.matrixL().solveInPlace(m);

        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> piv(m);
        piv.setThreshold(1e-10);
        const int rank = static_cast<int>(piv.rank());
        // pivoted QR of M: M P = Q R, the leading `rank` pivots are the kept rows
        std::vector<int> keep;
        keep.reserve(static_cast<std::size_t>(rank));
        for (int k = 0; k < rank; ++k) keep.push_back(piv.colsPermutation().indices()(k));
        std::vector<char> kept(static_cast<std::size_t>(me), 0);
        for (int k : keep) kept[static_cast<std::size_t>(k)] = 1;
        for (int i = 0; i < me; ++i) {
            if (!kept[static_cast<std::size_t>(i)]) dropped_eq_.push_back(i);
        }
        if (rank == 0) {
            u_.resize(0);
            return true;
        }

        Eigen::VectorXd b(rank);
        for (int k = 0; k < rank; ++k) b(k) = qp_.eq_rhs(keep[static_cast<std::size_t>(k)]);
        J_.applyOnTheRight(piv.householderQ());
        R_.topLeftCorner(rank, rank) = piv.matrixR().topLeftCorner(rank, rank).triangularView<Eigen::Upper>();
        q_ = rank;
        me_ = rank;
        eq_ids_ = keep;

        const auto rt = R_.topLeftCorner(rank, rank).triangularView<Eigen::Upper>();
        const Eigen::VectorXd y1 = rt.transpose().solve(b);
        const Eigen::VectorXd j2g = J_.rightCols(n_ - rank).transpose() * qp_.gradient;
        x_ = J_.leftCols(rank) * y1 - J_.rightCols(n_ - rank) * j2g;
        u_ = rt.solve(y1 + J_.leftCols(rank).transpose() * qp_.gradient);
        return true;
    }

    double slack(int id) const {
        if (id < mi_) return qp_.ineq_rhs(id) - qp_.ineq_matrix.row(id).dot(x_);
        if (id < mi_ + n_) return x_(id - mi_) - qp_.lower(id - mi_);
        return qp_.upper(id - mi_ - n_) - x_(id - mi_ - n_);
    }

    double normal_dot(int id, const Eigen::VectorXd& v) const {
        if (id < mi_) return -qp_.ineq_matrix.row(id).dot(v);
        if (id < mi_ + n_) return v(id - mi_);
        return -v(id - mi_ - n_);
    }

    void normal_times_j(int id, Eigen::VectorXd& d) const {
        if (id < mi_) {
            d.noalias() = -(J_.transpose() * qp_.ineq_matrix.row(id).transpose());
        } else if (id < mi_ + n_) {
            d = J_.row(id - mi_).transpose();
        } else {
            d = -J_.row(id - mi_ - n_).transpose();
        }
    }

    int most_violated() const {
        int best_id = -1;
        double best = 0.0;
        if (mi_ > 0) {
            const Eigen::VectorXd cx = qp_.ineq_matrix * x_;
            for (int k = 0; k < mi_; ++k) {
                if (is_active_[static_cast<std::size_t>(k)]) continue;
                const double norm = qp_.ineq_matrix.row(k).norm();
                if (norm == 0.0) continue;
                const double s = (qp_.ineq_rhs(k) - cx(k)) / norm;
                const double tol = opt_.feasibility_tolerance * (1.0 + std::abs(qp_.ineq_rhs(k)) / norm);
                if (s < -tol && s < best) {
                    best = s;
                    best_id = k;
                }
            }
        }
        for (int i = 0; i < n_; ++i) {
            const int lo = mi_ + i;
            const int hi = mi_ + n_ + i;
            if (!is_active_[static_cast<std::size_t>(lo)] && std::isfinite(qp_.lower(i))) {
                const double s = x_(i) - qp_.lower(i);
                if (s < -opt_.feasibility_tolerance * (1.0 + std::abs(qp_.lower(i))) && s < best) {
                    best = s;
                    best_id = lo;
                }
            }
            if (!is_active_[static_cast<std::size_t>(hi)] && std::isfinite(qp_.upper(i))) {
                const double s = qp_.upper(i) - x_(i);
                if (s < -opt_.feasibility_tolerance * (1.0 + std::abs(qp_.upper(i))) && s < best) {
                    best = s;
                    best_id = hi;
                }
            }
        }
        return best_id;
    }

    bool add_constraint(Eigen::VectorXd& d) {
        for (int j = n_ - 1; j > q_; --j) {
            const double a = d(j - 1);
            const double b = d(j);
            if (b == 0.0) continue;
            const double h = std::hypot(a, b);
            const double c = a / h;
            const double s = b / h;
            d(j - 1) = h;
            d(j) = 0.0;
            rotate_columns(J_, j - 1, j, c, s);
        }
        if (std::abs(d(q_)) <= 1e-12 * std::max(1.0, d.head(q_ + 1).norm())) return false;
        R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
        ++q_;
        return true;
    }

    void delete_constraint(int k) {
        const int id = active_[static_cast<std::size_t>(k - me_)];
        is_active_[static_cast<std::size_t>(id)] = 0;
        active_.erase(active_.begin() + (k - me_));
        for (int j = k; j < q_ - 1; ++j) {
            R_.col(j).head(q_) = R_.col(j + 1).head(q_);
            u_(j) = u_(j + 1);
        }
        R_.col(q_ - 1).setZero();
        for (int j = k; j < q_ - 1; ++j) {
            const double a = R_(j, j);
            const double b = R_(j + 1, j);
            if (b == 0.0) continue;
            const double h = std::hypot(a, b);
            const double c = a / h;
            const double s = b / h;
            for (int col = j; col < q_ - 1; ++col) {
                const double x = R_(j, col);
                const double y = R_(j + 1, col);
                R_(j, col) = c * x + s * y;
                R_(j + 1, col) = -s * x + c * y;
            }
            R_(j + 1, j) = 0.0;
            rotate_columns(J_, j, j + 1, c, s);
        }
        --q_;
        u_.conservativeResize(q_);
    }

    const QpProblem& qp_;
    const QpOptions& opt_;
    int n_;
    int mi_;
    Eigen::MatrixXd J_;
    Eigen::MatrixXd R_;
    Eigen::VectorXd x_;
    Eigen::VectorXd u_;
    int q_ = 0;
    int me_ = 0;
    std::vector<int> eq_ids_;
    std::vector<int> dropped_eq_;
    std::vector<int> active_;
    std::vector<char> is_active_;
};

void check_dimensions(const QpProblem& qp) {
    const auto n = qp.gradient.size();
    if (qp.hessian.rows() != n || qp.hessian.cols() != n || qp.lower.size() != n || qp.upper.size() != n ||
        (qp.eq_matrix.size() > 0 && qp.eq_matrix.cols() != n) || qp.eq_matrix.rows() != qp.eq_rhs.size() ||
        (qp.ineq_matrix.size() > 0 && qp.ineq_matrix.cols() != n) ||
        qp.ineq_matrix.rows() != qp.ineq_rhs.size()) {
        throw std::invalid_argument("qp: inconsistent dimensions");
    }
}

}  // namespace

QpSolution solve_qp_active_set(const QpProblem& qp, const QpOptions& options) {
    check_dimensions(qp);
    return DualActiveSet(qp, options).run();
}

QpSolution qp_subproblem(const QpProblem& qp, const QpOptions& options) {
    QpSolution sol = solve_qp_active_set(qp, options);
    if (sol.status != QpStatus::infeasible || !options.allow_restoration) return sol;

    // Elastic program: A p + sp - sm = b, C p - t <= d, slacks >= 0, and the
    // l1 norm of the slacks weighted into the objective.
    const int n = static_cast<int>(qp.gradient.size());
    const int me = static_cast<int>(qp.eq_rhs.size());
    const int mi = static_cast<int>(qp.ineq_rhs.size());
    const int ne = n + 2 * me + mi;
    QpProblem el;
    const double eps = 1e-8 * std::max(1.0, qp.hessian.diagonal().cwiseAbs().maxCoeff());
    el.hessian = Eigen::MatrixXd::Zero(ne, ne);
    el.hessian.topLeftCorner(n, n) = qp.hessian;
    for (int i = n; i < ne; ++i) el.hessian(i, i) = eps;
    el.gradient = Eigen::VectorXd::Constant(ne, options.elastic_weight);
    el.gradient.head(n) = qp.gradient;
    el.eq_matrix = Eigen::MatrixXd::Zero(me, ne);
    el.eq_matrix.leftCols(n) = qp.eq_matrix;
    el.eq_matrix.block(0, n, me, me) = Eigen::MatrixXd::Identity(me, me);
    el.eq_matrix.block(0, n + me, me, me) = -Eigen::MatrixXd::Identity(me, me);
    el.eq_rhs = qp.eq_rhs;
    el.ineq_matrix = Eigen::MatrixXd::Zero(mi, ne);
    el.ineq_matrix.leftCols(n) = qp.ineq_matrix;
    el.ineq_matrix.block(0, n + 2 * me, mi, mi) = -Eigen::MatrixXd::Identity(mi, mi);
    el.ineq_rhs = qp.ineq_rhs;
    el.lower = Eigen::VectorXd::Zero(ne);
    el.upper = Eigen::VectorXd::Constant(ne, kInf);
    el.lower.head(n) = qp.lower;
    el.upper.head(n) = qp.upper;

    QpSolution es = solve_qp_active_set(el, options);
    QpSolution out;
    out.status = es.status;
    out.iterations = sol.iterations + es.iterations;
    out.restoration = true;
    if (es.status != QpStatus::optimal) return out;
    out.step = es.step.head(n);
    out.eq_multipliers = es.eq_multipliers;
    out.ineq_multipliers = es.ineq_multipliers;
    out.bound_multipliers = es.bound_multipliers.head(n);
    return out;
}

}  // namespace landing::sqp
