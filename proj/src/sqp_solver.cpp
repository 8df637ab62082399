#include "landing/sqp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

namespace landing::sqp {

std::string to_string(SolverStatus s) {
    switch (s) {
        case SolverStatus::converged: return "converged";
        case SolverStatus::max_iterations: return "max-iterations";
        case SolverStatus::infeasible: return "infeasible";
        case SolverStatus::numerical_failure: return "numerical-failure";
    }
    return "unknown";
}

Eigen::MatrixXd fd_jacobian(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fn,
                            const Eigen::VectorXd& z, double rel_step) {
    const Eigen::VectorXd f0 = fn(z);
    if (!f0.allFinite()) throw NumericalFailure("fd_jacobian: non-finite value at base point");
    Eigen::MatrixXd jac(f0.size(), z.size());
    Eigen::VectorXd zp = z;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double h = rel_step * (1.0 + std::abs(z(i)));
        zp(i) = z(i) + h;
        const Eigen::VectorXd fp = fn(zp);
        zp(i) = z(i) - h;
        const Eigen::VectorXd fm = fn(zp);
        zp(i) = z(i);
        if (!fp.allFinite() || !fm.allFinite()) {
            throw NumericalFailure("fd_jacobian: non-finite value perturbing variable " + std::to_string(i));
        }
        jac.col(i) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool all_finite(const NlpValues& v) {
    return std::isfinite(v.objective) && v.eq.allFinite() && v.ineq.allFinite();
}

struct Linearization {
    NlpValues values;
    Eigen::VectorXd grad;
    Eigen::MatrixXd jac_eq;
    Eigen::MatrixXd jac_ineq;
};

struct Stationarity {
    bool valid = false;
    double kkt = 0.0;
    double complementarity = 0.0;
    Eigen::VectorXd eq_multipliers, ineq_multipliers, bound_multipliers;
};

// Least-squares multipliers at z on the working set of the QP solution.
Stationarity least_squares_stationarity(const NlpProblem& nlp, const Eigen::VectorXd& z, const NlpValues& vals,
                                        const Eigen::VectorXd& grad, const Eigen::MatrixXd& jac_eq,
                                        const Eigen::MatrixXd& jac_ineq, const QpSolution& qs) {
    Stationarity st;
    const auto n = static_cast<int>(z.size());
    std::vector<int> free_vars, active_ineq;
    for (int i = 0; i < n; ++i) {
        if (qs.bound_multipliers(i) == 0.0) free_vars.push_back(i);
    }
    for (int i = 0; i < nlp.num_ineq; ++i) {
        if (qs.ineq_multipliers(i) > 0.0) active_ineq.push_back(i);
    }
    const auto nf = static_cast<Eigen::Index>(free_vars.size());
    const auto na = static_cast<Eigen::Index>(active_ineq.size());
    Eigen::MatrixXd a(nf, nlp.num_eq + na);
    Eigen::VectorXd g(nf);
    for (Eigen::Index r = 0; r < nf; ++r) {
        const int i = free_vars[static_cast<std::size_t>(r)];
        g(r) = grad(i);
        if (nlp.num_eq > 0) a.row(r).head(nlp.num_eq) = jac_eq.col(i).transpose();
        for (Eigen::Index c = 0; c < na; ++c) a(r, nlp.num_eq + c) = jac_ineq(active_ineq[static_cast<std::size_t>(c)], i);
    }
    Eigen::VectorXd y = Eigen::VectorXd::Zero(a.cols());
    if (a.cols() > 0 && nf > 0) y = a.colPivHouseholderQr().solve(-g);
    if (!y.allFinite()) return st;

    st.eq_multipliers = y.head(nlp.num_eq);
    st.ineq_multipliers = Eigen::VectorXd::Zero(nlp.num_ineq);
    for (Eigen::Index c = 0; c < na; ++c) {
        const double mu = y(nlp.num_eq + c);
        if (mu < 0.0) return st;
        st.ineq_multipliers(active_ineq[static_cast<std::size_t>(c)]) = mu;
    }
    Eigen::VectorXd lag = grad;
    if (nlp.num_eq > 0) lag += jac_eq.transpose() * st.eq_multipliers;
    if (nlp.num_ineq > 0) lag += jac_ineq.transpose() * st.ineq_multipliers;
    st.bound_multipliers = Eigen::VectorXd::Zero(n);
    double comp = 0.0;
    for (int i = 0; i < n; ++i) {
        const double q = qs.bound_multipliers(i);
        if (q == 0.0) continue;
        const double nu = -lag(i);
        if (nu * q < 0.0) return st;
        st.bound_multipliers(i) = nu;
        comp = std::max(comp, nu < 0.0 ? -nu * (z(i) - nlp.lower(i)) : nu * (nlp.upper(i) - z(i)));
        lag(i) = 0.0;
    }
    for (int i = 0; i < nlp.num_ineq; ++i) comp = std::max(comp, std::abs(st.ineq_multipliers(i) * vals.ineq(i)));
    st.kkt = lag.cwiseAbs().maxCoeff();
    st.complementarity = comp;
    st.valid = true;
    return st;
}

Linearization linearize(const NlpProblem& nlp, const Eigen::VectorXd& z, NlpValues base,
                        double rel_step, int threads) {
    Linearization lin;
    const int n = nlp.num_vars;
    lin.grad.resize(n);
    lin.jac_eq.resize(nlp.num_eq, n);
    lin.jac_ineq.resize(nlp.num_ineq, n);
    lin.values = std::move(base);

    auto column_range = [&](int begin, int end) {
        Eigen::VectorXd zp = z;
        for (int i = begin; i < end; ++i) {
            const double h = rel_step * (1.0 + std::abs(z(i)));
            zp(i) = z(i) + h;
            const NlpValues vp = nlp.evaluate(zp);
            zp(i) = z(i) - h;
            const NlpValues vm = nlp.evaluate(zp);
            zp(i) = z(i);
            if (!all_finite(vp) || !all_finite(vm)) {
                throw NumericalFailure("non-finite NLP value perturbing variable " + std::to_string(i));
            }
            const double inv = 1.0 / (2.0 * h);
            lin.grad(i) = (vp.objective - vm.objective) * inv;
            lin.jac_eq.col(i) = (vp.eq - vm.eq) * inv;
            lin.jac_ineq.col(i) = (vp.ineq - vm.ineq) * inv;
        }
    };

    const int workers = (nlp.reentrant && threads > 1) ? std::min(threads, n) : 1;
    if (workers <= 1) {
        column_range(0, n);
        return lin;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int begin = n * w / workers;
        const int end = n * (w + 1) / workers;
        pool.emplace_back([&, w, begin, end] {
            try {
                column_range(begin, end);
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return lin;
}

double l1_violation(const Eigen::VectorXd& eq, const Eigen::VectorXd& ineq) {
    return eq.cwiseAbs().sum() + ineq.cwiseMax(0.0).sum();
}

double merit(const NlpValues& v, double rho) {
    if (!all_finite(v)) return kInf;
    return v.objective + rho * l1_violation(v.eq, v.ineq);
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

double positive_max(const Eigen::VectorXd& v) { return v.size() ? std::max(0.0, v.maxCoeff()) : 0.0; }

Eigen::VectorXd clamp(const Eigen::VectorXd& z, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
    return z.cwiseMax(lo).cwiseMin(hi);
}

// Block-diagonal damped BFGS approximation of the Lagrangian Hessian.
class BlockBfgs {
public:
    BlockBfgs(int n, std::vector<std::vector<int>> blocks) : n_(n), blocks_(std::move(blocks)) {
        if (blocks_.empty()) {
            std::vector<int> all(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
            blocks_.push_back(std::move(all));
        } else {
            std::vector<char> seen(static_cast<std::size_t>(n), 0);
            for (const auto& b : blocks_) {
                for (int i : b) seen[static_cast<std::size_t>(i)] = 1;
            }
            for (int i = 0; i < n; ++i) {
                if (!seen[static_cast<std::size_t>(i)]) blocks_.push_back({i});
            }
        }
        reset();
    }

    void reset() {
        mats_.clear();
        for (const auto& b : blocks_) {
            mats_.push_back(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(b.size()),
                                                      static_cast<Eigen::Index>(b.size())));
        }
        fresh_ = true;
        scaled_.assign(blocks_.size(), 0);
    }

    bool fresh() const { return fresh_; }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n_, n_);
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& b = blocks_[k];
            for (std::size_t i = 0; i < b.size(); ++i) {
                for (std::size_t j = 0; j < b.size(); ++j) {
                    h(b[i], b[j]) = mats_[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                }
            }
        }
        return h;
    }

    void update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
        fresh_ = false;
        for (std::size_t k = 0; k < blocks_.size(); ++k) {
            const auto& b = blocks_[k];
            const auto m = static_cast<Eigen::Index>(b.size());
            Eigen::VectorXd sb(m), yb(m);
            for (Eigen::Index i = 0; i < m; ++i) {
                sb(i) = s(b[static_cast<std::size_t>(i)]);
                yb(i) = y(b[static_cast<std::size_t>(i)]);
            }
            if (sb.norm() < 1e-14) continue;
            Eigen::MatrixXd& h = mats_[k];
            const double sy = sb.dot(yb);
            if (!scaled_[k] && sy > 0.0) {
                // Shanno-Phua sizing of the initial identity
                const double gamma = yb.squaredNorm() / sy;
                if (std::isfinite(gamma) && gamma > 0.0) h = gamma * Eigen::MatrixXd::Identity(m, m);
                scaled_[k] = 1;
            }
            const Eigen::VectorXd hs = h * sb;
            const double shs = sb.dot(hs);
            if (!(shs > 0.0)) continue;
            double theta = 1.0;
            if (sy < 0.2 * shs) theta = 0.8 * shs / (shs - sy);
            const Eigen::VectorXd r = theta * yb + (1.0 - theta) * hs;
            const double sr = sb.dot(r);
            if (!(sr > 0.0) || !r.allFinite()) continue;
            h += (r * r.transpose()) / sr - (hs * hs.transpose()) / shs;
            h = 0.5 * (h + h.transpose());
        }
    }

private:
    int n_;
    std::vector<std::vector<int>> blocks_;
    std::vector<Eigen::MatrixXd> mats_;
    std::vector<char> scaled_;
    bool fresh_ = true;
};

}  // namespace

SolverResult solve(const NlpProblem& nlp, const SolverOptions& options) {
    if (options.kkt_tolerance <= 0.0 || options.constraint_tolerance <= 0.0 || options.max_iterations < 1) {
        throw std::invalid_argument("sqp: tolerances must be positive and max_iterations >= 1");
    }
    const int n = nlp.num_vars;
    if (nlp.lower.size() != n || nlp.upper.size() != n || nlp.initial_guess.size() != n) {
        throw std::invalid_argument("sqp: bound/guess dimensions do not match num_vars");
    }

    SolverResult result;
    Eigen::VectorXd z = clamp(nlp.initial_guess, nlp.lower, nlp.upper);
    result.solution = z;

    NlpValues vals = nlp.evaluate(z);
    if (vals.eq.size() != nlp.num_eq || vals.ineq.size() != nlp.num_ineq) {
        throw std::invalid_argument("sqp: callback output dimensions differ from num_eq/num_ineq");
    }
    auto finish = [&](SolverStatus status, int iterations) {
        result.status = status;
        result.iterations = iterations;
        result.solution = z;
        result.objective = vals.objective;
        result.eq_violation = inf_norm(vals.eq);
        result.ineq_violation = positive_max(vals.ineq);
        return result;
    };
    if (!all_finite(vals)) return finish(SolverStatus::numerical_failure, 0);

    Linearization lin;
    try {
        lin = linearize(nlp, z, vals, options.fd_relative_step, options.threads);
    } catch (const NumericalFailure&) {
        return finish(SolverStatus::numerical_failure, 0);
    }

    BlockBfgs bfgs(n, nlp.hessian_blocks);
    double rho = options.initial_penalty;
    QpOptions qopt;
    qopt.elastic_weight = options.elastic_weight;

    if (options.iteration_log) {
        *options.iteration_log << "iter,objective,eq_inf,ineq_max,kkt,step_norm,penalty,alpha,merit_before,"
                                  "merit_after,restoration\n";
    }

    int restoration_stalls = 0;
    double prox = 0.0;
    for (int iter = 0; iter < options.max_iterations; ++iter) {
        QpProblem qp;
        qp.hessian = bfgs.dense();
        if (prox > 0.0) qp.hessian.diagonal().array() += prox;
        qp.gradient = lin.grad;
        qp.eq_matrix = lin.jac_eq;
        qp.eq_rhs = -vals.eq;
        qp.ineq_matrix = lin.jac_ineq;
        qp.ineq_rhs = -vals.ineq;
        qp.lower = nlp.lower - z;
        qp.upper = nlp.upper - z;

        QpSolution qs = qp_subproblem(qp, qopt);
        if (qs.status != QpStatus::optimal) {
            if (!bfgs.fresh()) {
                bfgs.reset();
                continue;
            }
            return finish(qs.status == QpStatus::infeasible ? SolverStatus::infeasible
                                                            : SolverStatus::numerical_failure,
                          iter);
        }
        const Eigen::VectorXd& p = qs.step;

        // first-order optimality at the current iterate with the QP multipliers
        const Eigen::VectorXd grad_lag_no_bounds =
            lin.grad + lin.jac_eq.transpose() * qs.eq_multipliers + lin.jac_ineq.transpose() * qs.ineq_multipliers;
        const double kkt = inf_norm(grad_lag_no_bounds + qs.bound_multipliers);
        double comp = 0.0;
        for (int i = 0; i < nlp.num_ineq; ++i) comp = std::max(comp, std::abs(qs.ineq_multipliers(i) * vals.ineq(i)));
        for (int i = 0; i < n; ++i) {
            const double nu = qs.bound_multipliers(i);
            if (nu < 0.0) comp = std::max(comp, -nu * (z(i) - nlp.lower(i)));
            if (nu > 0.0) comp = std::max(comp, nu * (nlp.upper(i) - z(i)));
        }
        const double eqv = inf_norm(vals.eq);
        const double inv = positive_max(vals.ineq);
        result.kkt_residual = kkt;
        result.complementarity = comp;
        result.eq_multipliers = qs.eq_multipliers;
        result.ineq_multipliers = qs.ineq_multipliers;
        result.bound_multipliers = qs.bound_multipliers;
        const bool feasible = eqv <= options.constraint_tolerance && inv <= options.constraint_tolerance;
        if (!qs.restoration && feasible && kkt <= options.kkt_tolerance && comp <= options.kkt_tolerance) {
            return finish(SolverStatus::converged, iter);
        }
        if (!qs.restoration && feasible) {
            const Stationarity st =
                least_squares_stationarity(nlp, z, vals, lin.grad, lin.jac_eq, lin.jac_ineq, qs);
            if (st.valid && st.kkt <= options.kkt_tolerance && st.complementarity <= options.kkt_tolerance) {
                result.kkt_residual = st.kkt;
                result.complementarity = st.complementarity;
                result.eq_multipliers = st.eq_multipliers;
                result.ineq_multipliers = st.ineq_multipliers;
                result.bound_multipliers = st.bound_multipliers;
                return finish(SolverStatus::converged, iter);
            }
        }
        if (qs.restoration && inf_norm(p) < 1e-12) {
            if (++restoration_stalls >= 3) return finish(SolverStatus::infeasible, iter);
        } else {
            restoration_stalls = 0;
        }

        if (!qs.restoration) {
            const double mult = std::max(inf_norm(qs.eq_multipliers), inf_norm(qs.ineq_multipliers));
            const double needed = options.penalty_factor * mult + options.penalty_offset;
            rho = std::max(needed, 0.5 * (rho + needed));
        }

        const double viol0 = l1_violation(vals.eq, vals.ineq);
        const double viol_lin = l1_violation(vals.eq + lin.jac_eq * p, vals.ineq + lin.jac_ineq * p);
        double dir = lin.grad.dot(p) + rho * (viol_lin - viol0);
        if (dir > 0.0) dir = -std::abs(p.dot(qp.hessian * p));
        const double phi0 = merit(vals, rho);

        Eigen::VectorXd z_new;
        NlpValues v_new;
        double alpha = 1.0;
        bool accepted = false;
        {
            z_new = clamp(z + p, nlp.lower, nlp.upper);
            v_new = nlp.evaluate(z_new);
            const double phi1 = merit(v_new, rho);
            if (phi1 <= phi0 + options.armijo * dir) {
                accepted = true;
            } else if (options.second_order_correction && all_finite(v_new)) {
                QpProblem soc = qp;
                soc.eq_rhs = -(v_new.eq - lin.jac_eq * p);
                soc.ineq_rhs = -(v_new.ineq - lin.jac_ineq * p);
                QpSolution ss = solve_qp_active_set(soc, qopt);
                if (ss.status == QpStatus::optimal) {
                    Eigen::VectorXd z_soc = clamp(z + ss.step, nlp.lower, nlp.upper);
                    NlpValues v_soc = nlp.evaluate(z_soc);
                    if (merit(v_soc, rho) <= phi0 + options.armijo * dir) {
                        z_new = std::move(z_soc);
                        v_new = std::move(v_soc);
                        accepted = true;
                    }
                }
            }
        }
        for (int k = 0; !accepted && k < options.max_backtracks; ++k) {
            alpha *= options.backtrack_factor;
            z_new = clamp(z + alpha * p, nlp.lower, nlp.upper);
            v_new = nlp.evaluate(z_new);
            if (merit(v_new, rho) <= phi0 + options.armijo * alpha * dir) accepted = true;
        }
        if (!accepted) {
            if (!bfgs.fresh()) {
                bfgs.reset();
                continue;
            }
            return finish(SolverStatus::numerical_failure, iter);
        }
        prox = alpha < 1.0 ? std::max(10.0 * prox, 1e-4) : (prox > 1e-8 ? 0.5 * prox : 0.0);
        const double phi_new = merit(v_new, rho);
        result.merit_history.emplace_back(phi0, phi_new);

        Linearization lin_new;
        try {
            lin_new = linearize(nlp, z_new, v_new, options.fd_relative_step, options.threads);
        } catch (const NumericalFailure&) {
            return finish(SolverStatus::numerical_failure, iter + 1);
        }

        const Eigen::VectorXd s = z_new - z;
        const Eigen::VectorXd grad_lag_new = lin_new.grad + lin_new.jac_eq.transpose() * qs.eq_multipliers +
                                             lin_new.jac_ineq.transpose() * qs.ineq_multipliers;
        bfgs.update(s, grad_lag_new - grad_lag_no_bounds);

        if (options.iteration_log) {
            *options.iteration_log << iter << ',' << vals.objective << ',' << eqv << ',' << inv << ',' << kkt
                                   << ',' << inf_norm(s) << ',' << rho << ',' << alpha << ',' << phi0 << ','
                                   << phi_new << ',' << (qs.restoration ? 1 : 0) << '\n';
        }

        z = std::move(z_new);
        vals = std::move(v_new);
        lin = std::move(lin_new);
    }
    return finish(SolverStatus::max_iterations, options.max_iterations);
}

}  // namespace landing::sqp
