#include "landing/ocp_transcription.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace landing::ocp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd or_constant(const Eigen::VectorXd& v, int n, double c) {
    return v.size() == 0 ? Eigen::VectorXd::Constant(n, c) : v;
}

void check_size(const Eigen::VectorXd& v, int n, const std::string& what) {
    if (v.size() != 0 && v.size() != n) {
        throw std::invalid_argument(what + ": expected " + std::to_string(n) + " entries, got " +
                                    std::to_string(v.size()));
    }
}

void check_bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, const std::string& what) {
    if (lo.size() != hi.size()) throw std::invalid_argument(what + ": lower/upper sizes differ");
    for (Eigen::Index i = 0; i < lo.size(); ++i) {
        if (std::isnan(lo(i)) || std::isnan(hi(i)) || lo(i) > hi(i)) {
            throw std::invalid_argument(what + ": lower > upper in row " + std::to_string(i));
        }
    }
}

// Collects constraint rows split into equalities and one-sided inequalities.
struct RowSink {
    std::vector<double> eq;
    std::vector<double> ineq;
    std::vector<std::string>* eq_labels = nullptr;
    std::vector<std::string>* ineq_labels = nullptr;

    void push(const Eigen::VectorXd& value, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
              const Eigen::VectorXd& scale, const std::string& label) {
        if (value.size() != lo.size()) {
            throw std::invalid_argument(label + ": constraint returned " + std::to_string(value.size()) +
                                        " rows, bounds have " + std::to_string(lo.size()));
        }
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            const double s = scale.size() ? scale(i) : 1.0;
            const std::string row = label + "[" + std::to_string(i) + "]";
            if (lo(i) == hi(i)) {
                eq.push_back((value(i) - lo(i)) / s);
                if (eq_labels) eq_labels->push_back(row);
                continue;
            }
            if (std::isfinite(lo(i))) {
                ineq.push_back((lo(i) - value(i)) / s);
                if (ineq_labels) ineq_labels->push_back(row + ">=");
            }
            if (std::isfinite(hi(i))) {
                ineq.push_back((value(i) - hi(i)) / s);
                if (ineq_labels) ineq_labels->push_back(row + "<=");
            }
        }
    }
};

Eigen::VectorXd defects_unchecked(const PhaseSpec& phase, const lgr::LGRGrid& grid, const PhaseValues& v) {
    const int n = grid.n;
    const int nx = phase.state_dim;
    const double half = 0.5 * (v.tf - v.t0);
    const double mid = 0.5 * (v.tf + v.t0);
    const Eigen::MatrixXd dx = grid.diff_matrix * v.states;  // n x nx
    Eigen::VectorXd r(n * nx);
    for (int k = 0; k < n; ++k) {
        const double t = half * grid.nodes(k) + mid;
        const Eigen::VectorXd f = phase.dynamics(v.states.row(k).transpose(), v.controls.row(k).transpose(), t);
        r.segment(k * nx, nx) = dx.row(k).transpose() - half * f;
    }
    return r;
}

}  // namespace

DecisionLayout build_layout(const MultiphaseProblem& problem) {
    if (problem.phases.empty()) throw std::invalid_argument("build_layout: problem has no phases");
    DecisionLayout layout;
    int offset = 0;
    for (std::size_t p = 0; p < problem.phases.size(); ++p) {
        const auto& ph = problem.phases[p];
        if (ph.state_dim <= 0) throw std::invalid_argument("build_layout: phase " + std::to_string(p) + " has no states");
        if (ph.control_dim < 0) throw std::invalid_argument("build_layout: negative control dimension");
        if (ph.n_collocation < 1) throw std::invalid_argument("build_layout: n_collocation must be >= 1");
        PhaseLayout pl;
        pl.n = ph.n_collocation;
        pl.nx = ph.state_dim;
        pl.nu = ph.control_dim;
        pl.state_offset = offset;
        offset += pl.nx * (pl.n + 1);
        pl.control_offset = offset;
        offset += pl.nu * pl.n;
        pl.t0_index = offset++;
        pl.tf_index = offset++;
        layout.phases.push_back(pl);
    }
    layout.total = offset;
    return layout;
}

std::vector<PhaseValues> unpack(const MultiphaseProblem& problem, const DecisionLayout& layout,
                                const Eigen::VectorXd& z) {
    if (z.size() != layout.total) throw std::invalid_argument("unpack: decision vector has wrong size");
    std::vector<PhaseValues> out(layout.phases.size());
    for (std::size_t p = 0; p < layout.phases.size(); ++p) {
        const auto& pl = layout.phases[p];
        const auto& ph = problem.phases[p];
        const Eigen::VectorXd xs = or_constant(ph.state_scale, pl.nx, 1.0);
        const Eigen::VectorXd xo = or_constant(ph.state_offset, pl.nx, 0.0);
        const Eigen::VectorXd us = or_constant(ph.control_scale, pl.nu, 1.0);
        const Eigen::VectorXd uo = or_constant(ph.control_offset, pl.nu, 0.0);
        auto& v = out[p];
        v.states.resize(pl.n + 1, pl.nx);
        for (int k = 0; k <= pl.n; ++k) {
            v.states.row(k) = (z.segment(pl.state_offset + k * pl.nx, pl.nx).cwiseProduct(xs) + xo).transpose();
        }
        v.controls.resize(pl.n, pl.nu);
        for (int k = 0; k < pl.n; ++k) {
            v.controls.row(k) =
                (z.segment(pl.control_offset + k * pl.nu, pl.nu).cwiseProduct(us) + uo).transpose();
        }
        v.t0 = z(pl.t0_index) * ph.time_scale;
        v.tf = z(pl.tf_index) * ph.time_scale;
    }
    return out;
}

Eigen::VectorXd pack(const MultiphaseProblem& problem, const DecisionLayout& layout,
                     const std::vector<PhaseValues>& values) {
    if (values.size() != layout.phases.size()) throw std::invalid_argument("pack: phase count mismatch");
    Eigen::VectorXd z(layout.total);
    for (std::size_t p = 0; p < layout.phases.size(); ++p) {
        const auto& pl = layout.phases[p];
        const auto& ph = problem.phases[p];
        const auto& v = values[p];
        if (v.states.rows() != pl.n + 1 || v.states.cols() != pl.nx || v.controls.rows() != pl.n ||
            v.controls.cols() != pl.nu) {
            throw std::invalid_argument("pack: phase " + std::to_string(p) + " has wrong value dimensions");
        }
        const Eigen::VectorXd xs = or_constant(ph.state_scale, pl.nx, 1.0);
        const Eigen::VectorXd xo = or_constant(ph.state_offset, pl.nx, 0.0);
        const Eigen::VectorXd us = or_constant(ph.control_scale, pl.nu, 1.0);
        const Eigen::VectorXd uo = or_constant(ph.control_offset, pl.nu, 0.0);
        for (int k = 0; k <= pl.n; ++k) {
            z.segment(pl.state_offset + k * pl.nx, pl.nx) = (v.states.row(k).transpose() - xo).cwiseQuotient(xs);
        }
        for (int k = 0; k < pl.n; ++k) {
            z.segment(pl.control_offset + k * pl.nu, pl.nu) =
                (v.controls.row(k).transpose() - uo).cwiseQuotient(us);
        }
        z(pl.t0_index) = v.t0 / ph.time_scale;
        z(pl.tf_index) = v.tf / ph.time_scale;
    }
    return z;
}

Eigen::VectorXd assemble_defects(const PhaseSpec& phase, const lgr::LGRGrid& grid, const PhaseValues& values) {
    if (grid.n != phase.n_collocation) throw std::invalid_argument("assemble_defects: grid size mismatch");
    if (values.states.rows() != grid.n + 1 || values.states.cols() != phase.state_dim ||
        values.controls.rows() != grid.n || values.controls.cols() != phase.control_dim) {
        throw std::invalid_argument("assemble_defects: value dimensions do not match the phase");
    }
    if (!(values.tf > values.t0)) throw std::invalid_argument("assemble_defects: tf must exceed t0");
    return defects_unchecked(phase, grid, values);
}

Eigen::VectorXd control_at(const lgr::LGRGrid& grid, const Eigen::MatrixXd& controls, double tau) {
    if (controls.cols() == 0) return Eigen::VectorXd(0);
    if (grid.n == 1) return controls.row(0).transpose();
    const Eigen::VectorXd pts = grid.collocation_nodes();
    const Eigen::RowVectorXd row = lgr::interpolation_row(pts, lgr::barycentric_weights(pts), tau);
    return (row * controls).transpose();
}

Eigen::VectorXd state_at(const lgr::LGRGrid& grid, const Eigen::MatrixXd& states, double tau) {
    const Eigen::RowVectorXd row = lgr::interpolation_row(grid.nodes, lgr::barycentric_weights(grid.nodes), tau);
    return (row * states).transpose();
}

PhaseEnd phase_initial(const lgr::LGRGrid& /*grid*/, const PhaseValues& values) {
    return {values.states.row(0).transpose(), values.controls.row(0).transpose(), values.t0};
}

PhaseEnd phase_final(const lgr::LGRGrid& grid, const PhaseValues& values) {
    return {values.states.row(grid.n).transpose(), control_at(grid, values.controls, 1.0), values.tf};
}

double assemble_cost(const MultiphaseProblem& problem, const std::vector<lgr::LGRGrid>& grids,
                     const std::vector<PhaseValues>& values) {
    double j = 0.0;
    for (std::size_t p = 0; p < problem.phases.size(); ++p) {
        const auto& ph = problem.phases[p];
        const auto& g = grids[p];
        const auto& v = values[p];
        if (ph.mayer_cost) j += ph.mayer_cost(phase_initial(g, v), phase_final(g, v));
        if (ph.lagrange_cost) {
            const double half = 0.5 * (v.tf - v.t0);
            const double mid = 0.5 * (v.tf + v.t0);
            double q = 0.0;
            for (int k = 0; k < g.n; ++k) {
                q += g.weights(k) *
                     ph.lagrange_cost(v.states.row(k).transpose(), v.controls.row(k).transpose(), half * g.nodes(k) + mid);
            }
            j += half * q;
        }
    }
    return j;
}

struct Transcription::Impl {
    MultiphaseProblem problem;
    DecisionLayout layout;
    std::vector<lgr::LGRGrid> grids;
    std::vector<Eigen::RowVectorXd> control_end_rows;
    std::vector<std::string> eq_labels;
    std::vector<std::string> ineq_labels;

    void rows(const std::vector<PhaseValues>& vals, RowSink& sink) const;
    NlpValues evaluate(const Eigen::VectorXd& z) const;
};

void Transcription::Impl::rows(const std::vector<PhaseValues>& vals, RowSink& sink) const {
    for (std::size_t p = 0; p < problem.phases.size(); ++p) {
        const auto& ph = problem.phases[p];
        const auto& g = grids[p];
        const auto& v = vals[p];
        const std::string tag = "phase" + std::to_string(p) + ".";

        // defects, scaled by the state scale
        const Eigen::VectorXd d = defects_unchecked(ph, g, v);
        const Eigen::VectorXd xs = or_constant(ph.state_scale, ph.state_dim, 1.0);
        for (int k = 0; k < g.n; ++k) {
            for (int i = 0; i < ph.state_dim; ++i) {
                sink.eq.push_back(d(k * ph.state_dim + i) / xs(i));
                if (sink.eq_labels) sink.eq_labels->push_back(tag + "defect[" + std::to_string(k) + "," + std::to_string(i) + "]");
            }
        }

        const double half = 0.5 * (v.tf - v.t0);
        const double mid = 0.5 * (v.tf + v.t0);
        const Eigen::VectorXd u_end =
            ph.control_dim ? Eigen::VectorXd((control_end_rows[p] * v.controls).transpose()) : Eigen::VectorXd(0);

        // path constraints at all n+1 points
        for (const auto& pc : ph.path_constraints) {
            for (int k = 0; k <= g.n; ++k) {
                const Eigen::VectorXd uk = k < g.n ? Eigen::VectorXd(v.controls.row(k).transpose()) : u_end;
                sink.push(pc.fn(v.states.row(k).transpose(), uk, half * g.nodes(k) + mid), pc.lower, pc.upper,
                          pc.scale, tag + pc.name + "@" + std::to_string(k));
            }
        }

        // control bounds at the non-collocated endpoint
        if (ph.control_dim) {
            const Eigen::VectorXd us = or_constant(ph.control_scale, ph.control_dim, 1.0);
            sink.push(u_end, ph.control_lower, ph.control_upper, us, tag + "control_end");
        }

        // boundary rows
        const PhaseEnd e0{v.states.row(0).transpose(), v.controls.row(0).transpose(), v.t0};
        const PhaseEnd ef{v.states.row(g.n).transpose(), u_end, v.tf};
        for (const auto& bc : ph.boundary_constraints) {
            sink.push(bc.fn(e0, ef), bc.lower, bc.upper, bc.scale, tag + bc.name);
        }

        // time ordering and duration limits
        Eigen::VectorXd dur(1), lo(1), hi(1), sc(1);
        dur(0) = v.tf - v.t0;
        lo(0) = std::max(ph.duration_lower, 1e-6 * ph.time_scale);
        hi(0) = ph.duration_upper;
        sc(0) = ph.time_scale;
        if (lo(0) == hi(0)) hi(0) = kInf;  // fixed durations are carried by t0/tf bounds
        sink.push(dur, lo, hi, sc, tag + "duration");
    }

    for (std::size_t l = 0; l < problem.linkages.size(); ++l) {
        const auto& lk = problem.linkages[l];
        const auto& gl = grids[static_cast<std::size_t>(lk.left_phase)];
        const auto& vl = vals[static_cast<std::size_t>(lk.left_phase)];
        const auto& vr = vals[static_cast<std::size_t>(lk.right_phase)];
        const PhaseEnd lf{vl.states.row(gl.n).transpose(),
                          problem.phases[static_cast<std::size_t>(lk.left_phase)].control_dim
                              ? Eigen::VectorXd((control_end_rows[static_cast<std::size_t>(lk.left_phase)] * vl.controls).transpose())
                              : Eigen::VectorXd(0),
                          vl.tf};
        const PhaseEnd ri{vr.states.row(0).transpose(), vr.controls.row(0).transpose(), vr.t0};
        sink.push(lk.fn(lf, ri), lk.lower, lk.upper, lk.scale,
                  "link" + std::to_string(l) + (lk.name.empty() ? "" : "." + lk.name));
    }
}

NlpValues Transcription::Impl::evaluate(const Eigen::VectorXd& z) const {
    const auto vals = ocp::unpack(problem, layout, z);
    NlpValues out;
    RowSink sink;
    try {
        out.objective = assemble_cost(problem, grids, vals) / problem.objective_scale;
        rows(vals, sink);
    } catch (const std::runtime_error&) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        out.objective = nan;
        out.eq = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(eq_labels.size()), nan);
        out.ineq = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(ineq_labels.size()), nan);
        return out;
    }
    out.eq = Eigen::Map<const Eigen::VectorXd>(sink.eq.data(), static_cast<Eigen::Index>(sink.eq.size()));
    out.ineq = Eigen::Map<const Eigen::VectorXd>(sink.ineq.data(), static_cast<Eigen::Index>(sink.ineq.size()));
    return out;
}

Transcription::Transcription(MultiphaseProblem problem) {
    auto impl = std::make_shared<Impl>();
    impl->layout = build_layout(problem);
    const int np = static_cast<int>(problem.phases.size());

    for (int p = 0; p < np; ++p) {
        auto& ph = problem.phases[static_cast<std::size_t>(p)];
        const std::string tag = "phase " + std::to_string(p);
        if (!ph.dynamics) throw std::invalid_argument(tag + ": dynamics callback missing");
        const int nx = ph.state_dim, nu = ph.control_dim;
        check_size(ph.state_scale, nx, tag + " state_scale");
        check_size(ph.state_offset, nx, tag + " state_offset");
        check_size(ph.control_scale, nu, tag + " control_scale");
        check_size(ph.control_offset, nu, tag + " control_offset");
        check_size(ph.guess_initial_state, nx, tag + " guess_initial_state");
        check_size(ph.guess_final_state, nx, tag + " guess_final_state");
        check_size(ph.guess_control, nu, tag + " guess_control");
        ph.state_lower = or_constant(ph.state_lower, nx, -kInf);
        ph.state_upper = or_constant(ph.state_upper, nx, kInf);
        ph.control_lower = or_constant(ph.control_lower, nu, -kInf);
        ph.control_upper = or_constant(ph.control_upper, nu, kInf);
        check_size(ph.state_lower, nx, tag + " state_lower");
        check_size(ph.state_upper, nx, tag + " state_upper");
        check_size(ph.control_lower, nu, tag + " control_lower");
        check_size(ph.control_upper, nu, tag + " control_upper");
        check_bounds(ph.state_lower, ph.state_upper, tag + " state bounds");
        check_bounds(ph.control_lower, ph.control_upper, tag + " control bounds");
        if (ph.t0_lower > ph.t0_upper || ph.tf_lower > ph.tf_upper || ph.duration_lower > ph.duration_upper) {
            throw std::invalid_argument(tag + ": time bounds inconsistent");
        }
        if (!(ph.time_scale > 0.0)) throw std::invalid_argument(tag + ": time_scale must be positive");
        for (const auto& pc : ph.path_constraints) check_bounds(pc.lower, pc.upper, tag + " path " + pc.name);
        for (const auto& bc : ph.boundary_constraints) check_bounds(bc.lower, bc.upper, tag + " boundary " + bc.name);
        impl->grids.push_back(lgr::LGRGrid::build(ph.n_collocation));
        const auto& g = impl->grids.back();
        if (g.n == 1) {
            impl->control_end_rows.push_back(Eigen::RowVectorXd::Ones(1));
        } else {
            const Eigen::VectorXd pts = g.collocation_nodes();
            impl->control_end_rows.push_back(lgr::interpolation_row(pts, lgr::barycentric_weights(pts), 1.0));
        }
    }
    for (const auto& lk : problem.linkages) {
        if (lk.left_phase < 0 || lk.right_phase >= np || lk.right_phase <= lk.left_phase) {
            throw std::invalid_argument("linkage: phases must satisfy 0 <= left < right < phase count");
        }
        if (!lk.fn) throw std::invalid_argument("linkage: callback missing");
        check_bounds(lk.lower, lk.upper, "linkage " + lk.name);
    }
    if (!(problem.objective_scale > 0.0)) throw std::invalid_argument("objective_scale must be positive");
    impl->problem = std::move(problem);
    const auto& prob = impl->problem;
    const auto& layout = impl->layout;

    // variable bounds and initial guess in scaled coordinates
    nlp_.num_vars = layout.total;
    nlp_.lower.resize(layout.total);
    nlp_.upper.resize(layout.total);
    std::vector<PhaseValues> guess(static_cast<std::size_t>(np));
    std::vector<PhaseValues> lo(static_cast<std::size_t>(np)), hi(static_cast<std::size_t>(np));
    for (int p = 0; p < np; ++p) {
        const auto& ph = prob.phases[static_cast<std::size_t>(p)];
        const auto& pl = layout.phases[static_cast<std::size_t>(p)];
        auto& gv = guess[static_cast<std::size_t>(p)];
        const Eigen::VectorXd x0 = or_constant(ph.guess_initial_state, pl.nx, 0.0);
        const Eigen::VectorXd xf = ph.guess_final_state.size() ? ph.guess_final_state : x0;
        Eigen::VectorXd u(pl.nu);
        for (int i = 0; i < pl.nu; ++i) {
            const double a = ph.control_lower(i), b = ph.control_upper(i);
            if (ph.guess_control.size()) u(i) = ph.guess_control(i);
            else if (std::isfinite(a) && std::isfinite(b)) u(i) = 0.5 * (a + b);
            else if (std::isfinite(a)) u(i) = a;
            else if (std::isfinite(b)) u(i) = b;
            else u(i) = 0.0;
        }
        const auto& g = impl->grids[static_cast<std::size_t>(p)];
        gv.states.resize(pl.n + 1, pl.nx);
        for (int k = 0; k <= pl.n; ++k) {
            const double s = 0.5 * (g.nodes(k) + 1.0);
            gv.states.row(k) = ((1.0 - s) * x0 + s * xf).transpose();
        }
        gv.controls = u.transpose().replicate(pl.n, 1);
        gv.t0 = ph.guess_t0;
        gv.tf = ph.guess_tf;

        auto fill = [&](PhaseValues& v, const Eigen::VectorXd& xb, const Eigen::VectorXd& ub, double t0, double tf) {
            v.states = xb.transpose().replicate(pl.n + 1, 1);
            v.controls = ub.transpose().replicate(pl.n, 1);
            v.t0 = t0;
            v.tf = tf;
        };
        fill(lo[static_cast<std::size_t>(p)], ph.state_lower, ph.control_lower, ph.t0_lower, ph.tf_lower);
        fill(hi[static_cast<std::size_t>(p)], ph.state_upper, ph.control_upper, ph.t0_upper, ph.tf_upper);
    }
    nlp_.lower = ocp::pack(prob, layout, lo);
    nlp_.upper = ocp::pack(prob, layout, hi);
    nlp_.initial_guess = ocp::pack(prob, layout, guess).cwiseMax(nlp_.lower).cwiseMin(nlp_.upper);

    // Hessian blocks: each collocation node [X_k, U_k], the endpoint X_{n}, and [t0, tf]
    for (const auto& pl : layout.phases) {
        for (int k = 0; k < pl.n; ++k) {
            std::vector<int> b;
            for (int i = 0; i < pl.nx; ++i) b.push_back(pl.state_offset + k * pl.nx + i);
            for (int i = 0; i < pl.nu; ++i) b.push_back(pl.control_offset + k * pl.nu + i);
            nlp_.hessian_blocks.push_back(std::move(b));
        }
        std::vector<int> last;
        for (int i = 0; i < pl.nx; ++i) last.push_back(pl.state_offset + pl.n * pl.nx + i);
        nlp_.hessian_blocks.push_back(std::move(last));
        nlp_.hessian_blocks.push_back({pl.t0_index, pl.tf_index});
    }

    // row structure from one labelled evaluation
    {
        RowSink sink;
        sink.eq_labels = &impl->eq_labels;
        sink.ineq_labels = &impl->ineq_labels;
        impl->rows(ocp::unpack(prob, layout, nlp_.initial_guess), sink);
        nlp_.num_eq = static_cast<int>(sink.eq.size());
        nlp_.num_ineq = static_cast<int>(sink.ineq.size());
    }

    impl_ = impl;
    std::shared_ptr<const Impl> shared = impl_;
    nlp_.evaluate = [shared](const Eigen::VectorXd& z) { return shared->evaluate(z); };
    nlp_.reentrant = true;
}

const MultiphaseProblem& Transcription::problem() const { return impl_->problem; }
const DecisionLayout& Transcription::layout() const { return impl_->layout; }
const std::vector<lgr::LGRGrid>& Transcription::grids() const { return impl_->grids; }
const std::vector<std::string>& Transcription::eq_labels() const { return impl_->eq_labels; }
const std::vector<std::string>& Transcription::ineq_labels() const { return impl_->ineq_labels; }

std::vector<PhaseValues> Transcription::unpack(const Eigen::VectorXd& z) const {
    return ocp::unpack(impl_->problem, impl_->layout, z);
}

Eigen::VectorXd Transcription::pack(const std::vector<PhaseValues>& values) const {
    return ocp::pack(impl_->problem, impl_->layout, values);
}

double Transcription::cost(const Eigen::VectorXd& z) const {
    return assemble_cost(impl_->problem, impl_->grids, unpack(z));
}

Transcription transcribe(const MultiphaseProblem& problem) { return Transcription(problem); }

}  // namespace landing::ocp
