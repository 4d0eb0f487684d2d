#include "binmhe/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace binmhe {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Bounds {
    Vector lower;
    Vector upper;
    bool active{false};

    Vector project(const Vector& x) const { return active ? Vector(x.cwiseMax(lower).cwiseMin(upper)) : x; }
};

Bounds stacked_bounds(const WindowProblem<double>& pb) {
    Bounds b;
    const Eigen::Index n = pb.n();
    const Eigen::Index K = pb.instants();
    if (!pb.config.state_box) {
        b.lower = Vector::Constant(pb.dimension(), -std::numeric_limits<double>::infinity());
        b.upper = Vector::Constant(pb.dimension(), std::numeric_limits<double>::infinity());
        return b;
    }
    b.active = true;
    b.lower.resize(pb.dimension());
    b.upper.resize(pb.dimension());
    for (Eigen::Index j = 0; j < K; ++j) {
        b.lower.segment(j * n, n) = pb.config.state_box->lower;
        b.upper.segment(j * n, n) = pb.config.state_box->upper;
    }
    return b;
}

Vector gradient_B(const WindowProblem<double>& pb, const BlockQuadratic<double>& base, const Vector& chi) {
    const Eigen::Index n = pb.n();
    Vector grad = base.gradient(chi);
    for (const auto& term : inconsistent_terms(pb, chi)) {
        const Eigen::Index i = term.sensor;
        const RowVec<double> c = pb.model.output_row(i);
        const double d = c.dot(chi.segment(term.instant * n, n)) - pb.sensors.thresholds(i);
        grad.segment(term.instant * n, n) += 2.0 * pb.config.R(i) * d * c.transpose();
    }
    return grad;
}

BlockQuadratic<double> active_piece(const WindowProblem<double>& pb, const BlockQuadratic<double>& base,
                                    const Vector& chi) {
    BlockQuadratic<double> q = base;
    for (const auto& term : inconsistent_terms(pb, chi)) add_output_term(q, pb, term);
    return q;
}

void check_problem(const WindowProblem<double>& pb) {
    pb.config.validate(pb.model.n(), pb.model.p());
    if (pb.sensors.p() != pb.model.p()) throw InvalidInputError("solver: sensor bank does not match model outputs");
    if (pb.window.sensors() != pb.model.p()) throw InvalidInputError("solver: window does not match model outputs");
    if (pb.prediction.size() != pb.model.n() || !pb.prediction.allFinite())
        throw InvalidInputError("solver: prediction must be a finite n-vector");
}

double max_violation(const Matrix& A, const Vector& b, const Vector& x) {
    if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
    return (A * x - b).maxCoeff();
}

SolveReport pwmhe_projected_newton(const WindowProblem<double>& pb, const Vector* warm_start) {
    const SolverOptions& opt = pb.config.solver;
    const Bounds bounds = stacked_bounds(pb);
    const BlockQuadratic<double> base = assemble_base_quadratic(pb);
    const Eigen::Index dim = pb.dimension();

    Vector chi = warm_start && warm_start->size() == dim ? *warm_start : propagate_prediction(pb);
    chi = bounds.project(chi);
    double f = eval_cost_B(pb, chi);

    SolveReport rep;
    rep.estimate.cost_history.push_back(f);
    rep.status = SolveStatus::max_iterations;
    Vector grad = gradient_B(pb, base, chi);
    double pg_norm = (chi - bounds.project(chi - grad)).norm();
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        if (pg_norm <= opt.tolerance) {
            rep.status = SolveStatus::optimal;
            break;
        }
        // Variables held at a bound this iteration.
        const double eps_bind = std::min(1e-3, pg_norm);
        std::vector<char> pinned(static_cast<std::size_t>(dim), 0);
        BlockQuadratic<double> piece = active_piece(pb, base, chi);
        Vector rhs = -grad;
        if (bounds.active) {
            for (Eigen::Index j = 0; j < dim; ++j) {
                const bool at_lower = chi(j) <= bounds.lower(j) + eps_bind && grad(j) > 0;
                const bool at_upper = chi(j) >= bounds.upper(j) - eps_bind && grad(j) < 0;
                if (at_lower || at_upper) {
                    pinned[static_cast<std::size_t>(j)] = 1;
                    piece.H.pin_variable(j);
                }
            }
        }
        std::size_t bad_block = 0;
        auto chol = BlockTridiagonalCholesky<double>::factor(piece.H, &bad_block);
        if (!chol)
            throw SolverError("solve_pwmhe: local Hessian not positive definite at instant " + std::to_string(bad_block));
        // Newton step on the free variables; the 2 of the cost gradient is
        // undone by halving.
        Vector dir = chol->solve(rhs) * 0.5;
        for (Eigen::Index j = 0; j < dim; ++j)
            if (pinned[static_cast<std::size_t>(j)]) dir(j) = -grad(j);

        double alpha = 1.0;
        bool accepted = false;
        Vector trial;
        double f_trial = f;
        while (alpha > 1e-16) {
            trial = bounds.project(chi + alpha * dir);
            f_trial = eval_cost_B(pb, trial);
            double predicted = 0.0;
            for (Eigen::Index j = 0; j < dim; ++j) {
                if (pinned[static_cast<std::size_t>(j)])
                    predicted += grad(j) * (chi(j) - trial(j));
                else
                    predicted -= alpha * grad(j) * dir(j);
            }
            if (f - f_trial >= opt.sufficient_decrease * predicted) {
                accepted = true;
                break;
            }
            alpha *= opt.backtrack;
        }
        if (!accepted) {
            // Decrease below rounding: keep the full step only if it is
            // numerically no worse and moves toward stationarity.
            trial = bounds.project(chi + dir);
            f_trial = eval_cost_B(pb, trial);
            const Vector g_trial = gradient_B(pb, base, trial);
            const double pg_trial = (trial - bounds.project(trial - g_trial)).norm();
            if (pg_trial < pg_norm && f_trial <= f + 1e-13 * std::max(1.0, std::abs(f))) {
                chi = trial;
                f = f_trial;
                grad = g_trial;
                pg_norm = pg_trial;
                rep.estimate.cost_history.push_back(f);
                continue;
            }
            break;
        }
        chi = trial;
        f = f_trial;
        grad = gradient_B(pb, base, chi);
        pg_norm = (chi - bounds.project(chi - grad)).norm();
        rep.estimate.cost_history.push_back(f);
    }
    if (pg_norm <= opt.tolerance) rep.status = SolveStatus::optimal;

    rep.iterations = it;
    rep.residual = pg_norm;
    rep.estimate.stacked = chi;
    rep.estimate.cost = f;
    rep.estimate.iterations = it;
    rep.estimate.gradient_norm = pg_norm;
    return rep;
}

/// Feasible-direction iterations for J^B under general linear rows. Each
/// direction points at the QP minimizer of the quadratic piece active at the
/// current iterate; the piece shares value and gradient with J^B there.
SolveReport pwmhe_feasible_direction(const WindowProblem<double>& pb, const ConstraintSet& constraints,
                                     const Vector* warm_start) {
    const SolverOptions& opt = pb.config.solver;
    Matrix A;
    Vector b;
    stack_constraints(pb, &constraints, A, b);
    const BlockQuadratic<double> base = assemble_base_quadratic(pb);
    const Eigen::Index dim = pb.dimension();

    Vector chi = warm_start && warm_start->size() == dim ? *warm_start : propagate_prediction(pb);
    bool feasible = max_violation(A, b, chi) <= 0.0;

    SolveReport rep;
    rep.status = SolveStatus::max_iterations;
    Vector lambda = Vector::Zero(A.rows());
    double step_norm = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        const BlockQuadratic<double> piece = active_piece(pb, base, chi);
        const QpResult qp = solve_dense_qp(piece.H.to_dense(), piece.g, A, b);
        if (qp.status == QpStatus::infeasible) {
            rep.status = SolveStatus::infeasible;
            break;
        }
        lambda = qp.multipliers;
        if (!feasible) {
            chi = qp.x;
            feasible = true;
            rep.estimate.cost_history.push_back(eval_cost_B(pb, chi));
            continue;
        }
        const Vector dir = qp.x - chi;
        step_norm = dir.lpNorm<Eigen::Infinity>();
        if (step_norm <= opt.tolerance) {
            chi = qp.x;
            rep.status = SolveStatus::optimal;
            break;
        }
        const double f = eval_cost_B(pb, chi);
        const double slope = gradient_B(pb, base, chi).dot(dir);
        double alpha = 1.0;
        double f_trial = eval_cost_B(pb, Vector(chi + dir));
        while (f_trial > f + opt.sufficient_decrease * alpha * slope && alpha > 1e-16) {
            alpha *= opt.backtrack;
            f_trial = eval_cost_B(pb, Vector(chi + alpha * dir));
        }
        if (f_trial > f) break;
        chi += alpha * dir;
        rep.estimate.cost_history.push_back(f_trial);
    }

    const Vector grad = gradient_B(pb, base, chi);
    rep.iterations = it;
    rep.estimate.stacked = chi;
    rep.estimate.cost = eval_cost_B(pb, chi);
    rep.estimate.iterations = it;
    // KKT of min J^B with rows A chi <= b: grad + 2 A' lambda = 0 with the
    // QP multipliers (the QP minimizes half the cost).
    rep.residual = A.rows() ? (grad + 2.0 * A.transpose() * lambda).lpNorm<Eigen::Infinity>()
                            : grad.lpNorm<Eigen::Infinity>();
    rep.estimate.gradient_norm = rep.residual;
    if (A.rows()) rep.complementarity = (lambda.array() * (b - A * chi).array().abs()).maxCoeff();
    if (!feasible) rep.status = SolveStatus::infeasible;
    return rep;
}

}  // namespace

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::optimal:
            return "optimal";
        case SolveStatus::max_iterations:
            return "max-iterations";
        case SolveStatus::infeasible:
            return "infeasible";
    }
    return "unknown";
}

Vector ConstraintSet::tightened_gamma() const {
    Vector g = gamma;
    for (Eigen::Index i = 0; i < g.size(); ++i) g(i) -= margin * std::max(1.0, std::abs(gamma(i)));
    return g;
}

SolveReport solve_lsmhe(const WindowProblem<double>& pb) {
    const auto start = Clock::now();
    check_problem(pb);
    const BlockQuadratic<double> q = assemble_block_quadratic_A(pb);
    std::size_t bad_block = 0;
    auto chol = BlockTridiagonalCholesky<double>::factor(q.H, &bad_block);
    if (!chol) {
        throw ConfigurationError(bad_block == 0 ? "solve_lsmhe: Hessian not positive definite; check arrival weight P"
                                                : "solve_lsmhe: Hessian not positive definite; check disturbance weight Q");
    }
    const Vector chi = chol->solve(-q.g);

    SolveReport rep;
    rep.status = SolveStatus::optimal;
    rep.iterations = 1;
    rep.residual = (q.H.multiply(chi) + q.g).norm();
    rep.estimate.stacked = chi;
    rep.estimate.cost = eval_cost_A(pb, chi);
    rep.estimate.iterations = 1;
    rep.estimate.gradient_norm = 2.0 * rep.residual;
    rep.estimate.cost_history.push_back(rep.estimate.cost);
    rep.wall_time_s = seconds_since(start);
    return rep;
}

SolveReport solve_pwmhe(const WindowProblem<double>& pb, const ConstraintSet* constraints, const Vector* warm_start) {
    const auto start = Clock::now();
    check_problem(pb);
    SolveReport rep = constraints && !constraints->empty() ? pwmhe_feasible_direction(pb, *constraints, warm_start)
                                                           : pwmhe_projected_newton(pb, warm_start);
    rep.wall_time_s = seconds_since(start);
    return rep;
}

SolveReport solve_constrained_lsmhe(const WindowProblem<double>& pb, const ConstraintSet& constraints) {
    const auto start = Clock::now();
    check_problem(pb);
    Matrix A;
    Vector b;
    stack_constraints(pb, &constraints, A, b);
    const QuadraticForm<double> q = assemble_quadratic_A(pb);
    const QpResult qp = solve_dense_qp(q.H, q.g, A, b);

    SolveReport rep;
    rep.iterations = qp.iterations;
    rep.status = qp.status == QpStatus::optimal       ? SolveStatus::optimal
                 : qp.status == QpStatus::infeasible  ? SolveStatus::infeasible
                                                      : SolveStatus::max_iterations;
    const Vector& chi = qp.x;
    rep.estimate.stacked = chi;
    rep.estimate.cost = eval_cost_A(pb, chi);
    rep.estimate.iterations = qp.iterations;
    rep.estimate.cost_history.push_back(rep.estimate.cost);
    const Vector grad = 2.0 * (q.H * chi + q.g);
    rep.residual = A.rows() ? (grad + 2.0 * A.transpose() * qp.multipliers).lpNorm<Eigen::Infinity>()
                            : grad.lpNorm<Eigen::Infinity>();
    if (A.rows()) rep.complementarity = (qp.multipliers.array() * (b - A * chi).array().abs()).maxCoeff();
    rep.estimate.gradient_norm = rep.residual;
    rep.wall_time_s = seconds_since(start);
    return rep;
}

ConstraintSet build_threshold_constraints(const MeasurementWindow<double>& window,
                                          const BinarySensorBank<double>& sensors, const LtiModel<double>& model,
                                          double margin) {
    const Eigen::Index n = model.n();
    const Eigen::Index p = model.p();
    const Eigen::Index K = static_cast<Eigen::Index>(window.horizon()) + 1;
    if (sensors.p() != p || window.sensors() != p) throw InvalidInputError("build_threshold_constraints: sensor count mismatch");

    ConstraintSet cs;
    cs.margin = margin;
    cs.Gamma = Matrix::Zero(p * K, K * n);
    cs.gamma.resize(p * K);
    cs.disturbance_A.resize(0, K * n);
    cs.disturbance_b.resize(0);
    Eigen::Index row = 0;
    // Sensor-major ordering, one row per (sensor, instant).
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < K; ++j) {
            const double y = window.y(j, i);
            cs.Gamma.block(row, j * n, 1, n) = -y * model.output_row(i);
            cs.gamma(row) = sensors.noise_bounds(i) - y * sensors.thresholds(i);
            cs.threshold_rows.push_back({j, i});
            ++row;
        }
    }
    return cs;
}

void add_disturbance_constraints(ConstraintSet& cs, const MeasurementWindow<double>& window,
                                 const LtiModel<double>& model, const Vector& bound) {
    const Eigen::Index n = model.n();
    const Eigen::Index K = static_cast<Eigen::Index>(window.horizon()) + 1;
    if (bound.size() != n || (bound.array() < 0).any())
        throw InvalidInputError("add_disturbance_constraints: bound must be a nonnegative n-vector");
    if (cs.Gamma.cols() == 0) cs.Gamma.resize(0, K * n);
    if (cs.disturbance_A.cols() != K * n) cs.disturbance_A.resize(0, K * n);

    const Eigen::Index old_rows = cs.disturbance_A.rows();
    const Eigen::Index extra = 2 * n * (K - 1);
    Matrix A = Matrix::Zero(old_rows + extra, K * n);
    Vector b(old_rows + extra);
    A.topRows(old_rows) = cs.disturbance_A;
    b.head(old_rows) = cs.disturbance_b;
    Eigen::Index row = old_rows;
    for (Eigen::Index j = 0; j + 1 < K; ++j) {
        const Vector Bu = model.m() ? Vector(model.B() * window.input(j)) : Vector::Zero(n);
        for (Eigen::Index c = 0; c < n; ++c) {
            // +(x_{j+1} - A x_j)_c <= bound_c + (B u_j)_c
            A(row, (j + 1) * n + c) = 1.0;
            A.block(row, j * n, 1, n) = -model.A().row(c);
            b(row) = bound(c) + Bu(c);
            ++row;
            A(row, (j + 1) * n + c) = -1.0;
            A.block(row, j * n, 1, n) = model.A().row(c);
            b(row) = bound(c) - Bu(c);
            ++row;
        }
    }
    cs.disturbance_A = std::move(A);
    cs.disturbance_b = std::move(b);
}

void stack_constraints(const WindowProblem<double>& pb, const ConstraintSet* cs, Matrix& A, Vector& b) {
    const Eigen::Index dim = pb.dimension();
    const Eigen::Index n = pb.n();
    const Eigen::Index threshold = cs ? cs->Gamma.rows() : 0;
    const Eigen::Index disturbance = cs ? cs->disturbance_A.rows() : 0;
    const Eigen::Index box = pb.config.state_box ? 2 * dim : 0;
    if (cs && ((threshold && cs->Gamma.cols() != dim) || (disturbance && cs->disturbance_A.cols() != dim)))
        throw InvalidInputError("stack_constraints: constraint columns do not match the window");

    A = Matrix::Zero(threshold + disturbance + box, dim);
    b.resize(A.rows());
    if (threshold) {
        A.topRows(threshold) = cs->Gamma;
        b.head(threshold) = cs->tightened_gamma();
    }
    if (disturbance) {
        A.middleRows(threshold, disturbance) = cs->disturbance_A;
        b.segment(threshold, disturbance) = cs->disturbance_b;
    }
    if (box) {
        const Eigen::Index o = threshold + disturbance;
        for (Eigen::Index v = 0; v < dim; ++v) {
            const Eigen::Index c = v % n;
            A(o + 2 * v, v) = 1.0;
            b(o + 2 * v) = pb.config.state_box->upper(c);
            A(o + 2 * v + 1, v) = -1.0;
            b(o + 2 * v + 1) = -pb.config.state_box->lower(c);
        }
    }
}

}  // namespace binmhe
