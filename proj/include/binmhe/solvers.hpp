#pragma once

#include <string>
#include <vector>

#include "binmhe/costs.hpp"
#include "binmhe/qp.hpp"

namespace binmhe {

enum class SolveStatus { optimal, max_iterations, infeasible };

std::string to_string(SolveStatus status);

struct WindowEstimate {
    Vector stacked;                 ///< col(x_{t-N|t}, ..., x_{t|t})
    double cost{0};
    int iterations{0};
    double gradient_norm{0};        ///< projected gradient or KKT stationarity residual
    std::vector<double> cost_history;  ///< cost at every accepted iterate

    Eigen::Index instants(Eigen::Index n) const { return stacked.size() / n; }
    Vector at(Eigen::Index j, Eigen::Index n) const { return stacked.segment(j * n, n); }
    Vector first(Eigen::Index n) const { return stacked.head(n); }
    Vector last(Eigen::Index n) const { return stacked.tail(n); }
};

struct SolveReport {
    WindowEstimate estimate;
    SolveStatus status{SolveStatus::optimal};
    int iterations{0};
    double residual{0};
    double complementarity{0};
    double wall_time_s{0};
};

/// Linear inequality rows on the stacked window estimate.
///
/// Threshold rows encode y_k^i (C^i x_k - tau^i) + rho_V^i > 0 as
/// Gamma chi <= gamma - margin * max(1, |gamma|); disturbance rows keep
/// x_{k+1} - A x_k - B u_k inside a box and are closed, so no margin applies.
struct ConstraintSet {
    Matrix Gamma;
    Vector gamma;
    std::vector<OutputTerm> threshold_rows;  ///< (instant, sensor) behind each Gamma row
    Matrix disturbance_A;
    Vector disturbance_b;
    double margin{1e-9};

    Eigen::Index rows() const { return Gamma.rows() + disturbance_A.rows(); }
    bool empty() const { return rows() == 0; }
    /// Right-hand side actually enforced for the threshold rows.
    Vector tightened_gamma() const;
};

/// Closed-form least-squares window estimate: solves H chi = -g with a block
/// Cholesky factorization of the block-tridiagonal Hessian.
SolveReport solve_lsmhe(const WindowProblem<double>& problem);

/// Piecewise-quadratic window estimate over the state box of the config.
///
/// Without general constraints this is a projected Newton method: the
/// Hessian of the quadratic piece active at the iterate gives the step on the
/// free variables and an Armijo search along the projection arc globalizes
/// it. With threshold or disturbance rows it becomes a feasible-direction
/// method whose direction comes from the dense QP of the active piece.
SolveReport solve_pwmhe(const WindowProblem<double>& problem, const ConstraintSet* constraints = nullptr,
                        const Vector* warm_start = nullptr);

/// Least-squares cost under linear constraints: one dense QP.
SolveReport solve_constrained_lsmhe(const WindowProblem<double>& problem, const ConstraintSet& constraints);

ConstraintSet build_threshold_constraints(const MeasurementWindow<double>& window,
                                          const BinarySensorBank<double>& sensors, const LtiModel<double>& model,
                                          double margin = 1e-9);

/// Appends |x_{k+1} - A x_k - B u_k| <= bound (component-wise) for every
/// step of the window.
void add_disturbance_constraints(ConstraintSet& constraints, const MeasurementWindow<double>& window,
                                 const LtiModel<double>& model, const Vector& bound);

/// All rows, including the state box of the config, as A chi <= b.
void stack_constraints(const WindowProblem<double>& problem, const ConstraintSet* constraints, Matrix& A, Vector& b);

}  // namespace binmhe
