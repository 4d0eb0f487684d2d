#pragma once

#include <vector>

#include "binmhe/types.hpp"

namespace binmhe {

enum class QpStatus { optimal, infeasible, max_iterations };

struct QpResult {
    Vector x;
    Vector multipliers;  ///< one per inequality row, zero for inactive rows
    std::vector<Eigen::Index> active;
    QpStatus status{QpStatus::optimal};
    int iterations{0};
};

/// Strictly convex dense QP
///
///     minimize 1/2 x'G x + a'x   subject to   A x <= b
///
/// by the dual active-set method of Goldfarb and Idnani. It starts from the
/// unconstrained minimizer, so no feasible starting point is needed, and
/// reports infeasibility when the dual becomes unbounded. G must be
/// positive definite; otherwise SolverError is thrown.
QpResult solve_dense_qp(const Matrix& G, const Vector& a, const Matrix& A, const Vector& b, int max_iterations = 0);

}  // namespace binmhe
