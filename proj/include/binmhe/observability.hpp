#pragma once

// Observability of the switching-instant subsystem: the matrix that stacks
// C^i A^(k - t + N) over every switching instant k of sensor i, its numerical
// rank, and its smallest singular value.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "binmhe/linsys.hpp"
#include "binmhe/sensing.hpp"

namespace binmhe {

struct SwitchingRow {
    Eigen::Index sensor;
    TimeIndex instant;
};

template <typename Scalar = double>
struct ObservabilityReport {
    Mat<Scalar> theta;
    Eigen::Index rank{0};
    Scalar delta_t{0};  ///< smallest singular value of theta, 0 when rank deficient
    std::vector<SwitchingRow> rows;
};

/// Rank with the usual cutoff max(rows, cols) * eps * sigma_max.
template <typename Scalar>
Eigen::Index numerical_rank(const Vec<Scalar>& singular_values, Eigen::Index rows, Eigen::Index cols) {
    if (singular_values.size() == 0) return 0;
    const Scalar cutoff = Scalar(std::max(rows, cols)) * std::numeric_limits<Scalar>::epsilon() * singular_values(0);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < singular_values.size(); ++i)
        if (singular_values(i) > cutoff) ++r;
    return r;
}

template <typename Scalar>
Eigen::Index numerical_rank(const Mat<Scalar>& M) {
    if (M.size() == 0) return 0;
    Eigen::JacobiSVD<Mat<Scalar>> svd(M);
    return numerical_rank<Scalar>(svd.singularValues(), M.rows(), M.cols());
}

/// Rows C^i A^j for j = 0..N, so repeated window evaluations share powers.
template <typename Scalar>
std::vector<Mat<Scalar>> output_power_table(const LtiModel<Scalar>& model, TimeIndex N) {
    std::vector<Mat<Scalar>> table;
    table.reserve(static_cast<std::size_t>(N + 1));
    Mat<Scalar> CA = model.C();
    for (TimeIndex j = 0; j <= N; ++j) {
        table.push_back(CA);
        CA = CA * model.A();
    }
    return table;
}

template <typename Scalar>
ObservabilityReport<Scalar> observability_matrix(const std::vector<Mat<Scalar>>& powers, Eigen::Index n,
                                                 const MeasurementWindow<Scalar>& window) {
    ObservabilityReport<Scalar> report;
    const std::size_t rows = window.switch_count();
    report.theta.resize(static_cast<Eigen::Index>(rows), n);
    report.rows.reserve(rows);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < window.sensors(); ++i) {
        for (TimeIndex k : window.switching_set_of(i)) {
            const TimeIndex expo = k - window.start();
            if (expo < 0 || expo >= static_cast<TimeIndex>(powers.size()))
                throw InvalidInputError("observability_matrix: switching instant outside the window");
            report.theta.row(r++) = powers[static_cast<std::size_t>(expo)].row(i);
            report.rows.push_back({i, k});
        }
    }
    if (rows == 0) return report;

    Eigen::JacobiSVD<Mat<Scalar>> svd(report.theta);
    const Vec<Scalar> sv = svd.singularValues();
    report.rank = numerical_rank<Scalar>(sv, report.theta.rows(), n);
    report.delta_t = report.rank == n ? sv(n - 1) : Scalar(0);
    return report;
}

template <typename Scalar>
ObservabilityReport<Scalar> observability_matrix(const LtiModel<Scalar>& model,
                                                 const MeasurementWindow<Scalar>& window) {
    return observability_matrix(output_power_table(model, window.horizon()), model.n(), window);
}

/// Infimum of delta_t over the supplied windows: the empirical uniform
/// observability measure over a finite run.
template <typename Scalar>
Scalar uniform_delta(const LtiModel<Scalar>& model, const std::vector<MeasurementWindow<Scalar>>& windows) {
    if (windows.empty()) throw InvalidInputError("uniform_delta: need at least one window");
    Scalar delta = std::numeric_limits<Scalar>::infinity();
    std::vector<Mat<Scalar>> powers;
    for (const auto& w : windows) {
        if (static_cast<TimeIndex>(powers.size()) != w.horizon() + 1) powers = output_power_table(model, w.horizon());
        delta = std::min(delta, observability_matrix(powers, model.n(), w).delta_t);
        if (delta == Scalar(0)) break;
    }
    return delta;
}

template <typename Scalar>
bool check_uniform_observability(const ObservabilityReport<Scalar>& report, Eigen::Index n) {
    return report.rank == n;
}

/// Largest eigenvalue argument |arg lambda| over the spectrum of A.
template <typename Scalar>
Scalar max_eigen_angle(const Mat<Scalar>& A) {
    Eigen::EigenSolver<Mat<Scalar>> es(A, false);
    Scalar w = 0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) w = std::max(w, std::abs(std::arg(es.eigenvalues()(i))));
    return w;
}

/// Sufficient switching density for full rank under irregular sampling:
/// nu / N >= 2 (n - 1) / N + omega_max / pi.
template <typename Scalar>
bool switching_density_condition(const LtiModel<Scalar>& model, std::size_t nu_t, TimeIndex N) {
    if (N < 1) throw InvalidInputError("switching_density_condition: N must be >= 1");
    const Scalar lhs = Scalar(nu_t) / Scalar(N);
    const Scalar rhs = Scalar(2 * (model.n() - 1)) / Scalar(N) + max_eigen_angle(model.A()) / std::numbers::pi_v<Scalar>;
    return lhs >= rhs;
}

}  // namespace binmhe
