#pragma once

// Window costs of the two moving-horizon estimators.
//
// A candidate is the stacked vector chi = col(x_{t-N|t}, ..., x_{t|t}) of
// (N+1) n entries. Both costs share the arrival term ||x_0 - xbar||_P^2 and
// the dynamics term sum ||x_{k+1} - A x_k - B u_k||_Q^2. The least-squares
// cost adds R^i (C^i x_k - tau^i)^2 at switching instants only; the
// piecewise-quadratic cost adds the same penalty at every instant whose
// expected output contradicts the binary reading.

#include <optional>
#include <vector>

#include "binmhe/block_tridiagonal.hpp"
#include "binmhe/linsys.hpp"
#include "binmhe/sensing.hpp"

namespace binmhe {

/// Where the least-squares cost measures threshold distance for a switch
/// between k and k+1.
enum class SwitchingCharge {
    window_start,  ///< C x_k
    midpoint,      ///< C (x_k + x_{k+1}) / 2
};

template <typename Scalar = double>
struct StateBox {
    Vec<Scalar> lower;
    Vec<Scalar> upper;

    static StateBox symmetric(Eigen::Index n, Scalar half_width) {
        return {Vec<Scalar>::Constant(n, -half_width), Vec<Scalar>::Constant(n, half_width)};
    }
    /// sup of the Euclidean norm over the box.
    Scalar radius() const { return lower.cwiseAbs().cwiseMax(upper.cwiseAbs()).norm(); }
};

struct SolverOptions {
    double tolerance = 1e-8;        ///< projected-gradient / KKT residual target
    int max_iterations = 500;
    double backtrack = 0.5;          ///< Armijo step reduction
    double sufficient_decrease = 1e-4;
    double margin = 1e-9;            ///< slack turning strict threshold rows into closed ones, times row scale
};

template <typename Scalar = double>
struct EstimatorConfig {
    Mat<Scalar> P;
    Mat<Scalar> Q;
    Vec<Scalar> R;  ///< one positive weight per sensor
    TimeIndex horizon{1};
    std::optional<StateBox<Scalar>> state_box;
    SwitchingCharge switching_charge{SwitchingCharge::window_start};
    SolverOptions solver;
    /// Solve on shrinking windows before N+1 measurements are available.
    bool shrinking_warmup{false};

    void validate(Eigen::Index n, Eigen::Index p) const {
        auto check_pd = [n](const Mat<Scalar>& M, const char* name) {
            if (M.rows() != n || M.cols() != n)
                throw ConfigurationError(std::string("EstimatorConfig: ") + name + " must be n x n");
            const Scalar asym = (M - M.transpose()).cwiseAbs().maxCoeff();
            if (asym > Scalar(1e-12) * (Scalar(1) + M.cwiseAbs().maxCoeff()))
                throw ConfigurationError(std::string("EstimatorConfig: ") + name + " must be symmetric");
            Eigen::LLT<Mat<Scalar>> llt(M);
            if (llt.info() != Eigen::Success)
                throw ConfigurationError(std::string("EstimatorConfig: ") + name + " must be positive definite");
        };
        check_pd(P, "P");
        check_pd(Q, "Q");
        if (R.size() != p) throw ConfigurationError("EstimatorConfig: R must have one entry per sensor");
        if ((R.array() <= 0).any()) throw ConfigurationError("EstimatorConfig: R entries must be positive");
        if (horizon < 1) throw ConfigurationError("EstimatorConfig: horizon N must be >= 1");
        if (state_box) {
            if (state_box->lower.size() != n || state_box->upper.size() != n)
                throw ConfigurationError("EstimatorConfig: state box must have n bounds");
            if ((state_box->lower.array() >= state_box->upper.array()).any())
                throw ConfigurationError("EstimatorConfig: state box needs lower < upper");
        }
    }
};

/// Everything one window estimate depends on. Holds references; keep the
/// referenced objects alive while the problem is in use.
template <typename Scalar = double>
struct WindowProblem {
    const LtiModel<Scalar>& model;
    const BinarySensorBank<Scalar>& sensors;
    const EstimatorConfig<Scalar>& config;
    const MeasurementWindow<Scalar>& window;
    Vec<Scalar> prediction;

    Eigen::Index n() const { return model.n(); }
    Eigen::Index instants() const { return static_cast<Eigen::Index>(window.horizon()) + 1; }
    Eigen::Index dimension() const { return instants() * n(); }
};

/// J = chi' H chi + 2 chi' g + r.
template <typename Scalar = double>
struct QuadraticForm {
    Mat<Scalar> H;
    Vec<Scalar> g;
    Scalar r{0};

    Scalar evaluate(const Vec<Scalar>& chi) const { return chi.dot(H * chi) + Scalar(2) * chi.dot(g) + r; }
};

template <typename Scalar = double>
struct BlockQuadratic {
    BlockTridiagonal<Scalar> H;
    Vec<Scalar> g;
    Scalar r{0};

    Scalar evaluate(const Vec<Scalar>& chi) const { return chi.dot(H.multiply(chi)) + Scalar(2) * chi.dot(g) + r; }
    Vec<Scalar> gradient(const Vec<Scalar>& chi) const { return Scalar(2) * (H.multiply(chi) + g); }
    QuadraticForm<Scalar> to_dense() const { return {H.to_dense(), g, r}; }
};

/// One output penalty R (c' x_j - tau)^2 (or its midpoint variant).
struct OutputTerm {
    Eigen::Index instant;  ///< window-relative
    Eigen::Index sensor;
};

namespace detail {

template <typename Scalar>
auto segment(const Vec<Scalar>& chi, Eigen::Index j, Eigen::Index n) {
    return chi.segment(j * n, n);
}

template <typename Scalar>
Vec<Scalar> input_effect(const WindowProblem<Scalar>& pb, Eigen::Index j) {
    if (pb.model.m() == 0) return Vec<Scalar>::Zero(pb.n());
    return pb.model.B() * pb.window.input(j);
}

template <typename Scalar>
Scalar arrival_and_dynamics(const WindowProblem<Scalar>& pb, const Vec<Scalar>& chi) {
    const Eigen::Index n = pb.n();
    const Vec<Scalar> e0 = segment(chi, 0, n) - pb.prediction;
    Scalar cost = e0.dot(pb.config.P * e0);
    Vec<Scalar> w(n);
    for (Eigen::Index j = 0; j + 1 < pb.instants(); ++j) {
        w = segment(chi, j + 1, n);
        w.noalias() -= pb.model.A() * segment(chi, j, n);
        if (pb.model.m() > 0) w.noalias() -= pb.model.B() * pb.window.input(j);
        cost += w.dot(pb.config.Q * w);
    }
    return cost;
}

template <typename Scalar>
Scalar expected_output(const WindowProblem<Scalar>& pb, const Vec<Scalar>& chi, Eigen::Index j, Eigen::Index i) {
    return pb.model.output_row(i).dot(segment(chi, j, pb.n()));
}

}  // namespace detail

/// Noise-free propagation of the prediction across the window.
template <typename Scalar>
Vec<Scalar> propagate_prediction(const WindowProblem<Scalar>& pb) {
    const Eigen::Index n = pb.n();
    Vec<Scalar> chi(pb.dimension());
    chi.segment(0, n) = pb.prediction;
    for (Eigen::Index j = 0; j + 1 < pb.instants(); ++j)
        chi.segment((j + 1) * n, n) = pb.model.propagate(chi.segment(j * n, n), pb.window.input(j));
    return chi;
}

/// Switching terms charged by the least-squares cost.
template <typename Scalar>
std::vector<OutputTerm> switching_terms(const WindowProblem<Scalar>& pb) {
    std::vector<OutputTerm> terms;
    for (Eigen::Index i = 0; i < pb.window.sensors(); ++i)
        for (TimeIndex k : pb.window.switching_set_of(i)) terms.push_back({static_cast<Eigen::Index>(k - pb.window.start()), i});
    return terms;
}

/// Instants whose expected output contradicts the reading (omega = 1).
template <typename Scalar>
std::vector<OutputTerm> inconsistent_terms(const WindowProblem<Scalar>& pb, const Vec<Scalar>& chi) {
    std::vector<OutputTerm> terms;
    for (Eigen::Index j = 0; j < pb.instants(); ++j)
        for (Eigen::Index i = 0; i < pb.window.sensors(); ++i)
            if (omega(detail::expected_output(pb, chi, j, i), pb.sensors.thresholds(i), pb.window.y(j, i)))
                terms.push_back({j, i});
    return terms;
}

template <typename Scalar>
Scalar eval_cost_A(const WindowProblem<Scalar>& pb, const Vec<Scalar>& chi) {
    Scalar cost = detail::arrival_and_dynamics(pb, chi);
    const bool midpoint = pb.config.switching_charge == SwitchingCharge::midpoint;
    for (const auto& term : switching_terms(pb)) {
        const Eigen::Index j = term.instant;
        const Eigen::Index i = term.sensor;
        Scalar z = detail::expected_output(pb, chi, j, i);
        if (midpoint) z = Scalar(0.5) * (z + detail::expected_output(pb, chi, j + 1, i));
        const Scalar d = z - pb.sensors.thresholds(i);
        cost += pb.config.R(i) * d * d;
    }
    return cost;
}

template <typename Scalar>
Scalar eval_cost_B(const WindowProblem<Scalar>& pb, const Vec<Scalar>& chi) {
    Scalar cost = detail::arrival_and_dynamics(pb, chi);
    for (Eigen::Index j = 0; j < pb.instants(); ++j) {
        for (Eigen::Index i = 0; i < pb.window.sensors(); ++i) {
            const Scalar z = detail::expected_output(pb, chi, j, i);
            const Scalar tau = pb.sensors.thresholds(i);
            if (omega(z, tau, pb.window.y(j, i))) cost += pb.config.R(i) * (z - tau) * (z - tau);
        }
    }
    return cost;
}

/// Arrival and dynamics terms as a block-tridiagonal quadratic.
template <typename Scalar>
BlockQuadratic<Scalar> assemble_base_quadratic(const WindowProblem<Scalar>& pb) {
    const Eigen::Index n = pb.n();
    const auto K = static_cast<std::size_t>(pb.instants());
    BlockQuadratic<Scalar> q{BlockTridiagonal<Scalar>(K, n), Vec<Scalar>::Zero(pb.dimension()), Scalar(0)};
    const Mat<Scalar>& A = pb.model.A();
    const Mat<Scalar>& P = pb.config.P;
    const Mat<Scalar>& Q = pb.config.Q;
    const Mat<Scalar> AtQ = A.transpose() * Q;
    const Mat<Scalar> AtQA = AtQ * A;

    q.H.diag[0] += P;
    q.g.segment(0, n) -= P * pb.prediction;
    q.r += pb.prediction.dot(P * pb.prediction);

    const Mat<Scalar> QA = Q * A;
    for (std::size_t k = 0; k + 1 < K; ++k) {
        q.H.diag[k] += AtQA;
        q.H.diag[k + 1] += Q;
        q.H.lower[k] -= QA;
        if (pb.model.m() == 0) continue;
        const auto j = static_cast<Eigen::Index>(k);
        const Vec<Scalar> b = detail::input_effect(pb, j);
        const Vec<Scalar> Qb = Q * b;
        q.g.segment(j * n, n).noalias() += A.transpose() * Qb;
        q.g.segment((j + 1) * n, n) -= Qb;
        q.r += b.dot(Qb);
    }
    return q;
}

/// Adds R (c' x_j - tau)^2 to the quadratic.
template <typename Scalar>
void add_output_term(BlockQuadratic<Scalar>& q, const WindowProblem<Scalar>& pb, const OutputTerm& term) {
    const Eigen::Index n = pb.n();
    const Vec<Scalar> c = pb.model.output_row(term.sensor).transpose();
    const Scalar R = pb.config.R(term.sensor);
    const Scalar tau = pb.sensors.thresholds(term.sensor);
    const auto k = static_cast<std::size_t>(term.instant);
    q.H.diag[k] += R * c * c.transpose();
    q.g.segment(term.instant * n, n) -= R * tau * c;
    q.r += R * tau * tau;
}

/// Midpoint variant R (c'(x_j + x_{j+1})/2 - tau)^2.
template <typename Scalar>
void add_midpoint_output_term(BlockQuadratic<Scalar>& q, const WindowProblem<Scalar>& pb, const OutputTerm& term) {
    const Eigen::Index n = pb.n();
    const Vec<Scalar> c = pb.model.output_row(term.sensor).transpose();
    const Scalar R = pb.config.R(term.sensor);
    const Scalar tau = pb.sensors.thresholds(term.sensor);
    const auto k = static_cast<std::size_t>(term.instant);
    const Mat<Scalar> cc = Scalar(0.25) * R * c * c.transpose();
    q.H.diag[k] += cc;
    q.H.diag[k + 1] += cc;
    q.H.lower[k] += cc;
    q.g.segment(term.instant * n, n) -= Scalar(0.5) * R * tau * c;
    q.g.segment((term.instant + 1) * n, n) -= Scalar(0.5) * R * tau * c;
    q.r += R * tau * tau;
}

template <typename Scalar>
BlockQuadratic<Scalar> assemble_block_quadratic_A(const WindowProblem<Scalar>& pb) {
    BlockQuadratic<Scalar> q = assemble_base_quadratic(pb);
    const bool midpoint = pb.config.switching_charge == SwitchingCharge::midpoint;
    for (const auto& term : switching_terms(pb)) {
        if (midpoint)
            add_midpoint_output_term(q, pb, term);
        else
            add_output_term(q, pb, term);
    }
    return q;
}

/// Dense (H, g, r) with J^A(chi) = chi' H chi + 2 chi' g + r.
template <typename Scalar>
QuadraticForm<Scalar> assemble_quadratic_A(const WindowProblem<Scalar>& pb) {
    return assemble_block_quadratic_A(pb).to_dense();
}

/// Local quadratic model of J^B that agrees with it (value and gradient) at chi.
template <typename Scalar>
BlockQuadratic<Scalar> local_quadratic_B(const WindowProblem<Scalar>& pb, const Vec<Scalar>& chi) {
    BlockQuadratic<Scalar> q = assemble_base_quadratic(pb);
    for (const auto& term : inconsistent_terms(pb, chi)) add_output_term(q, pb, term);
    return q;
}

template <typename Scalar>
Vec<Scalar> grad_cost_A(const WindowProblem<Scalar>& pb, const Vec<Scalar>& chi) {
    return assemble_block_quadratic_A(pb).gradient(chi);
}

/// Exact gradient of J^B. Continuous across C^i x = tau^i because the
/// switched-on term vanishes there together with its derivative.
template <typename Scalar>
Vec<Scalar> grad_cost_B(const WindowProblem<Scalar>& pb, const Vec<Scalar>& chi) {
    const Eigen::Index n = pb.n();
    Vec<Scalar> grad = assemble_base_quadratic(pb).gradient(chi);
    for (const auto& term : inconsistent_terms(pb, chi)) {
        const Eigen::Index i = term.sensor;
        const Scalar d = detail::expected_output(pb, chi, term.instant, i) - pb.sensors.thresholds(i);
        grad.segment(term.instant * n, n) += Scalar(2) * pb.config.R(i) * d * pb.model.output_row(i).transpose();
    }
    return grad;
}

}  // namespace binmhe
