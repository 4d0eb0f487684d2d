#include "binmhe/stability.hpp"

#include <cmath>
#include <limits>

#include "binmhe/observability.hpp"

namespace binmhe {

std::vector<SwitchingResponse> switching_response_matrices(const LtiModel<double>& model,
                                                           const MeasurementWindow<double>& window) {
    const Eigen::Index n = model.n();
    const Eigen::Index m = model.m();
    const TimeIndex N = window.horizon();
    const TimeIndex s = window.start();
    const auto powers = output_power_table(model, N);

    std::vector<SwitchingResponse> out;
    for (Eigen::Index i = 0; i < window.sensors(); ++i) {
        SwitchingResponse r;
        r.sensor = i;
        r.instants = window.switching_set_of(i);
        const auto rows = static_cast<Eigen::Index>(r.instants.size());
        r.H = Matrix::Zero(rows, N * m);
        r.D = Matrix::Zero(rows, N * n);
        for (Eigen::Index row = 0; row < rows; ++row) {
            const TimeIndex k = r.instants[static_cast<std::size_t>(row)];
            for (TimeIndex j = s; j < k; ++j) {
                const RowVec<double> cA = powers[static_cast<std::size_t>(k - 1 - j)].row(i);
                const Eigen::Index b = static_cast<Eigen::Index>(j - s);
                r.D.block(row, b * n, 1, n) = cA;
                if (m > 0) r.H.block(row, b * m, 1, m) = cA * model.B();
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

void PhiTracker::observe(const LtiModel<double>& model, const MeasurementWindow<double>& window) {
    for (const auto& r : switching_response_matrices(model, window))
        if (r.D.size() > 0) observe_value(spectral_norm(r.D));
    ++windows_;
}

void PhiTracker::observe_value(double phi) {
    if (phi > phi_bar_) phi_bar_ = phi;
}

StabilityInputs make_stability_inputs(const EstimatorConfig<double>& config, const LtiModel<double>& model,
                                      const NoiseBounds<double>& radii, double delta, double phi_bar,
                                      StateRadius state_radius) {
    radii.validate(model.p());
    StabilityInputs in;
    in.A = model.A();
    in.B = model.B();
    in.Q = config.Q;
    in.R = config.R;
    in.C = model.C();
    in.N = config.horizon;
    in.delta = delta;
    in.phi_bar = phi_bar;
    in.rho_state = state_radius == StateRadius::box && config.state_box ? config.state_box->radius() : radii.rho_X;
    in.rho_U = radii.rho_U;
    in.rho_W = radii.rho_W;
    in.rho_V_bar = radii.max_rho_V();
    return in;
}

StabilityConstants compute_constants(const StabilityInputs& in, const Matrix& P) {
    if (in.delta < 0) throw InvalidInputError("compute_constants: delta must be nonnegative");
    if (!(in.phi_bar > 0)) throw InvalidInputError("compute_constants: phi_bar must be positive");
    const Eigen::Index n = in.A.rows();
    if (P.rows() != n || P.cols() != n || in.Q.rows() != n) throw InvalidInputError("compute_constants: weight size");

    Eigen::SelfAdjointEigenSolver<Matrix> eP(P, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Matrix> eQ(in.Q, Eigen::EigenvaluesOnly);

    StabilityConstants k;
    k.n = n;
    k.p = in.C.rows();
    k.N = in.N;
    k.delta = in.delta;
    k.phi_bar = in.phi_bar;
    k.lambda_minP = eP.eigenvalues().minCoeff();
    k.lambda_maxP = eP.eigenvalues().maxCoeff();
    k.lambda_minQ = eQ.eigenvalues().minCoeff();
    k.lambda_maxQ = eQ.eigenvalues().maxCoeff();
    if (!(k.lambda_minP > 0) || !(k.lambda_minQ > 0))
        throw InvalidInputError("compute_constants: P and Q must be positive definite");
    k.C_bar = in.C.rowwise().norm().maxCoeff();
    k.L_bar = k.C_bar;
    k.R_bar = in.R.maxCoeff();
    k.R_underbar = in.R.minCoeff();
    k.norm_A = spectral_norm(in.A);
    k.norm_A_minus_I = spectral_norm(in.A - Matrix::Identity(n, n));
    k.norm_B = spectral_norm(in.B);
    k.rho_state = in.rho_state;
    k.rho_U = in.rho_U;
    k.rho_W = in.rho_W;
    k.rho_V_bar = in.rho_V_bar;

    const double p = static_cast<double>(k.p);
    const double N = static_cast<double>(in.N);
    const double phi2 = k.phi_bar * k.phi_bar;
    const double L2 = k.L_bar * k.L_bar;
    const double C2 = k.C_bar * k.C_bar;

    k.d1 = 2.0 * p * phi2;
    k.d2 = 3.0 * L2 / phi2;
    k.b1 = (k.lambda_maxP / k.lambda_minP) * (4.0 + k.d1 / k.lambda_minQ * (k.d2 + k.R_bar));
    k.b2 = 0.5 + in.delta * in.delta * k.R_underbar / (4.0 * k.lambda_maxP);
    k.a1 = k.b1 * k.norm_A * k.norm_A / k.b2;

    k.c1 = p * (N + 1.0) * (4.0 * k.R_bar * C2 + 3.0 * L2);
    k.c2 = k.c1;
    const double ratio = k.b1 / (2.0 * k.lambda_maxP) - 1.0;
    k.c3 = k.b1 + N * k.lambda_maxQ * ratio + p * k.R_bar * (4.0 * (N + 1.0) * C2 + phi2);
    k.c4 = p * (N + 1.0) * k.R_bar * ratio + p * k.R_bar * (4.0 * N + 5.0);

    const double nAI = k.norm_A_minus_I;
    k.a2 = (k.c1 * nAI * nAI * k.rho_state * k.rho_state + k.c2 * k.norm_B * k.norm_B * k.rho_U * k.rho_U +
            k.c3 * k.rho_W * k.rho_W + k.c4 * k.rho_V_bar * k.rho_V_bar) /
           k.b2;
    if (k.a1 < 1.0) k.e_inf = std::sqrt(k.a2 / (1.0 - k.a1));
    return k;
}

StabilityConstants compute_constants(const EstimatorConfig<double>& config, const LtiModel<double>& model,
                                     const NoiseBounds<double>& radii, double delta, double phi_bar,
                                     StateRadius state_radius) {
    return compute_constants(make_stability_inputs(config, model, radii, delta, phi_bar, state_radius), config.P);
}

double contraction_factor(const StabilityInputs& inputs, const Matrix& P_bar, double eps) {
    return compute_constants(inputs, eps * P_bar).a1;
}

EpsilonCertificate find_epsilon(const StabilityInputs& in, const Matrix& P_bar) {
    if (!(in.delta > 0))
        throw NoSolutionError(
            "find_epsilon: observability measure delta is zero; no arrival weight makes a1 < 1 without uniform "
            "observability");
    Eigen::LLT<Matrix> llt(P_bar);
    if (P_bar.rows() != in.A.rows() || llt.info() != Eigen::Success)
        throw InvalidInputError("find_epsilon: Pbar must be an n x n positive-definite matrix");

    auto a1 = [&](double eps) { return contraction_factor(in, P_bar, eps); };

    // a1 grows with eps toward 2 b1 ||A||^2; it never reaches 1 when that
    // limit is below 1.
    const StabilityConstants at_one = compute_constants(in, P_bar);
    if (2.0 * at_one.b1 * at_one.norm_A * at_one.norm_A < 1.0) {
        EpsilonCertificate c;
        c.epsilon = std::numeric_limits<double>::infinity();
        c.unbounded = true;
        c.a1_at_epsilon = c.a1_at_double = 2.0 * at_one.b1 * at_one.norm_A * at_one.norm_A;
        return c;
    }

    double lo = 1.0;
    while (a1(lo) >= 1.0) {
        lo *= 0.5;
        if (lo < 1e-300) throw NoSolutionError("find_epsilon: no eps found with a1 < 1");
    }
    double hi = 2.0 * lo;
    while (a1(hi) < 1.0) {
        lo = hi;
        hi *= 2.0;
    }
    while (hi - lo > 1e-12 * lo) {
        const double mid = 0.5 * (lo + hi);
        if (a1(mid) < 1.0)
            lo = mid;
        else
            hi = mid;
    }
    EpsilonCertificate c;
    c.epsilon = lo;
    c.a1_at_epsilon = a1(lo);
    c.a1_at_double = a1(2.0 * lo);
    return c;
}

RecursionCheck check_error_recursion(const std::vector<Vector>& errors, const Matrix& P,
                                     const StabilityConstants& constants, std::size_t tail_begin) {
    RecursionCheck r;
    r.e_inf = constants.e_inf;
    r.worst_excess = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < errors.size(); ++k) {
        const double lhs = errors[k].dot(P * errors[k]);
        const double rhs = constants.a1 * errors[k - 1].dot(P * errors[k - 1]) + constants.a2;
        const double excess = lhs - rhs;
        r.worst_excess = std::max(r.worst_excess, excess);
        if (excess > 1e-12 * std::max(1.0, std::abs(rhs))) ++r.violations;
        ++r.pairs;
    }
    if (r.pairs == 0) r.worst_excess = 0;
    for (std::size_t k = tail_begin; k < errors.size(); ++k) r.tail_max = std::max(r.tail_max, errors[k].norm());
    r.tail_within_bound = r.e_inf && r.tail_max <= *r.e_inf;
    return r;
}

}  // namespace binmhe
