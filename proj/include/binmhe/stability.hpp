#pragma once

// Error-recursion constants of the piecewise-quadratic estimator and the
// search for an arrival weight P = eps * Pbar that makes the recursion a
// contraction.

#include <optional>
#include <vector>

#include "binmhe/costs.hpp"

namespace binmhe {

/// Maps accumulated inputs and disturbances to the expected outputs at the
/// switching instants of one sensor:
///     z_k = C A^(k-s) x_s + sum_{j<k} C A^(k-1-j) (B u_j + w_j),  k in J_t.
/// H and D have one row per switching instant and N column blocks
/// (j = s..s+N-1).
struct SwitchingResponse {
    Eigen::Index sensor{0};
    std::vector<TimeIndex> instants;
    Matrix H;
    Matrix D;
};

std::vector<SwitchingResponse> switching_response_matrices(const LtiModel<double>& model,
                                                           const MeasurementWindow<double>& window);

/// Running max of ||D_t^i|| over the windows seen so far.
class PhiTracker {
public:
    void observe(const LtiModel<double>& model, const MeasurementWindow<double>& window);
    void observe_value(double phi);
    double value() const { return phi_bar_; }
    std::size_t windows() const { return windows_; }

private:
    double phi_bar_{0};
    std::size_t windows_{0};
};

/// Which radius stands for the state set in a2.
enum class StateRadius {
    box,        ///< radius of the configured estimation box (constrained problems)
    state_set,  ///< rho_X of the plant (unconstrained least-squares problem)
};

/// Everything the constants depend on except the arrival weight P.
struct StabilityInputs {
    Matrix A;
    Matrix B;
    Matrix Q;
    Vector R;
    Matrix C;
    TimeIndex N{1};
    double delta{0};
    double phi_bar{0};
    double rho_state{0};
    double rho_U{0};
    double rho_W{0};
    double rho_V_bar{0};
};

StabilityInputs make_stability_inputs(const EstimatorConfig<double>& config, const LtiModel<double>& model,
                                      const NoiseBounds<double>& radii, double delta, double phi_bar,
                                      StateRadius state_radius = StateRadius::box);

struct StabilityConstants {
    double delta{0};
    double L_bar{0}, C_bar{0}, R_bar{0}, R_underbar{0}, phi_bar{0};
    double lambda_minP{0}, lambda_maxP{0}, lambda_minQ{0}, lambda_maxQ{0};
    double norm_A{0}, norm_A_minus_I{0}, norm_B{0};
    double b1{0}, b2{0}, d1{0}, d2{0}, c1{0}, c2{0}, c3{0}, c4{0}, a1{0}, a2{0};
    std::optional<double> e_inf;  ///< only when a1 < 1
    double rho_state{0}, rho_U{0}, rho_W{0}, rho_V_bar{0};
    Eigen::Index p{0}, n{0};
    TimeIndex N{0};

    bool contracting() const { return a1 < 1.0; }
};

StabilityConstants compute_constants(const StabilityInputs& inputs, const Matrix& P);

StabilityConstants compute_constants(const EstimatorConfig<double>& config, const LtiModel<double>& model,
                                     const NoiseBounds<double>& radii, double delta, double phi_bar,
                                     StateRadius state_radius = StateRadius::box);

/// a1 as a function of eps for P = eps * Pbar.
double contraction_factor(const StabilityInputs& inputs, const Matrix& P_bar, double eps);

struct EpsilonCertificate {
    double epsilon{0};
    double a1_at_epsilon{0};
    double a1_at_double{0};
    /// a1 stays below 1 for every eps > 0; epsilon is then +inf.
    bool unbounded{false};
};

/// Largest eps (to 1e-12 relative) with a1(eps * Pbar) < 1. Throws
/// NoSolutionError when delta = 0, since then a1 >= 1 for every eps.
EpsilonCertificate find_epsilon(const StabilityInputs& inputs, const Matrix& P_bar);

struct RecursionCheck {
    std::size_t pairs{0};
    std::size_t violations{0};
    double worst_excess{0};  ///< max of lhs - rhs over all pairs (<= 0 when none violated)
    double tail_max{0};      ///< max ||e|| over the tail
    std::optional<double> e_inf;
    bool tail_within_bound{false};
};

/// Checks ||e_k||_P^2 <= a1 ||e_{k-1}||_P^2 + a2 over consecutive window-start
/// errors. The tail starts at index tail_begin.
RecursionCheck check_error_recursion(const std::vector<Vector>& errors, const Matrix& P,
                                     const StabilityConstants& constants, std::size_t tail_begin = 0);

}  // namespace binmhe
