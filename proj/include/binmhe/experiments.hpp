#pragma once

// Scenarios and Monte Carlo harness: the single two-mass oscillator with one
// binary sensor, the six-node oscillator network, RMSE statistics,
// observability and ARMSE sweeps, and per-step timing.

#include <cstdint>
#include <string>
#include <vector>

#include "binmhe/estimator.hpp"
#include "binmhe/stability.hpp"

namespace binmhe {

enum class InitialCondition {
    harmonic_random_phase,  ///< nominal state advanced along the free response by a random time in [0, period)
    nominal_plus_box,       ///< nominal state plus a uniform perturbation per component
};

struct Scenario {
    std::string name;
    LtiModel<double> model;
    BinarySensorBank<double> sensors;
    EstimatorConfig<double> config;
    NoiseBounds<double> noise;
    double Ts{0.1};
    double duration_s{40};

    InitialCondition initial{InitialCondition::harmonic_random_phase};
    Vector nominal_state;        ///< full-state nominal x0
    Matrix continuous_A;         ///< generator of the free response (harmonic mode)
    double period_s{0};          ///< phase range for harmonic_random_phase
    double state_half_width{0};  ///< perturbation for nominal_plus_box
    /// Prior xbar_0: nominal state plus uniform [-prior_half_width, prior_half_width],
    /// or a draw centred at zero when prior_centered_at_zero.
    double prior_half_width{0};
    bool prior_centered_at_zero{false};

    std::size_t steps() const;
};

/// Continuous-time matrix of the two-mass two-spring chain, state
/// [x1, v1, x2, v2].
Matrix oscillator_continuous(double m1, double m2, double k1, double k2);

/// Ring over six nodes plus the chords 0-3 and 1-4.
Matrix network_laplacian();

Scenario example1_setup(double epsilon = 1e-5);
Scenario example2_setup(double epsilon = 1e-5);

struct TrialInit {
    Vector x0;
    Vector prior;
};

TrialInit draw_initial_conditions(const Scenario& scenario, std::uint64_t seed, std::uint64_t trial);

/// Simulated trajectory of one trial.
Trajectory<double> simulate_trial(const Scenario& scenario, const TrialInit& init, std::uint64_t seed,
                                  std::uint64_t trial);

/// Which estimate the error series follows.
enum class ErrorTarget {
    current,       ///< x_{t|t} at time t
    window_start,  ///< x_{t-N|t} at time t-N
};

struct RmseSeries {
    std::vector<double> times;
    std::vector<double> rmse;
    bool normalized{true};

    /// Mean of rmse over times in [lo, hi].
    double mean_over(double lo, double hi) const;
};

/// Asymptotic RMSE over [lo, hi]; rejects series that end before hi.
double armse(const RmseSeries& series, double lo = 25.0, double hi = 40.0);

struct MonteCarloSpec {
    Scenario scenario;
    std::size_t trials{1};
    std::vector<Variant> variants{Variant::lsmhe, Variant::pwmhe};
    std::uint64_t seed{1};
    std::size_t workers{0};  ///< 0 selects hardware concurrency
    bool normalized{true};
    ErrorTarget target{ErrorTarget::current};
    ConstraintOptions constraints;
};

struct VariantSummary {
    Variant variant{Variant::lsmhe};
    RmseSeries series;
    double mean_step_time_s{0};
    double median_step_time_s{0};
    std::size_t failed_trials{0};
    std::vector<std::string> failures;
};

struct MonteCarloResult {
    std::vector<VariantSummary> variants;
    std::size_t trials{0};

    const VariantSummary& of(Variant v) const;
};

MonteCarloResult monte_carlo(const MonteCarloSpec& spec);

/// Per-trial per-variant errors, exposed for RMSE unit checks: RMSE(t) over
/// trials of ||e_{t,l}||, optionally divided by the RMS of ||x_{t,l}||.
RmseSeries rmse_from_errors(const std::vector<double>& times, const std::vector<std::vector<Vector>>& errors,
                            const std::vector<std::vector<Vector>>& states, bool normalized);

/// Windows of horizon N over the binarized trajectory, t = N..T.
std::vector<MeasurementWindow<double>> run_windows(const Trajectory<double>& trajectory,
                                                   const BinarySensorBank<double>& sensors, TimeIndex N);

struct ObservabilityPoint {
    double value{0};
    double delta_mean{0};
    double delta_min{0};
    double rank_fraction{0};  ///< share of windows whose switching matrix has full rank
};

enum class SweepVariable { horizon, threshold };

struct ObservabilitySweepSpec {
    SweepVariable variable{SweepVariable::horizon};
    std::vector<double> grid;
    std::size_t trials{20};
    double duration_s{50};
    double fixed_tau{0.5};
    TimeIndex fixed_N{100};
    double rho_V{0.05};
    std::uint64_t seed{1};
    std::size_t workers{0};
};

std::vector<ObservabilityPoint> sweep_observability(const ObservabilitySweepSpec& spec);

struct TimingRow {
    TimeIndex N{0};
    double lsmhe_s{0};
    double pwmhe_s{0};
    double pwmhe_cold_s{0};  ///< PWMHE without warm starts
};

/// Median per-step wall time of both estimators on one Example 1 run per N,
/// warm-started, plus cold-started PWMHE.
std::vector<TimingRow> timing_table(const std::vector<TimeIndex>& horizons, std::uint64_t seed = 1,
                                    std::size_t extra_steps = 60);

struct ArmsePoint {
    double value{0};
    double armse{0};
};

/// ARMSE of one variant as tau or rho_V varies (Example 1, N fixed).
enum class ArmseVariable { threshold, noise };

std::vector<ArmsePoint> sweep_armse(ArmseVariable variable, const std::vector<double>& grid, std::size_t trials,
                                    std::uint64_t seed, Variant variant = Variant::lsmhe, std::size_t workers = 0);

/// Stability data from one run: empirical delta and phi_bar over the run's
/// windows, the constants at the configured P and the recursion check on the
/// window-start errors.
struct StabilityRun {
    double delta{0};
    double phi_bar{0};
    StabilityConstants constants;
    RecursionCheck check;
    std::vector<Vector> start_errors;
};

StabilityRun stability_run(const Scenario& scenario, std::uint64_t seed, std::uint64_t trial,
                           Variant variant = Variant::pwmhe, double tail_from_s = 25.0);

}  // namespace binmhe
