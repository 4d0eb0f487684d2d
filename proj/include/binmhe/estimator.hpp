#pragma once

#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "binmhe/solvers.hpp"

namespace binmhe {

enum class Variant { lsmhe, pwmhe, lsmhe_constrained, pwmhe_constrained };

/// "lsmhe", "pwmhe", "lsmhe-c", "pwmhe-c".
std::string to_string(Variant variant);
Variant parse_variant(const std::string& name);
bool is_constrained(Variant variant);

/// Linear rows added for the constrained variants.
struct ConstraintOptions {
    bool thresholds{true};
    std::optional<Vector> disturbance_bound;  ///< component-wise |w| bound
};

/// One emitted window estimate.
struct StepRecord {
    TimeIndex t{0};
    TimeIndex window_start{0};
    Vector start_estimate;    ///< x_{t-N|t}
    Vector current_estimate;  ///< x_{t|t}
    Vector prediction;        ///< xbar_{t-N} the window was anchored to
    double cost{0};
    int iterations{0};
    double residual{0};
    double wall_time_s{0};
    SolveStatus status{SolveStatus::optimal};
    bool constraint_fallback{false};  ///< constrained solve infeasible, unconstrained answer used
    double delta_t{0};                ///< observability of the window (filled by run on request)
    Vector start_error;               ///< x_{t-N} - x_{t-N|t} when truth is known
    Vector current_error;             ///< x_t - x_{t|t} when truth is known
};

/// Receding-horizon estimator state.
///
/// Holds the measurement buffer, the arrival prediction and the last window
/// solution used for warm starts. Not thread-safe; independent instances are.
class MheState {
public:
    MheState(LtiModel<double> model, BinarySensorBank<double> sensors, EstimatorConfig<double> config,
             Variant variant, Vector prior, ConstraintOptions constraints = {});

    /// Feeds y_t and the input u_t applied at time t. Returns the window
    /// estimate once N+1 readings are available (earlier with shrinking
    /// warm-up enabled).
    std::optional<StepRecord> step(const Vector& u_t, const BinaryVector& y_t);

    /// Next time index to be fed.
    TimeIndex time() const { return t_; }
    const Vector& prediction() const { return prediction_; }
    Variant variant() const { return variant_; }
    const LtiModel<double>& model() const { return model_; }
    const BinarySensorBank<double>& sensors() const { return sensors_; }
    const EstimatorConfig<double>& config() const { return config_; }
    const std::optional<MeasurementWindow<double>>& window() const { return window_; }

    /// Warm starts are on by default; off, every solve starts from the
    /// propagated prediction.
    void set_warm_start(bool on) { warm_start_ = on; }

private:
    SolveReport solve(const WindowProblem<double>& problem, const Vector* warm_start, bool& fallback) const;

    LtiModel<double> model_;
    BinarySensorBank<double> sensors_;
    EstimatorConfig<double> config_;
    Variant variant_;
    ConstraintOptions constraint_options_;

    TimeIndex t_{0};
    Vector prediction_;
    std::deque<Vector> inputs_;        ///< u_{t-N}..u_{t-1} of the next window
    std::deque<BinaryVector> readings_;
    std::optional<MeasurementWindow<double>> window_;
    std::optional<Vector> last_solution_;
    std::optional<Vector> pending_input_;  ///< u_{t-1}, consumed by the next step
    bool warm_start_{true};
};

struct RunOptions {
    bool record_delta{false};
};

/// Binarizes the trajectory outputs and feeds them through the estimator.
/// Errors against the trajectory states are attached to every record.
std::vector<StepRecord> run(MheState& state, const Trajectory<double>& trajectory, RunOptions options = {});

/// Binary readings of a trajectory, one row per instant.
std::vector<BinaryVector> binarize_outputs(const Trajectory<double>& trajectory, const BinarySensorBank<double>& sensors);

}  // namespace binmhe
