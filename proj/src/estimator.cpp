#include "binmhe/estimator.hpp"

#include "binmhe/observability.hpp"

namespace binmhe {

std::string to_string(Variant variant) {
    switch (variant) {
        case Variant::lsmhe:
            return "lsmhe";
        case Variant::pwmhe:
            return "pwmhe";
        case Variant::lsmhe_constrained:
            return "lsmhe-c";
        case Variant::pwmhe_constrained:
            return "pwmhe-c";
    }
    return "unknown";
}

Variant parse_variant(const std::string& name) {
    if (name == "lsmhe") return Variant::lsmhe;
    if (name == "pwmhe") return Variant::pwmhe;
    if (name == "lsmhe-c") return Variant::lsmhe_constrained;
    if (name == "pwmhe-c") return Variant::pwmhe_constrained;
    throw ConfigurationError("unknown estimator variant '" + name + "'");
}

bool is_constrained(Variant variant) {
    return variant == Variant::lsmhe_constrained || variant == Variant::pwmhe_constrained;
}

MheState::MheState(LtiModel<double> model, BinarySensorBank<double> sensors, EstimatorConfig<double> config,
                   Variant variant, Vector prior, ConstraintOptions constraints)
    : model_(std::move(model)),
      sensors_(std::move(sensors)),
      config_(std::move(config)),
      variant_(variant),
      constraint_options_(std::move(constraints)),
      prediction_(std::move(prior)) {
    config_.validate(model_.n(), model_.p());
    if (sensors_.p() != model_.p()) throw InvalidInputError("MheState: sensor bank does not match model outputs");
    if (prediction_.size() != model_.n() || !prediction_.allFinite())
        throw InvalidInputError("MheState: prior must be a finite n-vector");
    if (constraint_options_.disturbance_bound && constraint_options_.disturbance_bound->size() != model_.n())
        throw ConfigurationError("MheState: disturbance bound must have n entries");
}

SolveReport MheState::solve(const WindowProblem<double>& pb, const Vector* warm_start, bool& fallback) const {
    fallback = false;
    if (variant_ == Variant::lsmhe) return solve_lsmhe(pb);
    if (variant_ == Variant::pwmhe) return solve_pwmhe(pb, nullptr, warm_start);

    ConstraintSet cs;
    if (constraint_options_.thresholds) {
        cs = build_threshold_constraints(pb.window, sensors_, model_, config_.solver.margin);
    } else {
        cs.margin = config_.solver.margin;
    }
    if (constraint_options_.disturbance_bound)
        add_disturbance_constraints(cs, pb.window, model_, *constraint_options_.disturbance_bound);

    SolveReport rep = variant_ == Variant::lsmhe_constrained ? solve_constrained_lsmhe(pb, cs)
                                                             : solve_pwmhe(pb, &cs, warm_start);
    if (rep.status == SolveStatus::infeasible) {
        fallback = true;
        rep = variant_ == Variant::lsmhe_constrained ? solve_lsmhe(pb) : solve_pwmhe(pb, nullptr, warm_start);
    }
    return rep;
}

std::optional<StepRecord> MheState::step(const Vector& u_t, const BinaryVector& y_t) {
    if (u_t.size() != model_.m()) throw InvalidInputError("MheState::step: input dimension mismatch");
    if (y_t.size() != model_.p()) throw InvalidMeasurementError("MheState::step: reading dimension mismatch");
    for (Eigen::Index i = 0; i < y_t.size(); ++i)
        if (!is_binary(y_t(i))) throw InvalidMeasurementError("MheState::step: readings must be -1 or +1");

    const TimeIndex t = t_++;
    const auto N = static_cast<std::size_t>(config_.horizon);
    readings_.push_back(y_t);
    if (pending_input_) inputs_.push_back(*pending_input_);
    pending_input_ = u_t;

    const bool full = readings_.size() == N + 1;
    if (!full && !config_.shrinking_warmup) return std::nullopt;

    const TimeIndex start = t - static_cast<TimeIndex>(readings_.size()) + 1;
    if (full && window_ && window_->horizon() == config_.horizon && window_->start() == start - 1) {
        window_ = window_->slide(inputs_.back(), y_t);
    } else {
        BinaryMatrix outputs(static_cast<Eigen::Index>(readings_.size()), model_.p());
        for (std::size_t j = 0; j < readings_.size(); ++j)
            outputs.row(static_cast<Eigen::Index>(j)) = readings_[j].transpose();
        window_.emplace(start, std::vector<Vector>(inputs_.begin(), inputs_.end()), outputs);
    }

    const WindowProblem<double> pb{model_, sensors_, config_, *window_, prediction_};
    const Eigen::Index n = model_.n();
    const Eigen::Index K = pb.instants();

    // Warm start: previous solution shifted by one step (or extended during
    // warm-up) plus one propagation step.
    std::optional<Vector> warm;
    if (warm_start_ && last_solution_ && K >= 2) {
        const Eigen::Index prev_K = last_solution_->size() / n;
        if (prev_K == K || prev_K == K - 1) {
            warm.emplace(K * n);
            warm->head((K - 1) * n) = last_solution_->tail((K - 1) * n);
            warm->tail(n) = model_.propagate(warm->segment((K - 2) * n, n), window_->input(K - 2));
        }
    }

    bool fallback = false;
    SolveReport rep;
    try {
        rep = solve(pb, warm ? &*warm : nullptr, fallback);
    } catch (const ConfigurationError& e) {
        throw ConfigurationError("window ending at t=" + std::to_string(t) + ": " + e.what());
    } catch (const Error& e) {
        throw SolverError("window ending at t=" + std::to_string(t) + ": " + e.what());
    }

    StepRecord rec;
    rec.t = t;
    rec.window_start = start;
    rec.start_estimate = rep.estimate.first(n);
    rec.current_estimate = rep.estimate.last(n);
    rec.prediction = prediction_;
    rec.cost = rep.estimate.cost;
    rec.iterations = rep.iterations;
    rec.residual = rep.residual;
    rec.wall_time_s = rep.wall_time_s;
    rec.status = rep.status;
    rec.constraint_fallback = fallback;
    last_solution_ = rep.estimate.stacked;

    if (full) {
        // xbar_{t-N+1} = A x_{t-N|t} + B u_{t-N}
        prediction_ = model_.propagate(rec.start_estimate, inputs_.front());
        readings_.pop_front();
        inputs_.pop_front();
    }
    return rec;
}

std::vector<BinaryVector> binarize_outputs(const Trajectory<double>& trajectory, const BinarySensorBank<double>& sensors) {
    std::vector<BinaryVector> out;
    out.reserve(trajectory.linear_outputs.size());
    for (const auto& z : trajectory.linear_outputs) out.push_back(sensors.measure(z));
    return out;
}

std::vector<StepRecord> run(MheState& state, const Trajectory<double>& trajectory, RunOptions options) {
    if (state.time() != 0) throw InvalidInputError("run: estimator must be freshly initialized");
    const std::vector<BinaryVector> readings = binarize_outputs(trajectory, state.sensors());
    const Vector zero_u = state.model().zero_input();
    std::vector<StepRecord> records;
    for (std::size_t t = 0; t < readings.size(); ++t) {
        const Vector& u = t < trajectory.inputs.size() ? trajectory.inputs[t] : zero_u;
        auto rec = state.step(u, readings[t]);
        if (!rec) continue;
        const auto s = static_cast<std::size_t>(rec->window_start);
        if (s < trajectory.states.size()) rec->start_error = trajectory.states[s] - rec->start_estimate;
        if (t < trajectory.states.size()) rec->current_error = trajectory.states[t] - rec->current_estimate;
        if (options.record_delta) rec->delta_t = observability_matrix(state.model(), *state.window()).delta_t;
        records.push_back(std::move(*rec));
    }
    return records;
}

}  // namespace binmhe
