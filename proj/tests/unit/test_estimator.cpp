#include <doctest.h>

#include "binmhe/estimator.hpp"
#include "binmhe/experiments.hpp"

using namespace binmhe;

namespace {

Scenario small_scenario(TimeIndex N, bool warmup) {
    Scenario s = example1_setup();
    s.config.horizon = N;
    s.config.shrinking_warmup = warmup;
    s.duration_s = 3.0;
    return s;
}

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("variant names") {
    for (Variant v : {Variant::lsmhe, Variant::pwmhe, Variant::lsmhe_constrained, Variant::pwmhe_constrained})
        CHECK(parse_variant(to_string(v)) == v);
    CHECK_THROWS_AS(parse_variant("kalman"), ConfigurationError);
    CHECK(is_constrained(Variant::pwmhe_constrained));
    CHECK_FALSE(is_constrained(Variant::pwmhe));
}

TEST_CASE("estimates start at t = N without warm-up") {
    const Scenario s = small_scenario(10, false);
    const TrialInit init = draw_initial_conditions(s, 3, 0);
    const auto traj = simulate_trial(s, init, 3, 0);
    MheState st(s.model, s.sensors, s.config, Variant::lsmhe, init.prior);
    const auto recs = run(st, traj);
    REQUIRE(recs.size() == traj.states.size() - 10);
    CHECK(recs.front().t == 10);
    CHECK(recs.front().window_start == 0);
    CHECK(recs.back().t == static_cast<TimeIndex>(traj.states.size()) - 1);
}

TEST_CASE("shrinking warm-up emits from t = 0") {
    const Scenario s = small_scenario(10, true);
    const TrialInit init = draw_initial_conditions(s, 3, 0);
    const auto traj = simulate_trial(s, init, 3, 0);
    MheState st(s.model, s.sensors, s.config, Variant::pwmhe, init.prior);
    const auto recs = run(st, traj);
    REQUIRE(recs.size() == traj.states.size());
    CHECK(recs[3].window_start == 0);
    CHECK(recs[12].window_start == 2);
}

TEST_CASE("prediction follows the window-start estimate") {
    const Scenario s = small_scenario(8, false);
    const TrialInit init = draw_initial_conditions(s, 4, 0);
    const auto traj = simulate_trial(s, init, 4, 0);
    const auto y = binarize_outputs(traj, s.sensors);
    MheState st(s.model, s.sensors, s.config, Variant::lsmhe, init.prior);
    for (std::size_t t = 0; t < y.size(); ++t) {
        const auto rec = st.step(s.model.zero_input(), y[t]);
        if (!rec) continue;
        CHECK((st.prediction() - s.model.A() * rec->start_estimate).norm() < 1e-12);
    }
}

TEST_CASE("a step reproduces a direct window solve") {
    const Scenario s = small_scenario(6, false);
    const TrialInit init = draw_initial_conditions(s, 5, 0);
    const auto traj = simulate_trial(s, init, 5, 0);
    const auto y = binarize_outputs(traj, s.sensors);
    MheState st(s.model, s.sensors, s.config, Variant::lsmhe, init.prior);
    for (std::size_t t = 0; t < 9; ++t) {
        const Vector prediction = st.prediction();
        const auto rec = st.step(s.model.zero_input(), y[t]);
        if (!rec) continue;
        const WindowProblem<double> pb{s.model, s.sensors, s.config, *st.window(), prediction};
        const SolveReport ref = solve_lsmhe(pb);
        CHECK((rec->current_estimate - ref.estimate.last(4)).norm() < 1e-12);
        CHECK(st.window()->start() == rec->window_start);
    }
}

TEST_CASE("bad inputs are rejected") {
    const Scenario s = small_scenario(4, false);
    MheState st(s.model, s.sensors, s.config, Variant::lsmhe, Vector::Zero(4));
    CHECK_THROWS_AS(st.step(Vector::Zero(1), BinaryVector::Ones(1)), InvalidInputError);
    CHECK_THROWS_AS(st.step(Vector::Zero(0), BinaryVector::Zero(1)), InvalidMeasurementError);
    CHECK_THROWS_AS(MheState(s.model, s.sensors, s.config, Variant::lsmhe, Vector::Zero(3)), InvalidInputError);
    auto cfg = s.config;
    cfg.horizon = 0;
    CHECK_THROWS_AS(MheState(s.model, s.sensors, cfg, Variant::lsmhe, Vector::Zero(4)), ConfigurationError);

    MheState used(s.model, s.sensors, s.config, Variant::lsmhe, Vector::Zero(4));
    used.step(Vector::Zero(0), BinaryVector::Ones(1));
    const auto traj = simulate_trial(s, draw_initial_conditions(s, 1, 0), 1, 0);
    CHECK_THROWS_AS(run(used, traj), InvalidInputError);
}

TEST_CASE("warm start does not change the answer") {
    const Scenario s = small_scenario(10, false);
    const TrialInit init = draw_initial_conditions(s, 6, 0);
    const auto traj = simulate_trial(s, init, 6, 0);
    MheState warm(s.model, s.sensors, s.config, Variant::pwmhe, init.prior);
    MheState cold(s.model, s.sensors, s.config, Variant::pwmhe, init.prior);
    cold.set_warm_start(false);
    const auto a = run(warm, traj);
    const auto b = run(cold, traj);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k)
        CHECK(a[k].cost == doctest::Approx(b[k].cost).epsilon(1e-6).scale(1e-6));
}

}
