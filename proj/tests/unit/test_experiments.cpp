#include <doctest.h>

#include "binmhe/experiments.hpp"

using namespace binmhe;

TEST_SUITE("experiments") {

TEST_CASE("scenario parameters") {
    const Scenario e1 = example1_setup();
    CHECK(e1.model.n() == 4);
    CHECK(e1.model.p() == 1);
    CHECK(e1.config.horizon == 100);
    CHECK(e1.config.P(0, 0) == 1e-5);
    CHECK(e1.config.Q == Matrix::Identity(4, 4));
    CHECK(e1.sensors.thresholds(0) == 0.5);
    CHECK(e1.noise.rho_V(0) == 0.05);
    CHECK(e1.Ts == 0.1);
    CHECK(e1.steps() == 400);

    const Scenario e2 = example2_setup();
    CHECK(e2.model.n() == 24);
    CHECK(e2.model.p() == 6);
    CHECK(e2.sensors.thresholds(3) == -0.8);
    CHECK(e2.steps() == 350);
}

TEST_CASE("oscillator matrix") {
    const Matrix Ac = oscillator_continuous(1.0, 2.0, 10.0, 5.0);
    Matrix expect(4, 4);
    expect << 0, 1, 0, 0,
        -15, 0, 5, 0,
        0, 0, 0, 1,
        2.5, 0, -2.5, 0;
    CHECK((Ac - expect).norm() == 0);
}

TEST_CASE("initial conditions are keyed by seed and trial") {
    const Scenario s = example1_setup();
    const TrialInit a = draw_initial_conditions(s, 1, 0);
    const TrialInit b = draw_initial_conditions(s, 1, 0);
    const TrialInit c = draw_initial_conditions(s, 1, 1);
    CHECK((a.x0 - b.x0).norm() == 0);
    CHECK((a.x0 - c.x0).norm() > 0);
    CHECK(a.prior.cwiseAbs().maxCoeff() <= 5.0);
    // the harmonic orbit keeps the energy of the nominal state
    const Matrix K = -oscillator_continuous(1.0, 1.0, 10.0, 10.0).block(1, 0, 1, 4);
    (void)K;
    CHECK(a.x0.norm() <= s.noise.rho_X + 1e-9);
}

TEST_CASE("RMSE by hand") {
    const std::vector<double> times{0.0, 0.1};
    std::vector<std::vector<Vector>> e(2), x(2);
    e[0] = {Vector::Constant(1, 3.0), Vector::Constant(1, 1.0)};
    e[1] = {Vector::Constant(1, 4.0), Vector::Constant(1, 1.0)};
    x[0] = {Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
    x[1] = {Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
    const auto raw = rmse_from_errors(times, e, x, false);
    CHECK(raw.rmse[0] == doctest::Approx(std::sqrt(12.5)));
    CHECK(raw.rmse[1] == doctest::Approx(1.0));
    const auto nrm = rmse_from_errors(times, e, x, true);
    CHECK(nrm.rmse[0] == doctest::Approx(std::sqrt(12.5)));
    CHECK(nrm.rmse[1] == doctest::Approx(0.5));
    CHECK(raw.mean_over(0.0, 0.1) == doctest::Approx((std::sqrt(12.5) + 1) / 2));
    CHECK_THROWS_AS(armse(raw, 25, 40), InvalidInputError);
}

TEST_CASE("Monte Carlo results do not depend on the worker count") {
    MonteCarloSpec spec{.scenario = example1_setup()};
    spec.scenario.config.horizon = 20;
    spec.scenario.duration_s = 4.0;
    spec.trials = 3;
    spec.seed = 9;
    spec.workers = 1;
    const auto a = monte_carlo(spec);
    spec.workers = 3;
    const auto b = monte_carlo(spec);
    for (Variant v : spec.variants) {
        const auto& sa = a.of(v).series;
        const auto& sb = b.of(v).series;
        REQUIRE(sa.rmse.size() == sb.rmse.size());
        for (std::size_t k = 0; k < sa.rmse.size(); ++k) CHECK(sa.rmse[k] == sb.rmse[k]);
        CHECK(a.of(v).failed_trials == 0);
    }
    CHECK(a.of(Variant::lsmhe).series.times.front() == 0.0);
}

TEST_CASE("Monte Carlo rejects bad specs") {
    MonteCarloSpec spec{.scenario = example1_setup()};
    spec.trials = 0;
    CHECK_THROWS_AS(monte_carlo(spec), ConfigurationError);
    spec.trials = 1;
    spec.variants.clear();
    CHECK_THROWS_AS(monte_carlo(spec), ConfigurationError);
}

TEST_CASE("observability sweep far outside the orbit has no switches") {
    ObservabilitySweepSpec spec;
    spec.variable = SweepVariable::threshold;
    spec.grid = {1.5, 0.5};
    spec.trials = 2;
    spec.duration_s = 20;
    spec.fixed_N = 100;
    const auto pts = sweep_observability(spec);
    CHECK(pts[0].delta_mean == 0);
    CHECK(pts[0].rank_fraction == 0);
    CHECK(pts[1].delta_mean > 0);
}

}
