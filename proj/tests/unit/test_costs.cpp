#include <doctest.h>

#include "binmhe/block_tridiagonal.hpp"
#include "support/instances.hpp"

using namespace binmhe;
using binmhe::testing::InstanceShape;
using binmhe::testing::random_instance;

namespace {

// Direct transcriptions of the two costs.
double oracle_common(const binmhe::testing::Instance& ins, const Vector& chi) {
    const Eigen::Index n = ins.model.n();
    const Eigen::Index K = ins.window.horizon() + 1;
    const Vector e0 = chi.head(n) - ins.prediction;
    double J = e0.dot(ins.config.P * e0);
    for (Eigen::Index j = 0; j + 1 < K; ++j) {
        Vector w = chi.segment((j + 1) * n, n) - ins.model.A() * chi.segment(j * n, n);
        if (ins.model.m() > 0) w -= ins.model.B() * ins.window.input(j);
        J += w.dot(ins.config.Q * w);
    }
    return J;
}

double oracle_A(const binmhe::testing::Instance& ins, const Vector& chi) {
    const Eigen::Index n = ins.model.n();
    double J = oracle_common(ins, chi);
    for (Eigen::Index i = 0; i < ins.model.p(); ++i)
        for (TimeIndex k : ins.window.switching_set_of(i)) {
            const Eigen::Index j = k - ins.window.start();
            Vector x = chi.segment(j * n, n);
            if (ins.config.switching_charge == SwitchingCharge::midpoint) x = 0.5 * (x + chi.segment((j + 1) * n, n));
            const double r = ins.model.C().row(i).dot(x) - ins.sensors.thresholds(i);
            J += ins.config.R(i) * r * r;
        }
    return J;
}

double oracle_B(const binmhe::testing::Instance& ins, const Vector& chi) {
    const Eigen::Index n = ins.model.n();
    double J = oracle_common(ins, chi);
    for (Eigen::Index j = 0; j <= ins.window.horizon(); ++j)
        for (Eigen::Index i = 0; i < ins.model.p(); ++i) {
            const double r = ins.model.C().row(i).dot(chi.segment(j * n, n)) - ins.sensors.thresholds(i);
            if (r * ins.window.y(j, i) < 0) J += ins.config.R(i) * r * r;
        }
    return J;
}

Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
    Vector g(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Vector a = x, b = x;
        a(k) += h;
        b(k) -= h;
        g(k) = (f(a) - f(b)) / (2 * h);
    }
    return g;
}

}  // namespace

TEST_SUITE("costs") {

TEST_CASE("least-squares cost and its quadratic form agree with the definition") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        InstanceShape shape{.n = 1 + trial % 3, .N = 2 + trial % 6, .p = 1 + trial % 2, .m = trial % 2};
        auto ins = random_instance(rng, shape);
        if (trial % 4 == 3) ins->config.switching_charge = SwitchingCharge::midpoint;
        const auto pb = ins->problem();
        const QuadraticForm<double> q = assemble_quadratic_A(pb);
        const BlockQuadratic<double> bq = assemble_block_quadratic_A(pb);
        CHECK((q.H - q.H.transpose()).norm() < 1e-12);
        CHECK((bq.H.to_dense() - q.H).norm() < 1e-12 * (1 + q.H.norm()));
        for (int s = 0; s < 5; ++s) {
            const Vector chi = binmhe::testing::random_point(rng, *ins);
            const double J = oracle_A(*ins, chi);
            CHECK(eval_cost_A(pb, chi) == doctest::Approx(J).epsilon(1e-12));
            CHECK(q.evaluate(chi) == doctest::Approx(J).epsilon(1e-10));
            CHECK(bq.evaluate(chi) == doctest::Approx(J).epsilon(1e-10));
            const Vector g = grad_cost_A(pb, chi);
            const Vector fd = central_difference([&](const Vector& x) { return oracle_A(*ins, x); }, chi, 1e-5);
            CHECK((g - fd).norm() <= 1e-6 * (1 + fd.norm()));
        }
    }
}

TEST_CASE("piecewise cost agrees with the definition") {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        InstanceShape shape{.n = 1 + trial % 3, .N = 2 + trial % 6, .p = 1 + trial % 2, .m = trial % 2};
        auto ins = random_instance(rng, shape);
        const auto pb = ins->problem();
        for (int s = 0; s < 5; ++s) {
            const Vector chi = binmhe::testing::random_point(rng, *ins);
            CHECK(eval_cost_B(pb, chi) == doctest::Approx(oracle_B(*ins, chi)).epsilon(1e-12));
            // The local quadratic is exact at the point it is built at.
            const auto local = local_quadratic_B(pb, chi);
            CHECK(local.evaluate(chi) == doctest::Approx(oracle_B(*ins, chi)).epsilon(1e-10));
            const Vector fd = central_difference([&](const Vector& x) { return oracle_B(*ins, x); }, chi, 1e-6);
            CHECK((grad_cost_B(pb, chi) - fd).norm() <= 1e-5 * (1 + fd.norm()));
        }
    }
}

TEST_CASE("prediction propagation is a zero of the model terms") {
    std::mt19937_64 rng(23);
    auto ins = random_instance(rng, {.n = 3, .N = 6, .p = 2, .m = 1});
    const auto pb = ins->problem();
    const Vector chi = propagate_prediction(pb);
    CHECK(oracle_common(*ins, chi) < 1e-24);
    CHECK((chi.head(3) - ins->prediction).norm() == 0);
}

TEST_CASE("terms selected for each cost") {
    std::mt19937_64 rng(24);
    auto ins = random_instance(rng, {.n = 2, .N = 8, .p = 2, .switch_probability = 0.5});
    const auto pb = ins->problem();
    CHECK(switching_terms(pb).size() == ins->window.switch_count());
    const Vector chi = binmhe::testing::random_point(rng, *ins);
    for (const auto& t : inconsistent_terms(pb, chi)) {
        const double r = ins->model.C().row(t.sensor).dot(chi.segment(t.instant * 2, 2)) - ins->sensors.thresholds(t.sensor);
        CHECK(r * ins->window.y(t.instant, t.sensor) < 0);
    }
}

TEST_CASE("block Cholesky solves like a dense factorization") {
    std::mt19937_64 rng(25);
    for (int trial = 0; trial < 10; ++trial) {
        auto ins = random_instance(rng, {.n = 1 + trial % 4, .N = 1 + trial, .p = 1});
        const BlockQuadratic<double> q = assemble_block_quadratic_A(ins->problem());
        const auto chol = BlockTridiagonalCholesky<double>::factor(q.H);
        REQUIRE(chol.has_value());
        const Vector x = chol->solve(q.g);
        const Vector ref = q.H.to_dense().llt().solve(q.g);
        CHECK((x - ref).norm() <= 1e-10 * (1 + ref.norm()));
    }
}

TEST_CASE("block Cholesky reports the failing block") {
    BlockTridiagonal<double> H;
    H.diag = {Matrix::Identity(2, 2), -Matrix::Identity(2, 2)};
    H.lower = {Matrix::Zero(2, 2)};
    std::size_t bad = 99;
    CHECK_FALSE(BlockTridiagonalCholesky<double>::factor(H, &bad).has_value());
    CHECK(bad == 1);
}

TEST_CASE("configuration validation") {
    std::mt19937_64 rng(26);
    auto ins = random_instance(rng, {.n = 2, .N = 3, .p = 1});
    auto cfg = ins->config;
    CHECK_NOTHROW(cfg.validate(2, 1));
    cfg.P(0, 1) += 1.0;
    CHECK_THROWS_AS(cfg.validate(2, 1), ConfigurationError);
    cfg = ins->config;
    cfg.Q = -cfg.Q;
    CHECK_THROWS_AS(cfg.validate(2, 1), ConfigurationError);
    cfg = ins->config;
    cfg.R(0) = 0;
    CHECK_THROWS_AS(cfg.validate(2, 1), ConfigurationError);
    cfg = ins->config;
    cfg.horizon = 0;
    CHECK_THROWS_AS(cfg.validate(2, 1), ConfigurationError);
    cfg = ins->config;
    CHECK_THROWS_AS(cfg.validate(2, 2), ConfigurationError);
}

}
