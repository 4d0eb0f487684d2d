#include "binmhe/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <thread>

#include "binmhe/observability.hpp"

namespace binmhe {

namespace {

std::size_t resolve_workers(std::size_t requested, std::size_t jobs) {
    std::size_t w = requested ? requested : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    return std::max<std::size_t>(1, std::min(w, jobs));
}

/// Runs job(i) for i in [0, count) on `workers` threads. Jobs must not throw.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& job) {
    workers = resolve_workers(workers, count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) job(i);
        });
    }
    for (auto& th : pool) th.join();
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid - 1), v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

double slowest_angular_frequency(const Matrix& Ac) {
    Eigen::EigenSolver<Matrix> es(Ac, false);
    double w = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const double im = std::abs(es.eigenvalues()(i).imag());
        if (im > 1e-9) w = std::min(w, im);
    }
    return w;
}

/// sup ||x|| along the free response of x0 over one period.
double orbit_radius(const Matrix& Ac, const Vector& x0, double period) {
    double r = 0.0;
    const int samples = 2000;
    for (int k = 0; k < samples; ++k) {
        const Matrix E = (Ac * (period * k / samples)).exp();
        r = std::max(r, (E * x0).norm());
    }
    return r;
}

LtiModel<double> oscillator_node(double Ts) {
    const Matrix Ac = oscillator_continuous(1.0, 1.0, 10.0, 10.0);
    const Discretization<double> d = discretize<double>(Ac, Matrix::Zero(4, 0), Ts);
    RowVec<double> c(4);
    c << 0, 0, 1, 0;
    return LtiModel<double>::autonomous(d.Ad, Matrix(c));
}

struct TrialErrors {
    bool failed{false};
    std::string failure;
    std::vector<std::optional<Vector>> errors;  ///< indexed by time step
    std::vector<double> step_times;
};

}  // namespace

std::size_t Scenario::steps() const {
    return static_cast<std::size_t>(std::llround(duration_s / Ts));
}

Matrix oscillator_continuous(double m1, double m2, double k1, double k2) {
    if (!(m1 > 0) || !(m2 > 0)) throw InvalidInputError("oscillator_continuous: masses must be positive");
    Matrix Ac = Matrix::Zero(4, 4);
    Ac(0, 1) = 1.0;
    Ac(1, 0) = -(k1 + k2) / m1;
    Ac(1, 2) = k2 / m1;
    Ac(2, 3) = 1.0;
    Ac(3, 0) = k2 / m2;
    Ac(3, 2) = -k2 / m2;
    return Ac;
}

Matrix network_laplacian() {
    Matrix L = Matrix::Zero(6, 6);
    auto connect = [&L](int i, int j) {
        L(i, j) -= 1.0;
        L(j, i) -= 1.0;
        L(i, i) += 1.0;
        L(j, j) += 1.0;
    };
    for (int i = 0; i < 6; ++i) connect(i, (i + 1) % 6);
    connect(0, 3);
    connect(1, 4);
    return L;
}

Scenario example1_setup(double epsilon) {
    const double Ts = 0.1;
    Scenario s{.name = "example1",
               .model = oscillator_node(Ts),
               .sensors = BinarySensorBank<double>(Vector::Constant(1, 0.5), Vector::Constant(1, 0.05)),
               .Ts = Ts,
               .duration_s = 40.0};
    s.config.P = epsilon * Matrix::Identity(4, 4);
    s.config.Q = Matrix::Identity(4, 4);
    s.config.R = Vector::Ones(1);
    s.config.horizon = 100;
    s.config.state_box = StateBox<double>::symmetric(4, 5.0);
    s.config.shrinking_warmup = true;

    s.initial = InitialCondition::harmonic_random_phase;
    s.nominal_state = (Vector(4) << 0.618, 0.0, 1.0, 0.0).finished();
    s.continuous_A = oscillator_continuous(1.0, 1.0, 10.0, 10.0);
    s.period_s = 2.0 * std::numbers::pi / slowest_angular_frequency(s.continuous_A);
    s.prior_half_width = 5.0;
    s.prior_centered_at_zero = true;

    s.noise.rho_W = 0.0;
    s.noise.rho_V = Vector::Constant(1, 0.05);
    s.noise.rho_U = 0.0;
    s.noise.rho_X = orbit_radius(s.continuous_A, s.nominal_state, s.period_s);
    return s;
}

Scenario example2_setup(double epsilon) {
    const double Ts = 0.1;
    const LtiModel<double> node = oscillator_node(Ts);
    RowVec<double> c(4);
    c << 0, 0, 1, 0;
    const Vector tau = (Vector(6) << 0.5, 0.2, -0.5, -0.8, -0.2, 0.3).finished();
    Scenario s{.name = "example2",
               .model = build_network(node, network_laplacian(), 0.02, c),
               .sensors = BinarySensorBank<double>(tau, Vector::Constant(6, 0.05)),
               .Ts = Ts,
               .duration_s = 35.0};
    s.config.P = epsilon * Matrix::Identity(24, 24);
    s.config.Q = Matrix::Identity(24, 24);
    s.config.R = Vector::Ones(6);
    s.config.horizon = 100;
    s.config.shrinking_warmup = true;

    const Vector node_nominal = (Vector(4) << 0.618, 0.0, 1.0, 0.0).finished();
    s.initial = InitialCondition::nominal_plus_box;
    s.nominal_state = node_nominal.replicate(6, 1);
    s.state_half_width = 5.0;
    s.prior_half_width = 0.0;

    s.noise.rho_W = 0.0;
    s.noise.rho_V = Vector::Constant(6, 0.05);
    s.noise.rho_U = 0.0;
    s.noise.rho_X = (s.nominal_state.cwiseAbs().array() + s.state_half_width).matrix().norm();
    return s;
}

TrialInit draw_initial_conditions(const Scenario& s, std::uint64_t seed, std::uint64_t trial) {
    const Eigen::Index n = s.model.n();
    TrialInit init;
    if (s.initial == InitialCondition::harmonic_random_phase) {
        RandomStream rng(seed, trial, StreamPurpose::phase);
        const double offset = rng.uniform(0.0, s.period_s);
        init.x0 = (s.continuous_A * offset).exp() * s.nominal_state;
    } else {
        RandomStream rng(seed, trial, StreamPurpose::initial_state);
        init.x0 = s.nominal_state + rng.uniform_box(Vector::Constant(n, s.state_half_width).eval());
    }
    RandomStream prior_rng(seed, trial, StreamPurpose::prior);
    const Vector centre = s.prior_centered_at_zero ? Vector::Zero(n).eval() : s.nominal_state;
    init.prior = centre + prior_rng.uniform_box(Vector::Constant(n, s.prior_half_width).eval());
    return init;
}

Trajectory<double> simulate_trial(const Scenario& s, const TrialInit& init, std::uint64_t seed, std::uint64_t trial) {
    const std::vector<Vector> inputs(s.steps(), s.model.zero_input());
    return simulate(s.model, init.x0, inputs, s.noise, seed, trial);
}

double RmseSeries::mean_over(double lo, double hi) const {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < times.size(); ++k) {
        if (times[k] >= lo - 1e-9 && times[k] <= hi + 1e-9) {
            sum += rmse[k];
            ++count;
        }
    }
    if (count == 0) throw InvalidInputError("RmseSeries::mean_over: no samples in the interval");
    return sum / static_cast<double>(count);
}

double armse(const RmseSeries& series, double lo, double hi) {
    if (series.times.empty() || series.times.back() < hi - 1e-9)
        throw InvalidInputError("armse: series ends before the averaging window; run at least " + std::to_string(hi) +
                                " s");
    return series.mean_over(lo, hi);
}

RmseSeries rmse_from_errors(const std::vector<double>& times, const std::vector<std::vector<Vector>>& errors,
                            const std::vector<std::vector<Vector>>& states, bool normalized) {
    if (errors.empty()) throw InvalidInputError("rmse_from_errors: need at least one trial");
    RmseSeries out;
    out.normalized = normalized;
    out.times = times;
    out.rmse.resize(times.size());
    const double L = static_cast<double>(errors.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        double e2 = 0.0;
        double x2 = 0.0;
        for (std::size_t l = 0; l < errors.size(); ++l) {
            e2 += errors[l][k].squaredNorm();
            if (normalized) x2 += states[l][k].squaredNorm();
        }
        double r = std::sqrt(e2 / L);
        if (normalized) {
            const double scale = std::sqrt(x2 / L);
            r = scale > 0 ? r / scale : (r == 0 ? 0.0 : std::numeric_limits<double>::infinity());
        }
        out.rmse[k] = r;
    }
    return out;
}

const VariantSummary& MonteCarloResult::of(Variant v) const {
    for (const auto& s : variants)
        if (s.variant == v) return s;
    throw InvalidInputError("MonteCarloResult: variant '" + to_string(v) + "' was not run");
}

MonteCarloResult monte_carlo(const MonteCarloSpec& spec) {
    if (spec.trials < 1) throw ConfigurationError("monte_carlo: need at least one trial");
    if (spec.variants.empty()) throw ConfigurationError("monte_carlo: no estimator variant selected");
    const Scenario& s = spec.scenario;
    const std::size_t T = s.steps();
    if (T <= static_cast<std::size_t>(s.config.horizon))
        throw ConfigurationError("monte_carlo: duration must exceed the horizon");
    const std::size_t V = spec.variants.size();

    std::vector<std::vector<TrialErrors>> results(spec.trials, std::vector<TrialErrors>(V));
    std::vector<std::vector<Vector>> trial_states(spec.trials);

    parallel_for(spec.trials, spec.workers, [&](std::size_t l) {
        const TrialInit init = draw_initial_conditions(s, spec.seed, l);
        const Trajectory<double> traj = simulate_trial(s, init, spec.seed, l);
        trial_states[l] = traj.states;
        for (std::size_t v = 0; v < V; ++v) {
            TrialErrors& out = results[l][v];
            out.errors.assign(T + 1, std::nullopt);
            try {
                MheState state(s.model, s.sensors, s.config, spec.variants[v], init.prior, spec.constraints);
                for (auto& rec : run(state, traj)) {
                    out.step_times.push_back(rec.wall_time_s);
                    if (spec.target == ErrorTarget::current) {
                        out.errors[static_cast<std::size_t>(rec.t)] = rec.current_error;
                    } else if (rec.t >= s.config.horizon) {
                        out.errors[static_cast<std::size_t>(rec.window_start)] = rec.start_error;
                    }
                }
            } catch (const Error& e) {
                out.failed = true;
                out.failure = "trial " + std::to_string(l) + ": " + e.what();
            }
        }
    });

    MonteCarloResult res;
    res.trials = spec.trials;
    for (std::size_t v = 0; v < V; ++v) {
        VariantSummary sum;
        sum.variant = spec.variants[v];
        std::vector<std::size_t> ok;
        std::vector<double> all_times;
        for (std::size_t l = 0; l < spec.trials; ++l) {
            const TrialErrors& te = results[l][v];
            if (te.failed) {
                ++sum.failed_trials;
                sum.failures.push_back(te.failure);
                continue;
            }
            ok.push_back(l);
            all_times.insert(all_times.end(), te.step_times.begin(), te.step_times.end());
        }
        if (!all_times.empty()) {
            double total = 0.0;
            for (double x : all_times) total += x;
            sum.mean_step_time_s = total / static_cast<double>(all_times.size());
            sum.median_step_time_s = median(all_times);
        }
        if (!ok.empty()) {
            std::vector<double> times;
            std::vector<std::vector<Vector>> errs(ok.size()), xs(ok.size());
            for (std::size_t k = 0; k <= T; ++k) {
                bool all = true;
                for (std::size_t l : ok) all = all && results[l][v].errors[k].has_value();
                if (!all) continue;
                times.push_back(static_cast<double>(k) * s.Ts);
                for (std::size_t j = 0; j < ok.size(); ++j) {
                    errs[j].push_back(*results[ok[j]][v].errors[k]);
                    xs[j].push_back(trial_states[ok[j]][k]);
                }
            }
            if (!times.empty()) sum.series = rmse_from_errors(times, errs, xs, spec.normalized);
        }
        sum.series.normalized = spec.normalized;
        res.variants.push_back(std::move(sum));
    }
    return res;
}

std::vector<MeasurementWindow<double>> run_windows(const Trajectory<double>& traj,
                                                   const BinarySensorBank<double>& sensors, TimeIndex N) {
    const std::vector<BinaryVector> y = binarize_outputs(traj, sensors);
    const auto T = static_cast<TimeIndex>(y.size()) - 1;
    std::vector<MeasurementWindow<double>> windows;
    if (N < 1 || T < N) return windows;
    BinaryMatrix first(N + 1, sensors.p());
    for (TimeIndex j = 0; j <= N; ++j) first.row(j) = y[static_cast<std::size_t>(j)].transpose();
    std::vector<Vector> inputs(traj.inputs.begin(), traj.inputs.begin() + N);
    windows.emplace_back(0, std::move(inputs), first);
    for (TimeIndex t = N + 1; t <= T; ++t) {
        windows.push_back(windows.back().slide(traj.inputs[static_cast<std::size_t>(t - 1)],
                                               y[static_cast<std::size_t>(t)]));
    }
    return windows;
}

std::vector<ObservabilityPoint> sweep_observability(const ObservabilitySweepSpec& spec) {
    if (spec.grid.empty()) throw ConfigurationError("sweep_observability: empty grid");
    if (spec.trials < 1) throw ConfigurationError("sweep_observability: need at least one trial");
    const std::size_t G = spec.grid.size();
    std::vector<double> delta(G * spec.trials, 0.0);
    std::vector<double> full_rank(G * spec.trials, 0.0);

    parallel_for(G * spec.trials, spec.workers, [&](std::size_t job) {
        const std::size_t g = job / spec.trials;
        const std::size_t l = job % spec.trials;
        Scenario s = example1_setup();
        s.duration_s = spec.duration_s;
        TimeIndex N = spec.fixed_N;
        double tau = spec.fixed_tau;
        if (spec.variable == SweepVariable::horizon)
            N = static_cast<TimeIndex>(std::llround(spec.grid[g]));
        else
            tau = spec.grid[g];
        s.sensors = BinarySensorBank<double>(Vector::Constant(1, tau), Vector::Constant(1, spec.rho_V));
        s.noise.rho_V = Vector::Constant(1, spec.rho_V);

        const TrialInit init = draw_initial_conditions(s, spec.seed, l);
        const Trajectory<double> traj = simulate_trial(s, init, spec.seed, l);
        const auto windows = run_windows(traj, s.sensors, N);
        if (windows.empty()) return;
        const auto powers = output_power_table(s.model, N);
        double d = std::numeric_limits<double>::infinity();
        std::size_t full = 0;
        for (const auto& w : windows) {
            const auto rep = observability_matrix(powers, s.model.n(), w);
            d = std::min(d, rep.delta_t);
            if (rep.rank == s.model.n()) ++full;
        }
        delta[job] = d;
        full_rank[job] = static_cast<double>(full) / static_cast<double>(windows.size());
    });

    std::vector<ObservabilityPoint> out;
    for (std::size_t g = 0; g < G; ++g) {
        ObservabilityPoint pt;
        pt.value = spec.grid[g];
        pt.delta_min = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < spec.trials; ++l) {
            const double d = delta[g * spec.trials + l];
            pt.delta_mean += d;
            pt.delta_min = std::min(pt.delta_min, d);
            pt.rank_fraction += full_rank[g * spec.trials + l];
        }
        pt.delta_mean /= static_cast<double>(spec.trials);
        pt.rank_fraction /= static_cast<double>(spec.trials);
        out.push_back(pt);
    }
    return out;
}

std::vector<TimingRow> timing_table(const std::vector<TimeIndex>& horizons, std::uint64_t seed,
                                    std::size_t extra_steps) {
    std::vector<TimingRow> rows;
    for (TimeIndex N : horizons) {
        if (N < 1) throw ConfigurationError("timing_table: horizons must be >= 1");
        Scenario s = example1_setup();
        s.config.horizon = N;
        s.config.shrinking_warmup = false;
        s.duration_s = static_cast<double>(static_cast<std::size_t>(N) + extra_steps) * s.Ts;
        const TrialInit init = draw_initial_conditions(s, seed, 0);
        const Trajectory<double> traj = simulate_trial(s, init, seed, 0);

        TimingRow row;
        row.N = N;
        auto time_of = [&](Variant v, bool warm) {
            MheState state(s.model, s.sensors, s.config, v, init.prior);
            state.set_warm_start(warm);
            std::vector<double> times;
            for (const auto& rec : run(state, traj)) times.push_back(rec.wall_time_s);
            return median(times);
        };
        row.lsmhe_s = time_of(Variant::lsmhe, true);
        row.pwmhe_s = time_of(Variant::pwmhe, true);
        row.pwmhe_cold_s = time_of(Variant::pwmhe, false);
        rows.push_back(row);
    }
    return rows;
}

std::vector<ArmsePoint> sweep_armse(ArmseVariable variable, const std::vector<double>& grid, std::size_t trials,
                                    std::uint64_t seed, Variant variant, std::size_t workers) {
    if (grid.empty()) throw ConfigurationError("sweep_armse: empty grid");
    std::vector<ArmsePoint> out;
    for (double value : grid) {
        MonteCarloSpec spec{.scenario = example1_setup()};
        Scenario& s = spec.scenario;
        s.duration_s = 40.0;
        if (variable == ArmseVariable::threshold) {
            s.sensors = BinarySensorBank<double>(Vector::Constant(1, value), s.noise.rho_V);
        } else {
            s.noise.rho_V = Vector::Constant(1, value);
            s.sensors = BinarySensorBank<double>(s.sensors.thresholds, s.noise.rho_V);
        }
        spec.trials = trials;
        spec.variants = {variant};
        spec.seed = seed;
        spec.workers = workers;
        const MonteCarloResult r = monte_carlo(spec);
        out.push_back({value, armse(r.of(variant).series)});
    }
    return out;
}

StabilityRun stability_run(const Scenario& s, std::uint64_t seed, std::uint64_t trial, Variant variant,
                           double tail_from_s) {
    const TrialInit init = draw_initial_conditions(s, seed, trial);
    const Trajectory<double> traj = simulate_trial(s, init, seed, trial);
    const TimeIndex N = s.config.horizon;

    StabilityRun out;
    const auto windows = run_windows(traj, s.sensors, N);
    if (windows.empty()) throw InvalidInputError("stability_run: run shorter than the horizon");
    out.delta = uniform_delta(s.model, windows);
    PhiTracker phi;
    for (const auto& w : windows) phi.observe(s.model, w);
    out.phi_bar = phi.value();

    MheState state(s.model, s.sensors, s.config, variant, init.prior);
    std::size_t tail_begin = std::numeric_limits<std::size_t>::max();
    for (const auto& rec : run(state, traj)) {
        if (rec.t < N) continue;
        if (tail_begin == std::numeric_limits<std::size_t>::max() && static_cast<double>(rec.t) * s.Ts >= tail_from_s - 1e-9)
            tail_begin = out.start_errors.size();
        out.start_errors.push_back(rec.start_error);
    }
    const StateRadius radius =
        (variant == Variant::lsmhe || !s.config.state_box) ? StateRadius::state_set : StateRadius::box;
    out.constants = compute_constants(s.config, s.model, s.noise, out.delta, out.phi_bar, radius);
    out.check = check_error_recursion(out.start_errors, s.config.P, out.constants,
                                      std::min(tail_begin, out.start_errors.size()));
    return out;
}

}  // namespace binmhe
