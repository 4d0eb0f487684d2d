// binmhe: simulate plants with binary sensors, run the moving-horizon
// estimators on recorded readings, and regenerate the figure and table
// analogs.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "binmhe/experiments.hpp"
#include "binmhe/io.hpp"
#include "binmhe/observability.hpp"
#include "binmhe/plot_scripts.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace binmhe;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_runtime = 2;

// Schema errors are reported with exit code 1, everything else with 2.
class SchemaError : public Error {
public:
    using Error::Error;
};

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw SchemaError(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw SchemaError(where + ": unknown key '" + key + "'");
}

double get_number(const json& obj, const char* key, double fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number()) throw SchemaError(where + "." + key + ": expected a number");
    return obj[key].get<double>();
}

long long get_int(const json& obj, const char* key, long long fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_number_integer()) throw SchemaError(where + "." + key + ": expected an integer");
    return obj[key].get<long long>();
}

bool get_bool(const json& obj, const char* key, bool fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    if (!obj[key].is_boolean()) throw SchemaError(where + "." + key + ": expected true or false");
    return obj[key].get<bool>();
}

std::optional<Vector> get_vector(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) return std::nullopt;
    const json& a = obj[key];
    if (!a.is_array()) throw SchemaError(where + "." + key + ": expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].is_number()) throw SchemaError(where + "." + key + ": expected an array of numbers");
        v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    }
    return v;
}

std::vector<double> get_grid(const json& obj, const char* key, std::vector<double> fallback, const std::string& where) {
    auto v = get_vector(obj, key, where);
    if (!v) return fallback;
    if (v->size() == 0) throw SchemaError(where + "." + key + ": grid must not be empty");
    return {v->data(), v->data() + v->size()};
}

fs::path existing_file(const json& doc, const char* key, const fs::path& base) {
    if (!doc[key].is_string()) throw SchemaError(std::string(key) + ": expected a path");
    fs::path p = doc[key].get<std::string>();
    if (p.is_relative()) p = base / p;
    if (!fs::is_regular_file(p)) throw SchemaError(std::string(key) + ": file '" + p.string() + "' does not exist");
    return p;
}

struct AnalyzeOptions {
    bool stability{true};
    bool observability{false};
    bool rmse{false};
    bool timing{false};
    bool armse{false};
    std::vector<double> grid_N{1, 5, 10, 20, 35, 50, 75, 100, 150};
    std::vector<double> grid_tau{-1.5, -1, -0.75, -0.5, -0.25, 0, 0.25, 0.5, 0.75, 1, 1.5};
    std::vector<double> grid_rho_V{0.01, 0.05, 0.1, 0.2, 0.3};
    std::vector<double> horizons{1, 5, 20, 35, 50, 100, 150};
    std::size_t sweep_trials{20};
};

struct RunConfig {
    Scenario scenario = example1_setup();
    std::vector<Variant> variants{Variant::lsmhe, Variant::pwmhe};
    std::size_t trials{1};
    std::uint64_t seed{1};
    std::size_t workers{0};
    fs::path out_dir{"out"};
    bool timing{true};
    ConstraintOptions constraints;
    std::optional<fs::path> measurements;
    std::optional<fs::path> trajectory;
    AnalyzeOptions analyze;
};

Scenario custom_scenario(const json& doc, const fs::path& base) {
    if (!doc.contains("model_file")) throw SchemaError("scenario 'custom' needs model_file");
    const fs::path mp = existing_file(doc, "model_file", base);
    json mdoc;
    try {
        mdoc = json::parse(read_text(mp));
    } catch (const json::parse_error& e) {
        throw SchemaError("model_file: " + std::string(e.what()));
    }
    std::optional<LtiModel<double>> model;
    try {
        model = model_from_json(mdoc);
    } catch (const Error& e) {
        throw SchemaError(e.what());
    }
    const Vector zeros = Vector::Zero(model->p());
    Scenario s{.name = "custom", .model = *model, .sensors = BinarySensorBank<double>(zeros, zeros)};
    s.Ts = get_number(mdoc, "Ts", 0.1, "model");
    const Eigen::Index n = s.model.n(), p = s.model.p();
    auto tau = get_vector(doc, "thresholds", "config");
    if (!tau || tau->size() != p) throw SchemaError("config.thresholds: need one threshold per sensor");
    auto x0 = get_vector(doc, "initial_state", "config");
    if (!x0 || x0->size() != n) throw SchemaError("config.initial_state: need n entries");
    s.initial = InitialCondition::nominal_plus_box;
    s.nominal_state = *x0;
    s.state_half_width = get_number(doc, "initial_half_width", 0.0, "config");
    s.prior_half_width = get_number(doc, "prior_half_width", 0.0, "config");
    s.prior_centered_at_zero = get_bool(doc, "prior_centered_at_zero", false, "config");
    s.sensors = BinarySensorBank<double>(*tau, Vector::Zero(p));
    s.duration_s = 10.0;
    s.config.P = 1e-5 * Matrix::Identity(n, n);
    s.config.Q = Matrix::Identity(n, n);
    s.config.R = Vector::Ones(p);
    s.config.horizon = 20;
    s.noise.rho_V = Vector::Zero(p);
    s.noise.rho_X = x0->norm() + s.state_half_width * std::sqrt(static_cast<double>(n));
    return s;
}

void apply_estimator(const json& e, Scenario& s) {
    reject_unknown(e, {"epsilon", "P", "Q", "Q_scale", "R", "horizon", "state_box", "switching_charge",
                       "shrinking_warmup", "tolerance", "max_iterations"},
                   "estimator");
    const Eigen::Index n = s.model.n(), p = s.model.p();
    auto square = [&](const char* key) {
        auto v = get_vector(e, key, "estimator");
        if (v->size() != n * n) throw SchemaError(std::string("estimator.") + key + ": need n*n entries");
        return Matrix(Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            v->data(), n, n));
    };
    if (e.contains("epsilon") && e.contains("P")) throw SchemaError("estimator: give either epsilon or P");
    if (e.contains("epsilon")) s.config.P = get_number(e, "epsilon", 0, "estimator") * Matrix::Identity(n, n);
    if (e.contains("P")) s.config.P = square("P");
    if (e.contains("Q") && e.contains("Q_scale")) throw SchemaError("estimator: give either Q or Q_scale");
    if (e.contains("Q_scale")) s.config.Q = get_number(e, "Q_scale", 1, "estimator") * Matrix::Identity(n, n);
    if (e.contains("Q")) s.config.Q = square("Q");
    if (auto R = get_vector(e, "R", "estimator")) s.config.R = *R;
    s.config.horizon = get_int(e, "horizon", s.config.horizon, "estimator");
    if (e.contains("state_box")) {
        if (e["state_box"].is_null())
            s.config.state_box.reset();
        else
            s.config.state_box = StateBox<double>::symmetric(n, get_number(e, "state_box", 0, "estimator"));
    }
    if (e.contains("switching_charge")) {
        const std::string c = e["switching_charge"].is_string() ? e["switching_charge"].get<std::string>() : "";
        if (c == "window_start")
            s.config.switching_charge = SwitchingCharge::window_start;
        else if (c == "midpoint")
            s.config.switching_charge = SwitchingCharge::midpoint;
        else
            throw SchemaError("estimator.switching_charge: expected \"window_start\" or \"midpoint\"");
    }
    s.config.shrinking_warmup = get_bool(e, "shrinking_warmup", s.config.shrinking_warmup, "estimator");
    s.config.solver.tolerance = get_number(e, "tolerance", s.config.solver.tolerance, "estimator");
    s.config.solver.max_iterations =
        static_cast<int>(get_int(e, "max_iterations", s.config.solver.max_iterations, "estimator"));
    try {
        s.config.validate(n, p);
    } catch (const ConfigurationError& err) {
        throw SchemaError(err.what());
    }
}

void apply_noise(const json& j, Scenario& s) {
    reject_unknown(j, {"rho_W", "rho_V", "rho_X", "rho_U"}, "noise");
    s.noise.rho_W = get_number(j, "rho_W", s.noise.rho_W, "noise");
    s.noise.rho_X = get_number(j, "rho_X", s.noise.rho_X, "noise");
    s.noise.rho_U = get_number(j, "rho_U", s.noise.rho_U, "noise");
    if (auto v = get_vector(j, "rho_V", "noise")) s.noise.rho_V = *v;
    try {
        s.noise.validate(s.model.p());
    } catch (const Error& e) {
        throw SchemaError(e.what());
    }
    s.sensors = BinarySensorBank<double>(s.sensors.thresholds, s.noise.rho_V);
}

AnalyzeOptions parse_analyze(const json& j) {
    reject_unknown(j, {"stability", "observability", "rmse", "timing", "armse", "grid_N", "grid_tau", "grid_rho_V",
                       "horizons", "sweep_trials"},
                   "analyze");
    AnalyzeOptions a;
    a.stability = get_bool(j, "stability", a.stability, "analyze");
    a.observability = get_bool(j, "observability", a.observability, "analyze");
    a.rmse = get_bool(j, "rmse", a.rmse, "analyze");
    a.timing = get_bool(j, "timing", a.timing, "analyze");
    a.armse = get_bool(j, "armse", a.armse, "analyze");
    a.grid_N = get_grid(j, "grid_N", a.grid_N, "analyze");
    a.grid_tau = get_grid(j, "grid_tau", a.grid_tau, "analyze");
    a.grid_rho_V = get_grid(j, "grid_rho_V", a.grid_rho_V, "analyze");
    a.horizons = get_grid(j, "horizons", a.horizons, "analyze");
    const long long t = get_int(j, "sweep_trials", 20, "analyze");
    if (t < 1) throw SchemaError("analyze.sweep_trials: must be >= 1");
    a.sweep_trials = static_cast<std::size_t>(t);
    return a;
}

RunConfig parse_config(const json& doc, const fs::path& base) {
    reject_unknown(doc, {"scenario", "model_file", "thresholds", "initial_state", "initial_half_width",
                         "prior_half_width", "prior_centered_at_zero", "duration_s", "trials", "seed", "out_dir",
                         "variants", "workers", "timing", "estimator", "noise", "constraints", "measurements",
                         "trajectory", "analyze"},
                   "config");
    RunConfig c;
    const std::string name = doc.contains("scenario") && doc["scenario"].is_string()
                                 ? doc["scenario"].get<std::string>()
                                 : (doc.contains("scenario") ? throw SchemaError("config.scenario: expected a string")
                                                             : std::string("example1"));
    if (name == "example1")
        c.scenario = example1_setup();
    else if (name == "example2")
        c.scenario = example2_setup();
    else if (name == "custom")
        c.scenario = custom_scenario(doc, base);
    else
        throw SchemaError("config.scenario: expected example1, example2 or custom");
    if (name != "custom")
        for (const char* k : {"model_file", "thresholds", "initial_state", "initial_half_width", "prior_half_width",
                              "prior_centered_at_zero"})
            if (doc.contains(k)) throw SchemaError(std::string("config.") + k + ": only valid with scenario custom");

    if (doc.contains("duration_s")) {
        const double d = get_number(doc, "duration_s", 0, "config");
        if (!(d > 0)) throw SchemaError("config.duration_s: must be positive");
        c.scenario.duration_s = d;
    }
    const long long trials = get_int(doc, "trials", 1, "config");
    if (trials < 1) throw SchemaError("config.trials: must be >= 1");
    c.trials = static_cast<std::size_t>(trials);
    const long long seed = get_int(doc, "seed", 1, "config");
    if (seed < 0) throw SchemaError("config.seed: must be nonnegative");
    c.seed = static_cast<std::uint64_t>(seed);
    const long long workers = get_int(doc, "workers", 0, "config");
    if (workers < 0) throw SchemaError("config.workers: must be nonnegative");
    c.workers = static_cast<std::size_t>(workers);
    if (doc.contains("out_dir")) {
        if (!doc["out_dir"].is_string()) throw SchemaError("config.out_dir: expected a string");
        c.out_dir = doc["out_dir"].get<std::string>();
    }
    c.timing = get_bool(doc, "timing", true, "config");
    if (doc.contains("variants")) {
        if (!doc["variants"].is_array() || doc["variants"].empty())
            throw SchemaError("config.variants: expected a non-empty array");
        c.variants.clear();
        for (const auto& v : doc["variants"]) {
            if (!v.is_string()) throw SchemaError("config.variants: expected strings");
            try {
                c.variants.push_back(parse_variant(v.get<std::string>()));
            } catch (const ConfigurationError& e) {
                throw SchemaError(e.what());
            }
        }
    }
    if (doc.contains("noise")) apply_noise(doc["noise"], c.scenario);
    if (doc.contains("estimator")) apply_estimator(doc["estimator"], c.scenario);
    if (doc.contains("constraints")) {
        const json& k = doc["constraints"];
        reject_unknown(k, {"thresholds", "disturbance_bound"}, "constraints");
        c.constraints.thresholds = get_bool(k, "thresholds", true, "constraints");
        if (auto b = get_vector(k, "disturbance_bound", "constraints")) {
            if (b->size() != c.scenario.model.n()) throw SchemaError("constraints.disturbance_bound: need n entries");
            c.constraints.disturbance_bound = *b;
        }
    }
    if (doc.contains("measurements")) c.measurements = existing_file(doc, "measurements", base);
    if (doc.contains("trajectory")) c.trajectory = existing_file(doc, "trajectory", base);
    if (doc.contains("analyze")) c.analyze = parse_analyze(doc["analyze"]);
    return c;
}

RunConfig load_config(const std::string& path) {
    if (path.empty()) return parse_config(json::object(), fs::current_path());
    if (!fs::is_regular_file(path)) throw SchemaError("config file '" + path + "' does not exist");
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw SchemaError("config: " + std::string(e.what()));
    }
    return parse_config(doc, fs::path(path).parent_path());
}

void note(const fs::path& p) { std::cout << "wrote " << p.string() << '\n'; }

void emit(const fs::path& p, const std::string& text) {
    write_text(p, text);
    note(p);
}

void cmd_simulate(const RunConfig& c) {
    const TrialInit init = draw_initial_conditions(c.scenario, c.seed, 0);
    const Trajectory<double> traj = simulate_trial(c.scenario, init, c.seed, 0);
    emit(c.out_dir / "trajectory.csv", trajectory_csv(traj, c.scenario.Ts));
    emit(c.out_dir / "measurements.csv", measurements_csv(binarize_outputs(traj, c.scenario.sensors)));
    emit(c.out_dir / "model.json", model_to_json(c.scenario.model, c.scenario.Ts).dump(2) + "\n");
}

void cmd_estimate(const RunConfig& c) {
    if (!c.measurements) throw SchemaError("estimate: no measurement file (set \"measurements\" or --measurements)");
    const Scenario& s = c.scenario;
    const std::vector<BinaryVector> readings = measurements_from_csv(read_csv(*c.measurements), s.model.p());
    if (readings.empty()) throw InvalidMeasurementError("estimate: measurement file holds no readings");

    std::optional<Trajectory<double>> truth;
    if (c.trajectory) truth = trajectory_from_csv(read_csv(*c.trajectory), s.model.n(), s.model.m(), 0);
    if (s.model.m() > 0 && (!truth || truth->inputs.size() + 1 < readings.size()))
        throw SchemaError("estimate: the model has inputs; give a trajectory file with u columns");

    const TrialInit init = draw_initial_conditions(s, c.seed, 0);
    for (Variant v : c.variants) {
        MheState state(s.model, s.sensors, s.config, v, init.prior, c.constraints);
        std::vector<StepRecord> records;
        const Vector zero_u = s.model.zero_input();
        for (std::size_t t = 0; t < readings.size(); ++t) {
            const Vector& u = truth && t < truth->inputs.size() ? truth->inputs[t] : zero_u;
            auto rec = state.step(u, readings[t]);
            if (rec) records.push_back(std::move(*rec));
        }
        const std::string name = to_string(v);
        emit(c.out_dir / ("estimates_" + name + ".csv"), estimates_csv(records, v, s.model.n(), c.timing));
        emit(c.out_dir / ("diagnostics_" + name + ".csv"), diagnostics_csv(records, v, c.timing));
    }
}

json stability_report(const RunConfig& c) {
    const Scenario& s = c.scenario;
    const StabilityRun run = stability_run(s, c.seed, 0, Variant::pwmhe);
    const StateRadius radius = s.config.state_box ? StateRadius::box : StateRadius::state_set;
    const StabilityInputs in = make_stability_inputs(s.config, s.model, s.noise, run.delta, run.phi_bar, radius);
    json report{{"scenario", s.name}, {"seed", c.seed}, {"delta", run.delta}, {"phi_bar", run.phi_bar}};
    report["constants"] = constants_to_json(run.constants);
    const Matrix Pbar = Matrix::Identity(s.model.n(), s.model.n());
    try {
        const EpsilonCertificate cert = find_epsilon(in, Pbar);
        report["certificate"] = certificate_to_json(cert);
        if (!cert.unbounded) {
            // at the certificate itself a1 is 1 and e_inf blows up; back off by half
            const double eps = 0.5 * cert.epsilon;
            Scenario certified = s;
            certified.config.P = eps * Pbar;
            const StabilityRun cr = stability_run(certified, c.seed, 0, Variant::pwmhe);
            report["certified_run"] = {{"epsilon", eps},
                                       {"a1", cr.constants.a1},
                                       {"a2", cr.constants.a2},
                                       {"pairs", cr.check.pairs},
                                       {"violations", cr.check.violations},
                                       {"tail_max", cr.check.tail_max},
                                       {"e_inf", cr.check.e_inf ? json(*cr.check.e_inf) : json(nullptr)}};
        }
    } catch (const NoSolutionError& e) {
        report["certificate"] = {{"error", e.what()}};
    }
    report["recursion"] = {{"pairs", run.check.pairs},
                           {"violations", run.check.violations},
                           {"worst_excess", run.check.worst_excess},
                           {"tail_max", run.check.tail_max}};
    return report;
}

std::vector<TimeIndex> to_horizons(const std::vector<double>& g) {
    std::vector<TimeIndex> out;
    for (double v : g) {
        if (v < 1 || v != std::floor(v)) throw SchemaError("horizon grids must hold positive integers");
        out.push_back(static_cast<TimeIndex>(v));
    }
    return out;
}

ObservabilitySweepSpec sweep_spec(const RunConfig& c, SweepVariable var, const std::vector<double>& grid) {
    ObservabilitySweepSpec spec;
    spec.variable = var;
    spec.grid = grid;
    spec.trials = c.analyze.sweep_trials;
    spec.seed = c.seed;
    spec.workers = c.workers;
    if (var == SweepVariable::horizon) to_horizons(grid);
    return spec;
}

MonteCarloResult rmse_run(const RunConfig& c, const Scenario& s, std::size_t trials) {
    MonteCarloSpec spec{.scenario = s};
    spec.trials = trials;
    spec.variants = c.variants;
    spec.seed = c.seed;
    spec.workers = c.workers;
    spec.constraints = c.constraints;
    MonteCarloResult r = monte_carlo(spec);
    for (const auto& v : r.variants)
        for (const auto& f : v.failures) std::cerr << "warning: " << to_string(v.variant) << " " << f << '\n';
    return r;
}

void cmd_analyze(const RunConfig& c) {
    const AnalyzeOptions& a = c.analyze;
    if (a.stability) emit(c.out_dir / "stability.json", stability_report(c).dump(2) + "\n");
    if (a.observability) {
        emit(c.out_dir / "observability_N.csv",
             observability_csv(SweepVariable::horizon,
                               sweep_observability(sweep_spec(c, SweepVariable::horizon, a.grid_N))));
        emit(c.out_dir / "observability_tau.csv",
             observability_csv(SweepVariable::threshold,
                               sweep_observability(sweep_spec(c, SweepVariable::threshold, a.grid_tau))));
    }
    if (a.rmse) emit(c.out_dir / ("rmse_" + c.scenario.name + ".csv"), rmse_csv(rmse_run(c, c.scenario, c.trials)));
    if (a.armse) {
        const Variant v = c.variants.front();
        emit(c.out_dir / "armse_tau.csv",
             armse_csv(ArmseVariable::threshold, sweep_armse(ArmseVariable::threshold, a.grid_tau, c.trials, c.seed, v,
                                                             c.workers)));
        emit(c.out_dir / "armse_rho_v.csv",
             armse_csv(ArmseVariable::noise,
                       sweep_armse(ArmseVariable::noise, a.grid_rho_V, c.trials, c.seed, v, c.workers)));
    }
    if (a.timing) emit(c.out_dir / "timing.csv", timing_csv(timing_table(to_horizons(a.horizons), c.seed)));
}

// Figure and table analogs with fixed seeds and trial counts.
void cmd_reproduce(const RunConfig& c) {
    RunConfig r = c;
    r.variants = {Variant::lsmhe, Variant::pwmhe};

    r.analyze = AnalyzeOptions{};
    r.analyze.observability = true;
    r.analyze.timing = c.timing;
    r.analyze.stability = false;
    cmd_analyze(r);

    // ARMSE sweeps use the least-squares estimator, as in the figure.
    {
        RunConfig ar = r;
        ar.variants = {Variant::lsmhe};
        ar.analyze = AnalyzeOptions{};
        ar.analyze.stability = false;
        ar.analyze.armse = true;
        ar.analyze.grid_tau = {-1, -0.75, -0.5, -0.25, 0, 0.25, 0.5, 0.75, 1};
        ar.trials = 10;
        cmd_analyze(ar);
    }

    emit(r.out_dir / "rmse_example1.csv", rmse_csv(rmse_run(r, example1_setup(), 20)));
    emit(r.out_dir / "rmse_example2.csv", rmse_csv(rmse_run(r, example2_setup(), 10)));

    RunConfig st = r;
    st.scenario = example1_setup();
    emit(r.out_dir / "stability_example1.json", stability_report(st).dump(2) + "\n");
    st.scenario = example2_setup();
    emit(r.out_dir / "stability_example2.json", stability_report(st).dump(2) + "\n");

    write_plot_scripts(r.out_dir);
    for (const auto& s : plot_scripts()) note(r.out_dir / (s.name + ".py"));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Moving-horizon state estimation with binary sensors"};
    app.require_subcommand(1);

    std::string config_path, out_dir, variant, measurements;
    std::optional<long long> seed;
    std::optional<std::size_t> workers;
    bool no_timing = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--workers", workers, "worker threads (0: all cores)");
        sub->add_flag("--no-timing", no_timing, "write wall times as 0 for byte-identical output");
    };
    CLI::App* sim = app.add_subcommand("simulate", "simulate a trajectory and its binary readings");
    CLI::App* est = app.add_subcommand("estimate", "run estimators on recorded readings");
    CLI::App* ana = app.add_subcommand("analyze", "stability constants, sweeps, RMSE and timing");
    CLI::App* rep = app.add_subcommand("reproduce-paper", "all figure and table analogs");
    for (CLI::App* sub : {sim, est, ana, rep}) common(sub);
    for (CLI::App* sub : {est, ana})
        sub->add_option("--variant", variant, "lsmhe, pwmhe, lsmhe-c or pwmhe-c")
            ->check(CLI::IsMember({"lsmhe", "pwmhe", "lsmhe-c", "pwmhe-c"}));
    est->add_option("--measurements", measurements, "measurement CSV (time,sensor_index,y)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        RunConfig c = load_config(config_path);
        if (seed) {
            if (*seed < 0) throw SchemaError("--seed must be nonnegative");
            c.seed = static_cast<std::uint64_t>(*seed);
        }
        if (workers) c.workers = *workers;
        if (const char* env = std::getenv("BINMHE_OUT_DIR"); env && *env) c.out_dir = env;
        if (!out_dir.empty()) c.out_dir = out_dir;
        if (!variant.empty()) c.variants = {parse_variant(variant)};
        if (no_timing) c.timing = false;
        if (!measurements.empty()) {
            if (!fs::is_regular_file(measurements))
                throw SchemaError("measurement file '" + measurements + "' does not exist");
            c.measurements = measurements;
        }

        if (*sim) cmd_simulate(c);
        if (*est) cmd_estimate(c);
        if (*ana) {
            if (c.analyze.timing) c.workers = 1;
            cmd_analyze(c);
        }
        if (*rep) cmd_reproduce(c);
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return 0;
}
