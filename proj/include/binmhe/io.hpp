#pragma once

// CSV and JSON artifacts. CSV files: header on the first row, comma
// separated, LF line endings, floats in shortest round-trip form.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "binmhe/experiments.hpp"

namespace binmhe {

class IoError : public Error {
public:
    using Error::Error;
};

/// Shortest decimal that parses back to the same double.
std::string format_double(double value);

/// Writes text atomically enough for our purposes: creates parent
/// directories and truncates the target.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// Rows of a CSV file split on commas; the header row is returned separately.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

// Model documents: {"n", "m", "p", "Ts", "A", "B", "C"} with matrices flat
// in row-major order.
nlohmann::json model_to_json(const LtiModel<double>& model, double Ts);
LtiModel<double> model_from_json(const nlohmann::json& doc);

/// Columns: step, time_s, x0..x{n-1}, u0.., z0.. (u and z blank where absent).
std::string trajectory_csv(const Trajectory<double>& trajectory, double Ts);
/// States and inputs back from trajectory_csv output.
Trajectory<double> trajectory_from_csv(const CsvTable& table, Eigen::Index n, Eigen::Index m, Eigen::Index p);

/// Long format: time, sensor_index, y.
std::string measurements_csv(const std::vector<BinaryVector>& readings);
std::vector<BinaryVector> measurements_from_csv(const CsvTable& table, Eigen::Index p);

/// t, variant, start_0.., current_0.., cost, iterations, wall_time_s.
/// Without timing the wall-time column is written as 0.
std::string estimates_csv(const std::vector<StepRecord>& records, Variant variant, Eigen::Index n, bool timing);

/// window, solver, iterations, residual, status, fallback, wall_time_s.
std::string diagnostics_csv(const std::vector<StepRecord>& records, Variant variant, bool timing);

/// sweep_variable, value, delta_mean, delta_min, rank_fraction.
std::string observability_csv(SweepVariable variable, const std::vector<ObservabilityPoint>& points);

/// time_s, then rmse_<variant> for every variant in the result.
std::string rmse_csv(const MonteCarloResult& result);

/// N, lsmhe_s, pwmhe_s, pwmhe_cold_s.
std::string timing_csv(const std::vector<TimingRow>& rows);

/// sweep_variable, value, armse.
std::string armse_csv(ArmseVariable variable, const std::vector<ArmsePoint>& points);

nlohmann::json constants_to_json(const StabilityConstants& k);
nlohmann::json certificate_to_json(const EpsilonCertificate& c);

}  // namespace binmhe
