#include "binmhe/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace binmhe {

namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const char* what) {
    double v = 0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw IoError(std::string("cannot parse ") + what + " '" + s + "'");
    return v;
}

long long parse_int(const std::string& s, const char* what) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw IoError(std::string("cannot parse ") + what + " '" + s + "'");
    return v;
}

json matrix_to_json(const Matrix& M) {
    json a = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i)
        for (Eigen::Index j = 0; j < M.cols(); ++j) a.push_back(M(i, j));
    return a;
}

Matrix matrix_from_json(const json& a, Eigen::Index rows, Eigen::Index cols, const char* name) {
    if (!a.is_array() || static_cast<Eigen::Index>(a.size()) != rows * cols)
        throw ConfigurationError(std::string("model: '") + name + "' must be a flat array of " +
                                 std::to_string(rows * cols) + " numbers");
    Matrix M(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) {
            const json& v = a[static_cast<std::size_t>(i * cols + j)];
            if (!v.is_number()) throw ConfigurationError(std::string("model: '") + name + "' has a non-numeric entry");
            M(i, j) = v.get<double>();
        }
    return M;
}

void append_vector(std::string& line, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        line += ',';
        line += format_double(v(i));
    }
}

}  // namespace

std::string format_double(double value) {
    if (value == 0) return "0";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw IoError("format_double: conversion failed");
    return std::string(buf, ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw IoError("CSV column '" + name + "' not found");
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::istringstream in(read_text(path));
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split(line);
        if (first) {
            t.header = std::move(cells);
            first = false;
            continue;
        }
        if (cells.size() != t.header.size())
            throw IoError("'" + path.string() + "': row " + std::to_string(t.rows.size() + 1) + " has " +
                          std::to_string(cells.size()) + " cells, header has " + std::to_string(t.header.size()));
        t.rows.push_back(std::move(cells));
    }
    if (first) throw IoError("'" + path.string() + "' is empty");
    return t;
}

json model_to_json(const LtiModel<double>& model, double Ts) {
    return json{{"n", model.n()},  {"m", model.m()},  {"p", model.p()},
                {"Ts", Ts},        {"A", matrix_to_json(model.A())},
                {"B", matrix_to_json(model.B())}, {"C", matrix_to_json(model.C())}};
}

LtiModel<double> model_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigurationError("model: expected an object");
    for (const auto& [key, _] : doc.items())
        if (key != "n" && key != "m" && key != "p" && key != "Ts" && key != "A" && key != "B" && key != "C")
            throw ConfigurationError("model: unknown key '" + key + "'");
    auto dim = [&](const char* k) -> Eigen::Index {
        if (!doc.contains(k) || !doc[k].is_number_integer() || doc[k].get<long long>() < 0)
            throw ConfigurationError(std::string("model: '") + k + "' must be a nonnegative integer");
        return static_cast<Eigen::Index>(doc[k].get<long long>());
    };
    const Eigen::Index n = dim("n"), p = dim("p");
    const Eigen::Index m = doc.contains("m") ? dim("m") : 0;
    for (const char* k : {"A", "C"})
        if (!doc.contains(k)) throw ConfigurationError(std::string("model: missing '") + k + "'");
    Matrix B(n, m);
    if (m > 0) {
        if (!doc.contains("B")) throw ConfigurationError("model: missing 'B'");
        B = matrix_from_json(doc["B"], n, m, "B");
    }
    return LtiModel<double>(matrix_from_json(doc["A"], n, n, "A"), B, matrix_from_json(doc["C"], p, n, "C"));
}

std::string trajectory_csv(const Trajectory<double>& tr, double Ts) {
    if (tr.states.empty()) return "step,time_s\n";
    const Eigen::Index n = tr.states.front().size();
    const Eigen::Index m = tr.inputs.empty() ? 0 : tr.inputs.front().size();
    const Eigen::Index p = tr.linear_outputs.empty() ? 0 : tr.linear_outputs.front().size();
    std::string out = "step,time_s";
    for (Eigen::Index i = 0; i < n; ++i) out += ",x" + std::to_string(i);
    for (Eigen::Index i = 0; i < m; ++i) out += ",u" + std::to_string(i);
    for (Eigen::Index i = 0; i < p; ++i) out += ",z" + std::to_string(i);
    out += '\n';
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
        std::string line = std::to_string(t) + ',' + format_double(static_cast<double>(t) * Ts);
        append_vector(line, tr.states[t]);
        if (t < tr.inputs.size())
            append_vector(line, tr.inputs[t]);
        else
            line.append(static_cast<std::size_t>(m), ',');
        if (t < tr.linear_outputs.size())
            append_vector(line, tr.linear_outputs[t]);
        else
            line.append(static_cast<std::size_t>(p), ',');
        out += line;
        out += '\n';
    }
    return out;
}

Trajectory<double> trajectory_from_csv(const CsvTable& table, Eigen::Index n, Eigen::Index m, Eigen::Index p) {
    Trajectory<double> tr;
    std::vector<std::size_t> xc, uc, zc;
    for (Eigen::Index i = 0; i < n; ++i) xc.push_back(table.column("x" + std::to_string(i)));
    for (Eigen::Index i = 0; i < m; ++i) uc.push_back(table.column("u" + std::to_string(i)));
    for (Eigen::Index i = 0; i < p; ++i) zc.push_back(table.column("z" + std::to_string(i)));
    auto read = [](const std::vector<std::string>& row, const std::vector<std::size_t>& cols, Vector& v) {
        if (cols.empty()) {
            v.resize(0);
            return true;
        }
        if (row[cols.front()].empty()) return false;
        v.resize(static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) v(static_cast<Eigen::Index>(k)) = parse_double(row[cols[k]], "value");
        return true;
    };
    for (const auto& row : table.rows) {
        Vector x, u, z;
        read(row, xc, x);
        tr.states.push_back(x);
        if (!uc.empty()) {
            if (read(row, uc, u)) tr.inputs.push_back(u);
        }
        if (read(row, zc, z) && !zc.empty()) tr.linear_outputs.push_back(z);
    }
    if (uc.empty() && !tr.states.empty()) tr.inputs.assign(tr.states.size() - 1, Vector(0));
    return tr;
}

std::string measurements_csv(const std::vector<BinaryVector>& readings) {
    std::string out = "time,sensor_index,y\n";
    for (std::size_t t = 0; t < readings.size(); ++t)
        for (Eigen::Index i = 0; i < readings[t].size(); ++i)
            out += std::to_string(t) + ',' + std::to_string(i) + ',' + std::to_string(readings[t](i)) + '\n';
    return out;
}

std::vector<BinaryVector> measurements_from_csv(const CsvTable& table, Eigen::Index p) {
    const std::size_t ct = table.column("time"), ci = table.column("sensor_index"), cy = table.column("y");
    std::vector<BinaryVector> out;
    std::vector<std::vector<bool>> seen;
    for (const auto& row : table.rows) {
        const long long t = parse_int(row[ct], "time");
        const long long i = parse_int(row[ci], "sensor_index");
        const long long y = parse_int(row[cy], "y");
        if (t < 0) throw InvalidMeasurementError("measurements: negative time");
        if (i < 0 || i >= p) throw InvalidMeasurementError("measurements: sensor_index out of range");
        if (y != 1 && y != -1) throw InvalidMeasurementError("measurements: y must be -1 or +1");
        const auto tt = static_cast<std::size_t>(t);
        while (out.size() <= tt) {
            out.push_back(BinaryVector::Zero(p));
            seen.emplace_back(static_cast<std::size_t>(p), false);
        }
        out[tt](i) = static_cast<int>(y);
        seen[tt][static_cast<std::size_t>(i)] = true;
    }
    for (std::size_t t = 0; t < seen.size(); ++t)
        for (std::size_t i = 0; i < seen[t].size(); ++i)
            if (!seen[t][i])
                throw InvalidMeasurementError("measurements: missing reading for time " + std::to_string(t) +
                                              ", sensor " + std::to_string(i));
    return out;
}

std::string estimates_csv(const std::vector<StepRecord>& records, Variant variant, Eigen::Index n, bool timing) {
    std::string out = "t,variant";
    for (Eigen::Index i = 0; i < n; ++i) out += ",start_" + std::to_string(i);
    for (Eigen::Index i = 0; i < n; ++i) out += ",current_" + std::to_string(i);
    out += ",cost,iterations,wall_time_s\n";
    const std::string name = to_string(variant);
    for (const auto& r : records) {
        std::string line = std::to_string(r.t) + ',' + name;
        append_vector(line, r.start_estimate);
        append_vector(line, r.current_estimate);
        line += ',' + format_double(r.cost) + ',' + std::to_string(r.iterations) + ',' +
                format_double(timing ? r.wall_time_s : 0.0);
        out += line;
        out += '\n';
    }
    return out;
}

std::string diagnostics_csv(const std::vector<StepRecord>& records, Variant variant, bool timing) {
    std::string out = "window,solver,iterations,residual,status,fallback,wall_time_s\n";
    const std::string name = to_string(variant);
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& r = records[k];
        out += std::to_string(k) + ',' + name + ',' + std::to_string(r.iterations) + ',' + format_double(r.residual) +
               ',' + to_string(r.status) + ',' + (r.constraint_fallback ? "1" : "0") + ',' +
               format_double(timing ? r.wall_time_s : 0.0) + '\n';
    }
    return out;
}

std::string observability_csv(SweepVariable variable, const std::vector<ObservabilityPoint>& points) {
    const char* name = variable == SweepVariable::horizon ? "N" : "tau";
    std::string out = "sweep_variable,value,delta_mean,delta_min,rank_fraction\n";
    for (const auto& pt : points)
        out += std::string(name) + ',' + format_double(pt.value) + ',' + format_double(pt.delta_mean) + ',' +
               format_double(pt.delta_min) + ',' + format_double(pt.rank_fraction) + '\n';
    return out;
}

std::string rmse_csv(const MonteCarloResult& result) {
    std::string out = "time_s";
    for (const auto& v : result.variants) out += ",rmse_" + to_string(v.variant);
    out += '\n';
    if (result.variants.empty()) return out;
    const auto& times = result.variants.front().series.times;
    for (std::size_t k = 0; k < times.size(); ++k) {
        out += format_double(times[k]);
        for (const auto& v : result.variants) {
            out += ',';
            if (k < v.series.rmse.size()) out += format_double(v.series.rmse[k]);
        }
        out += '\n';
    }
    return out;
}

std::string timing_csv(const std::vector<TimingRow>& rows) {
    std::string out = "N,lsmhe_s,pwmhe_s,pwmhe_cold_s\n";
    for (const auto& r : rows)
        out += std::to_string(r.N) + ',' + format_double(r.lsmhe_s) + ',' + format_double(r.pwmhe_s) + ',' +
               format_double(r.pwmhe_cold_s) + '\n';
    return out;
}

std::string armse_csv(ArmseVariable variable, const std::vector<ArmsePoint>& points) {
    const char* name = variable == ArmseVariable::threshold ? "tau" : "rho_V";
    std::string out = "sweep_variable,value,armse\n";
    for (const auto& pt : points)
        out += std::string(name) + ',' + format_double(pt.value) + ',' + format_double(pt.armse) + '\n';
    return out;
}

json constants_to_json(const StabilityConstants& k) {
    json j{{"n", k.n},
           {"p", k.p},
           {"N", k.N},
           {"delta", k.delta},
           {"phi_bar", k.phi_bar},
           {"L_bar", k.L_bar},
           {"C_bar", k.C_bar},
           {"R_bar", k.R_bar},
           {"R_underbar", k.R_underbar},
           {"lambda_min_P", k.lambda_minP},
           {"lambda_max_P", k.lambda_maxP},
           {"lambda_min_Q", k.lambda_minQ},
           {"lambda_max_Q", k.lambda_maxQ},
           {"norm_A", k.norm_A},
           {"norm_A_minus_I", k.norm_A_minus_I},
           {"norm_B", k.norm_B},
           {"rho_state", k.rho_state},
           {"rho_U", k.rho_U},
           {"rho_W", k.rho_W},
           {"rho_V_bar", k.rho_V_bar},
           {"d1", k.d1},
           {"d2", k.d2},
           {"b1", k.b1},
           {"b2", k.b2},
           {"c1", k.c1},
           {"c2", k.c2},
           {"c3", k.c3},
           {"c4", k.c4},
           {"a1", k.a1},
           {"a2", k.a2},
           {"contracting", k.contracting()}};
    j["e_inf"] = k.e_inf ? json(*k.e_inf) : json(nullptr);
    return j;
}

json certificate_to_json(const EpsilonCertificate& c) {
    json j{{"unbounded", c.unbounded}, {"a1_at_epsilon", c.a1_at_epsilon}, {"a1_at_double", c.a1_at_double}};
    j["epsilon"] = c.unbounded ? json(nullptr) : json(c.epsilon);
    return j;
}

}  // namespace binmhe
