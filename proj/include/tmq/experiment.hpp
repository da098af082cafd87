#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tmq/analysis.hpp"
#include "tmq/engine.hpp"
#include "tmq/schedule.hpp"

namespace tmq {

// Built-in protocol plus its parameters. Numeric parameters are SI except
// bias_gauss; every builder reads the subset it needs.
struct ScheduleSpec {
    std::string name = "ramsey";  // ramsey cp rabi state_prep shelving clock_coherence hold probe_scan script
    std::string script;           // path, for name = script
    std::map<std::string, double> num;
    std::map<std::string, std::string> str;  // mode, initial, ramsey_detuning

    double get(const std::string& key) const;  // throws ConfigError naming schedule.<key>
};

struct ScanSpec {
    std::string variable;  // empty: single point
    std::vector<double> values;
    std::string observable = "eta4";
};

struct FitSpec {
    std::string model;
    std::string data;
    std::map<std::string, double> init;
    std::vector<std::string> fixed;
    std::vector<std::string> profile;
    int multistart = 1;
};

struct RunConfig {
    std::optional<std::uint64_t> seed;
    int shots = 20;
    std::string out;
    std::string figure;
    ScheduleSpec schedule;
    ScanSpec scan;
    EngineOptions engine;
    bool matched_readout = true;  // clock efficiency and decay matrix follow the engine
    std::string calibration_file;
    FitSpec fit;

    static RunConfig defaults();
    std::uint64_t require_seed() const;  // ConfigError when unset
};

/// INI text with sections run, schedule, scan, constants, noise, loss,
/// engine, readout, fit. Unknown sections or keys are ConfigErrors naming
/// section.key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Fully resolved form; parse_config(serialize_config(c)) resolves to c.
std::string serialize_config(const RunConfig& c);

Schedule resolve_schedule(const RunConfig& c, std::optional<double> scan_value = std::nullopt);

/// Engine whose readout calibration matches its clock-pulse model unless a
/// calibration file or matched_readout = false says otherwise.
Engine make_engine(const RunConfig& c);

/// Per-shot scalar named by ScanSpec::observable: eta4 eta3 eta4_total
/// eta3_total atoms n4 n3 n4_0 n3_0 raw_n4 raw_n3 raw_n4_0 raw_n3_0.
double observable(const ReadoutRecord& r, std::string_view name);

struct SimulationSummary {
    size_t points = 0;
    size_t shots = 0;
    size_t rows = 0;
};

/// One CSV row per (scan point, shot, measurement).
std::string cmd_simulate(const RunConfig& c, SimulationSummary* summary = nullptr);

/// Mean of the observable per scan point with its standard error as sigma
/// (omitted when any point has a single shot or zero spread).
Dataset cmd_scan(const RunConfig& c);

struct FitReport {
    FitResult result;
    std::string json;
    std::string text;  // human-readable summary
};

/// Fits c.fit.model to data. Missing initial values come from per-model
/// heuristics; multistart > 1 perturbs them deterministically.
FitReport cmd_fit(const RunConfig& c, const Dataset& data);

std::vector<double> default_initial_values(const Model& m, const Dataset& d, const RunConfig& c);

// Probe-duration scan reduced to per-point mean raw counts.
struct ProbeScan {
    std::vector<double> probe;
    std::vector<double> n4, n4_sigma;
    std::vector<double> n3, n3_sigma;
};

/// Aggregates simulate rows of a probe_scan run (label N4 and N3 raw counts).
ProbeScan probe_scan_from_rows(std::string_view simulate_csv);

struct CalibrationFit {
    CrosstalkCalibration calibration;
    double eps_sigma = 0.0;
    double dep_sigma = 0.0;
    FitResult depletion;  // exponential on N3
    FitResult growth;     // quadratic_growth on N4 up to the quadratic limit
};

CalibrationFit cmd_calibrate_readout(const ProbeScan& scan, const CrosstalkCalibration& base);

// Column-oriented CSV table; numeric cells are formatted round-trip exact.
struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
    size_t column(std::string_view name) const;  // throws ConfigError
    double number(size_t row, std::string_view col) const;
    std::string csv() const;
};

std::string cell(double v);

inline const std::vector<std::string>& figure_ids() {
    static const std::vector<std::string> ids{"fig2e", "fig4", "fig5", "fig6", "fig7", "fig8", "fig10"};
    return ids;
}

/// Simulated points plus model overlays for one figure. Shots and seed come
/// from the config; protocols use the built-in defaults.
std::vector<Table> cmd_reproduce(const std::string& figure, const RunConfig& c);

}  // namespace tmq
