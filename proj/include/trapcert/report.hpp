#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "trapcert/certify.hpp"
#include "trapcert/magnetic2d.hpp"
#include "trapcert/potential.hpp"

namespace trapcert {

enum class RunMode { Certify1D, Sweep1D, Certify2D, Spectro };

std::string_view to_string(RunMode mode);

struct SolverBlock {
    std::size_t K = 32;
    double rtol = 1e-8;
    double tail_tol = 1e-10;
    double tau = 1e-10;
};

struct SweepBlock {
    std::string parameter = "lambda";
    std::vector<double> values;
};

struct OutputBlock {
    std::string certificate = "certificate.json";
    std::string summary = "summary.txt";
    std::string csv = "sweep.csv";
    // Companion file with the plot-ready column groups; empty disables it.
    std::string plot_data = "sweep_plot.csv";
};

// Measured ground density sampled on a uniform grid plus the measured gaps.
struct SpectroBlock {
    double delta = 0.0;
    std::optional<double> gamma;
    UnitSystem units;
    double x0 = 0.0;
    double dx = 0.0;
    std::vector<double> rho;
};

struct RunConfig {
    RunMode mode = RunMode::Certify1D;
    // Raw potential fragment; sweeps substitute the swept parameter into it.
    nlohmann::json potential_fragment;
    std::optional<PotentialSpec> potential;
    std::optional<MagneticSetup> setup;
    std::optional<SpectroBlock> spectro;
    SolverBlock solver;
    SweepBlock sweep;
    OutputBlock output;
    std::vector<std::string> warnings;
};

// Validates the whole document. Throws MalformedSpec on schema errors and
// NonConfining for a non-confining potential, so both surface before any
// solve. Duplicate sweep values are dropped with a warning.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

struct Overrides {
    std::optional<std::size_t> K;
    std::optional<double> rtol;
    std::optional<double> tau;
};

void apply_overrides(RunConfig& config, const Overrides& overrides);

// Exit-status contract: 0 all-pass, 1 verdict failure, 2 configuration or
// solver error.
inline constexpr int kExitPass = 0;
inline constexpr int kExitVerdict = 1;
inline constexpr int kExitError = 2;

struct RunResult {
    int exit_code = kExitPass;
    std::vector<std::filesystem::path> files;
    std::vector<std::string> messages;
};

// Numbers use 17 significant digits; keys keep insertion order.
std::string serialize(const nlohmann::ordered_json& doc);
std::string format_double(double value);

nlohmann::ordered_json certificate_json(const Certificate& certificate, const PotentialSpec& spec);
std::string certificate_summary(const Certificate& certificate);

struct SweepRow {
    double value = 0.0;
    std::optional<Certificate> certificate;
    std::string status = "ok";
};

struct SweepTable {
    std::string parameter = "lambda";
    std::vector<SweepRow> rows;

    static const std::vector<std::string>& columns();
    std::string csv() const;
    // Column groups (lambda, epsilon), (lambda, varp, varp_ub, varp_lb) and
    // (lambda, varp / varp_ub), one block each separated by a blank line.
    std::string plot_csv() const;
};

// Worker count from TRAPCERT_WORKERS, else the hardware concurrency.
std::size_t sweep_workers();

// One converged certificate per value, computed on `workers` threads and
// returned in input order. Failures are recorded in the row.
SweepTable compute_sweep(const RunConfig& config, std::size_t workers);

RunResult run_certify_1d(const RunConfig& config, const std::filesystem::path& out_dir);
RunResult run_sweep(const RunConfig& config, const std::filesystem::path& csv_path);
RunResult run_certify_2d(const RunConfig& config, const std::filesystem::path& out_dir);

struct SpectroResult {
    double norm = 0.0;  // integral of the samples before renormalization
    double mean = 0.0;
    double var_x = 0.0;
    double quadrature_error = 0.0;
    double bound_x = 0.0;
    double epsilon = 0.0;
    bool consistent = true;
    // Upper bounds on the tail weight and TRK tail fraction; absent without Gamma.
    std::optional<double> T_max;
    std::optional<double> eta_max;
};

// Throws BadDensity for negative, non-finite or non-normalizable samples.
SpectroResult analyze_spectro(const SpectroBlock& block);
RunResult run_spectro(const RunConfig& config, const std::filesystem::path& out_dir);

// Dispatches on config.mode. `target` is the output directory, or the CSV
// path for sweeps. Errors are caught and mapped to kExitError.
RunResult run(const RunConfig& config, const std::filesystem::path& target);

}  // namespace trapcert
