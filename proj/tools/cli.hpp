#pragma once

// Command-line front end. Everything except argument parsing lives here so the tests can
// drive the subcommands in-process.

#include "koopman/error_analysis.hpp"
#include "koopman/grid.hpp"
#include "koopman/lifting.hpp"
#include "koopman/sdp.hpp"
#include "koopman/synthesis.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace koopman::cli
{

using nlohmann::json;

enum ExitCode : int
{
  exit_ok = 0,
  exit_config = 1,
  exit_infeasible = 2,
  exit_invariance = 3,
  exit_numerical = 4, // certificate failure, non-finite values, rank deficiency
  exit_unstable = 5,
  exit_io = 6,
  exit_internal = 7
};

/// Bad configuration or command line; maps to exit_config.
class ConfigError : public Error
{
public:
  using Error::Error;
};

/// Unreadable or unwritable file; maps to exit_io.
class IoError : public Error
{
public:
  using Error::Error;
};

/// Input signal. `level` is the variance (white), the value (constant) or the amplitude
/// (sine). A white signal may instead be given by its standard deviation in the file.
struct SignalSpec
{
  std::string name;
  std::string kind = "white"; // white | constant | sine
  double level = 0.5;
  double frequency = 1.0;     // sine, Hz
  double sample_time = 0.01;  // sine, seconds per step
  std::size_t length = 600;
  std::uint64_t seed = 1;
};

struct RunConfig
{
  double a1 = 0.7;
  double a2 = 0.7;
  double a3 = 0.5;
  int quad_nodes = 8;
  double invariance_tol = 1e-8;
  bool force = false;

  GridSpec grid;
  bool reduce = true;
  std::optional<std::size_t> subsample_n = 7000;
  std::uint64_t subsample_seed = 1;

  std::string criterion = "both"; // l2 | h2 | both
  double feas_tol = 1e-8;
  double obj_tol = 1e-5;
  int max_iter = 200;
  std::optional<double> margin; // default_margin(A) when empty

  Vector x0;
  std::vector<SignalSpec> signals;
  Matrix reference_bhat_edmd;
  std::string edmd_bhat = "reference"; // reference | estimated: B_hat_EDMD used in table1
  std::string output_dir = "out";

  std::vector<Criterion> criteria() const;
  const SignalSpec& signal(const std::string& name) const;
  SolverOptions solver_options() const;
};

/// The bundled default (example system, grid and signals).
json default_config_json();
RunConfig config_from_json(const json& j);
json config_to_json(const RunConfig& c);

/// Applies `key=value` with a dotted key path (array indices as numbers); the value is
/// parsed as JSON when possible and kept as a string otherwise.
void apply_override(json& j, const std::string& assignment);

/// Parses `kind:level[:frequency]`, e.g. `constant:1`, `white:0.5`, `sine:0.5:1`.
SignalSpec parse_signal(const std::string& text, std::size_t length, std::uint64_t seed,
                        double sample_time);
std::vector<Vector> make_signal(const SignalSpec& s);

/// Model and LMI grid shared by the subcommands.
struct Pipeline
{
  KoopmanLpvModel model;
  SchedulingGrid full_grid;
  SchedulingGrid lmi_grid;
  ReductionReport reduction;
  double margin = 0.0;
  SolverOptions solver;
};

Pipeline build_pipeline(const RunConfig& c);

/// Reads B_hat vectors from JSON: a bare array, an object with "B_hat", or an object of
/// named entries (each one of the former). Returns (name, matrix) pairs in key order.
std::vector<std::pair<std::string, Matrix>> read_bhat(const json& j, const std::string& fallback_name);

// Subcommands. Each writes its artifacts into c.output_dir and returns the exit code;
// library errors propagate as exceptions and are mapped by run().
int cmd_reproduce_paper(const RunConfig& c);
int cmd_synth(const RunConfig& c);
int cmd_analyze(const RunConfig& c, const std::filesystem::path& bhat_file);
int cmd_bound(const RunConfig& c, const std::filesystem::path& bhat_file);
int cmd_simulate(const RunConfig& c, const SignalSpec& signal);
int cmd_edmd(const RunConfig& c, const std::optional<std::filesystem::path>& trajectory_csv,
             const std::string& mode);

/// Exit code for an exception escaping a subcommand.
int exit_code_for(const std::exception& e);

/// Full command line entry point.
int run(int argc, const char* const* argv);

} // namespace koopman::cli
