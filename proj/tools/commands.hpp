#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hsu::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,    // bad flags, unreadable or malformed files, shape mismatches
  kNumeric = 3,  // solver produced non-finite values
};

struct SynthOptions {
  std::string preset = "i1";
  long rows = 100;
  long cols = 100;
  long bands = 207;
  int endmembers = 3;
  double snr_db = 25.0;
  std::uint64_t seed = 1;
  double beta = 0.8;
  int potts_sweeps = 100;
  std::filesystem::path out_dir;
};

struct UnmixOptions {
  std::string method = "nusal";
  int order = 2;
  int dct_dim = 20;
  std::optional<double> tau1;
  std::optional<double> tau2;
  std::filesystem::path cube;
  std::filesystem::path endmembers;
  std::filesystem::path out_dir;
  double mu0 = 0.05;
  double tol = 1e-4;
  int max_iter = 1000;
  bool no_adapt = false;
  std::string stop_rule = "both";
  bool history = false;
  bool grid = false;
  std::optional<std::filesystem::path> truth;
  std::uint64_t seed = 0;
};

struct EvalOptions {
  std::filesystem::path abundances;
  std::optional<std::filesystem::path> truth;
  std::optional<std::filesystem::path> labels;
  std::filesystem::path cube;
  std::optional<std::filesystem::path> reconstruction;
  std::optional<std::filesystem::path> endmembers;
  std::optional<std::filesystem::path> run_manifest;
  std::filesystem::path out_dir;
};

struct ExportOptions {
  std::filesystem::path abundances;
  std::optional<std::filesystem::path> cube;
  long rows = 0;
  long cols = 0;
  std::optional<std::filesystem::path> coeffs;
  std::optional<std::filesystem::path> endmembers;
  int order = 2;
  std::filesystem::path out_dir;
};

// Each command throws hsu::Error subclasses; run() maps them to exit codes.
void cmd_synth(const SynthOptions& opts, std::ostream& out);
void cmd_unmix(const UnmixOptions& opts, std::ostream& out);
void cmd_eval(const EvalOptions& opts, std::ostream& out);
void cmd_export_maps(const ExportOptions& opts, std::ostream& out);

/// Parses `args` (without the program name) and runs the subcommand.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hsu::cli
