#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cl3d/cli/config.hpp"

namespace cl3d {

// Exit codes shared by every command.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitData = 3, kExitNumerical = 4 };

int exit_code_for(ErrorKind kind);

// Generates a synthetic dataset (from a spec file, or the built-in benchmark
// when `spec_path` is empty) and writes it under `out_dir`. Returns the
// manifest path.
std::filesystem::path cmd_gen_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir,
                                    std::optional<std::uint64_t> seed);

// Exemplar report for every class, or only `class_name`. Written to
// <output_dir>/exemplars.json; the document is also returned.
nlohmann::json cmd_select(const ExperimentConfig& config, const std::optional<std::string>& class_name);

struct RunOutputs {
  std::vector<RunReport> reports;
  std::filesystem::path json_path, csv_path, checkpoint_path;
};

// Runs config.mode (plus a joint reference when `with_joint`), writes
// report.json, report.csv and the final model checkpoint.
RunOutputs cmd_run(const ExperimentConfig& config, bool with_joint);

// CSV of the input/local/global spectral embeddings of one class. Local and
// global blocks need a model checkpoint.
std::filesystem::path cmd_export_embeddings(const ExperimentConfig& config, const std::string& class_name);

// Runs each method plus a joint reference and writes compare.csv / compare.json.
RunOutputs cmd_compare(const ExperimentConfig& config, const std::vector<std::string>& methods);

// Full command-line front end. Errors are reported on `err` as one line:
//   error: kind=<config|data|numerical> exit=<code> message=<text>
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cl3d
