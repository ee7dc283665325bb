#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace pertlab::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitStatus : int { kOk = 0, kFailure = 1, kConfigError = 2, kDomainError = 3 };

struct RunOptions {
  int threads = 1;
  bool seed_override = false;
  unsigned long long seed = 0;
  std::filesystem::path out_override;
};

struct RunResult {
  std::filesystem::path out_dir;
  std::vector<std::filesystem::path> outputs;
  std::string summary;
};

/// Executes one experiment described by a JSON document (see README for the
/// schema). Relative paths inside it resolve against `base_dir`. Throws the
/// library's error types; `main` maps them to exit statuses.
RunResult run_config(const std::string& json_text, const std::filesystem::path& base_dir,
                     const RunOptions& options);

/// Reshapes report CSVs into one long table (series, x, y, stderr).
std::string emit_plotdata(const std::vector<std::string>& csv_texts);

/// Entry point behind the `pertlab` executable.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace pertlab::cli
