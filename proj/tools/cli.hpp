#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ybion::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kModel = 2 };

// Runs one subcommand. `args` excludes the program name. Primary output goes
// to `out` unless --output names a file; diagnostics go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::vector<std::string> subcommand_names();
std::string help_text(const std::string& subcommand);

struct FlagDoc {
  std::string subcommand;
  std::string flag;
  std::string type_name;  // CLI11 type label, e.g. FLOAT, UINT, TEXT
  std::string description;
  std::string default_value;
  bool numeric = false;  // type label mentions FLOAT, INT or UINT
};
std::vector<FlagDoc> flag_docs();

// Directories searched for relative data-file names: entries of the
// colon-separated YBION_DATA_DIR, then the bundled data directory.
std::vector<std::filesystem::path> data_search_path();
std::filesystem::path resolve_data_file(const std::string& name);

}  // namespace ybion::cli
