#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace ybion::cli {

// Sidecar written next to every output, one "key: value" pair per line:
//
//   subcommand: simulate
//   argv: simulate --rate 4.1 --trials 100
//   tool_version: 0.1.0
//   timestamp: 2026-01-01T00:00:00Z
//   rng_algorithm: ...          (only for stochastic subcommands)
//   seed: 1
//   param.<flag>: <resolved value>
//   input.<path>: sha256:<hex>
//
// Keys are unique except param.* and input.*, which repeat per entry. The
// argv line is enough to reproduce the run with `ybion replay`.
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;
  std::string tool_version;
  std::string timestamp;
  std::string rng_algorithm;
  std::vector<std::string> seeds;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<std::pair<std::string, std::string>> input_digests;
};

void write_manifest(std::ostream& out, const RunManifest& manifest);
RunManifest read_manifest(std::istream& in);

std::string sha256_file(const std::filesystem::path& path);
std::string utc_timestamp();

// Shell-style joining with double quotes around tokens that need them, and
// the inverse split used by replay.
std::string join_argv(const std::vector<std::string>& argv);
std::vector<std::string> split_argv(const std::string& line);

}  // namespace ybion::cli
