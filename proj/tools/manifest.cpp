#include "manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>

#include "ybion/error.hpp"

namespace ybion::cli {

void write_manifest(std::ostream& out, const RunManifest& m) {
  out << "subcommand: " << m.subcommand << '\n';
  out << "argv: " << join_argv(m.argv) << '\n';
  out << "tool_version: " << m.tool_version << '\n';
  out << "timestamp: " << m.timestamp << '\n';
  if (!m.rng_algorithm.empty()) out << "rng_algorithm: " << m.rng_algorithm << '\n';
  for (const auto& s : m.seeds) out << "seed: " << s << '\n';
  for (const auto& [k, v] : m.parameters) out << "param." << k << ": " << v << '\n';
  for (const auto& [k, v] : m.input_digests) out << "input." << k << ": sha256:" << v << '\n';
}

RunManifest read_manifest(std::istream& in) {
  RunManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(": ");
    if (colon == std::string::npos) throw ParseError(lineno, "manifest line is not 'key: value'");
    const std::string key = line.substr(0, colon), value = line.substr(colon + 2);
    if (key == "subcommand") m.subcommand = value;
    else if (key == "argv") m.argv = split_argv(value);
    else if (key == "tool_version") m.tool_version = value;
    else if (key == "timestamp") m.timestamp = value;
    else if (key == "rng_algorithm") m.rng_algorithm = value;
    else if (key == "seed") m.seeds.push_back(value);
    else if (key.rfind("param.", 0) == 0) m.parameters.emplace_back(key.substr(6), value);
    else if (key.rfind("input.", 0) == 0)
      m.input_digests.emplace_back(key.substr(6), value.rfind("sha256:", 0) == 0 ? value.substr(7) : value);
    else throw ParseError(lineno, "unknown manifest key '" + key + "'");
  }
  if (m.argv.empty()) throw DomainError("manifest has no argv line");
  return m;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::array<char, 1 << 14> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return hex.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string join_argv(const std::vector<std::string>& argv) {
  std::ostringstream out;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    if (i) out << ' ';
    const auto& a = argv[i];
    if (a.empty() || a.find_first_of(" \t\"\\") != std::string::npos) out << std::quoted(a);
    else out << a;
  }
  return out.str();
}

std::vector<std::string> split_argv(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string token;
  while (in >> std::quoted(token)) out.push_back(token);
  return out;
}

}  // namespace ybion::cli
