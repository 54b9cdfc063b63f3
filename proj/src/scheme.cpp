#include "ybion/scheme.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ybion/error.hpp"
#include "ybion/format.hpp"

namespace ybion {

namespace {

void check_level(const Level& level) {
  if (level.label.empty()) throw ValidationError("level with empty label");
  if (!(level.energy_cm1 >= 0.0) || !std::isfinite(level.energy_cm1))
    throw ValidationError("level " + level.label + ": energy must be >= 0");
  if (level.two_j < 0) throw ValidationError("level " + level.label + ": J must be >= 0");
  if (level.lifetime_s && !(*level.lifetime_s > 0.0))
    throw ValidationError("level " + level.label + ": lifetime must be > 0");
}

}  // namespace

LevelScheme LevelScheme::create(std::vector<Level> levels, std::vector<DecayChannel> decays,
                                std::vector<LaserDrive> drives,
                                std::optional<double> ionization_limit_cm1) {
  if (levels.empty()) throw ValidationError("no levels");

  std::set<std::string> seen;
  for (const auto& level : levels) {
    check_level(level);
    if (!seen.insert(level.label).second)
      throw ValidationError("duplicate level label '" + level.label + "'");
  }
  const auto ground = std::min_element(levels.begin(), levels.end(), [](auto& a, auto& b) {
    return a.energy_cm1 < b.energy_cm1;
  });
  if (ground->energy_cm1 != 0.0)
    throw ValidationError("ground state must have energy exactly 0 (lowest is '" +
                          ground->label + "')");

  LevelScheme scheme;
  scheme.levels_ = std::move(levels);
  scheme.ionization_limit_cm1_ = ionization_limit_cm1;
  if (ionization_limit_cm1) {
    for (const auto& level : scheme.levels_)
      if (level.energy_cm1 >= *ionization_limit_cm1)
        throw ValidationError("level " + level.label + " lies above the ionization limit");
  }

  auto require_label = [&](const std::string& label, const char* what) {
    if (!scheme.has_level(label))
      throw ValidationError(std::string(what) + " references unknown level '" + label + "'");
  };

  std::set<std::pair<std::string, std::string>> decay_pairs;
  for (const auto& d : decays) {
    require_label(d.upper, "decay");
    require_label(d.lower, "decay");
    if (!(scheme.level(d.upper).energy_cm1 > scheme.level(d.lower).energy_cm1))
      throw ValidationError("decay " + d.upper + "->" + d.lower + ": upper energy must exceed lower");
    if (!(d.branching_ratio > 0.0 && d.branching_ratio <= 1.0))
      throw ValidationError("decay " + d.upper + "->" + d.lower +
                            ": branching ratio must lie in (0, 1]");
    if (!decay_pairs.emplace(d.upper, d.lower).second)
      throw ValidationError("duplicate decay " + d.upper + "->" + d.lower);
  }
  scheme.decays_ = std::move(decays);
  for (const auto& level : scheme.levels_) {
    const double sum = scheme.branching_sum(level.label);
    if (sum > 1.0 + kBranchingSumSlack)
      throw ValidationError("branching sum of level " + level.label + " is " + format_number(sum) +
                            " > 1");
  }

  std::set<std::pair<std::string, std::string>> drive_pairs;
  for (const auto& d : drives) {
    require_label(d.upper, "drive");
    require_label(d.lower, "drive");
    const std::string name = d.lower + "->" + d.upper;
    const double du = scheme.level(d.upper).energy_cm1, dl = scheme.level(d.lower).energy_cm1;
    if (!(du > dl)) throw ValidationError("drive " + name + ": upper energy must exceed lower");
    if (!(d.wavelength_nm > 0.0)) throw ValidationError("drive " + name + ": wavelength must be > 0");
    const bool has_beam = d.power_w.has_value() || d.waist_m.has_value();
    if (has_beam == d.saturation.has_value())
      throw ValidationError("drive " + name +
                            ": give exactly one of {power+waist, saturation}");
    if (has_beam) {
      if (!d.power_w || !d.waist_m)
        throw ValidationError("drive " + name + ": power and waist must be given together");
      if (!(*d.power_w > 0.0) || !(*d.waist_m > 0.0))
        throw ValidationError("drive " + name + ": power and waist must be > 0");
    } else if (!(*d.saturation >= 0.0)) {
      throw ValidationError("drive " + name + ": saturation must be >= 0");
    }
    if (!std::isfinite(d.detuning_hz)) throw ValidationError("drive " + name + ": bad detuning");
    const double computed = 1e7 / (du - dl);
    if (std::abs(d.wavelength_nm - computed) / d.wavelength_nm > kDriveWavelengthTolerance)
      throw ValidationError("drive " + name + ": declared wavelength " +
                            format_number(d.wavelength_nm) + " nm differs from level energies (" +
                            format_number(computed) + " nm) by more than 0.1%");
    if (!drive_pairs.emplace(d.lower, d.upper).second)
      throw ValidationError("duplicate drive " + name);
  }
  scheme.drives_ = std::move(drives);
  return scheme;
}

bool LevelScheme::has_level(std::string_view label) const {
  return std::any_of(levels_.begin(), levels_.end(), [&](auto& l) { return l.label == label; });
}

std::size_t LevelScheme::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < levels_.size(); ++i)
    if (levels_[i].label == label) return i;
  throw DomainError("unknown level '" + std::string(label) + "'");
}

const Level& LevelScheme::level(std::string_view label) const { return levels_[index_of(label)]; }

const Level& LevelScheme::ground() const {
  return *std::find_if(levels_.begin(), levels_.end(), [](auto& l) { return l.energy_cm1 == 0.0; });
}

std::optional<std::size_t> LevelScheme::find_drive(std::string_view lower,
                                                   std::string_view upper) const {
  for (std::size_t i = 0; i < drives_.size(); ++i)
    if (drives_[i].lower == lower && drives_[i].upper == upper) return i;
  return std::nullopt;
}

const LaserDrive& LevelScheme::drive(std::string_view lower, std::string_view upper) const {
  if (auto i = find_drive(lower, upper)) return drives_[*i];
  throw DomainError("no drive " + std::string(lower) + "->" + std::string(upper));
}

double LevelScheme::branching_sum(std::string_view upper) const {
  double sum = 0.0;
  for (const auto& d : decays_)
    if (d.upper == upper) sum += d.branching_ratio;
  return sum;
}

LevelScheme LevelScheme::with_drives(std::vector<LaserDrive> drives) const {
  return create(levels_, decays_, std::move(drives), ionization_limit_cm1_);
}

LevelScheme LevelScheme::with_drive(const LaserDrive& replacement) const {
  auto drives = drives_;
  if (auto i = find_drive(replacement.lower, replacement.upper))
    drives[*i] = replacement;
  else
    drives.push_back(replacement);
  return with_drives(std::move(drives));
}

LevelScheme LevelScheme::without_drive(std::string_view lower, std::string_view upper) const {
  auto drives = drives_;
  std::erase_if(drives, [&](auto& d) { return d.lower == lower && d.upper == upper; });
  return with_drives(std::move(drives));
}

LevelScheme LevelScheme::with_lifetime(std::string_view label,
                                       std::optional<double> lifetime_s) const {
  auto levels = levels_;
  levels[index_of(label)].lifetime_s = lifetime_s;
  return create(std::move(levels), decays_, drives_, ionization_limit_cm1_);
}

// ---------------------------------------------------------------------------
// Text format
//
//   # comment to end of line (outside quotes)
//   [scheme]   key value pairs: ionization_limit_cm1
//   [levels]   label configuration J energy_cm1 lifetime_s
//   [decays]   upper lower branching_ratio
//   [drives]   upper lower wavelength_nm power_W waist_m saturation detuning_Hz chopped
//
// Fields are separated by whitespace; a field containing whitespace is wrapped
// in double quotes. "-" marks an absent optional field. J is written as an
// integer or a fraction n/2. chopped is "yes" or "no".
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> tokenize(const std::string& line, std::size_t lineno) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == '#') break;
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '"') {
      const auto close = line.find('"', i + 1);
      if (close == std::string::npos) throw ParseError(lineno, "unterminated quote");
      tokens.push_back(line.substr(i + 1, close - i - 1));
      i = close + 1;
      continue;
    }
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != '#')
      ++j;
    tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

double parse_double(const std::string& token, std::size_t lineno, const char* what) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last)
    throw ParseError(lineno, std::string("bad ") + what + " '" + token + "'");
  return value;
}

std::optional<double> parse_optional(const std::string& token, std::size_t lineno,
                                     const char* what) {
  if (token == "-") return std::nullopt;
  return parse_double(token, lineno, what);
}

int parse_two_j(const std::string& token, std::size_t lineno) {
  const auto slash = token.find('/');
  if (slash == std::string::npos) {
    const double j = parse_double(token, lineno, "J");
    if (j != std::floor(j)) throw ParseError(lineno, "J must be integer or n/2");
    return static_cast<int>(2 * j);
  }
  if (token.substr(slash + 1) != "2") throw ParseError(lineno, "J must be integer or n/2");
  const double num = parse_double(token.substr(0, slash), lineno, "J");
  if (num != std::floor(num)) throw ParseError(lineno, "bad J '" + token + "'");
  return static_cast<int>(num);
}

std::string two_j_text(int two_j) {
  return two_j % 2 == 0 ? std::to_string(two_j / 2) : std::to_string(two_j) + "/2";
}

std::string optional_text(const std::optional<double>& v) { return v ? format_number(*v) : "-"; }

void expect_columns(const std::vector<std::string>& tokens, std::size_t n, std::size_t lineno,
                    const char* section) {
  if (tokens.size() != n)
    throw ParseError(lineno, std::string(section) + " row needs " + std::to_string(n) +
                                 " columns, got " + std::to_string(tokens.size()));
}

}  // namespace

LevelScheme load_scheme(std::istream& in) {
  enum class Section { none, scheme, levels, decays, drives } section = Section::none;
  std::vector<Level> levels;
  std::vector<DecayChannel> decays;
  std::vector<LaserDrive> drives;
  std::optional<double> limit;
  std::map<std::string, std::size_t> level_line;

  std::string line;
  std::size_t lineno = 0;
  // Cross-reference errors are reported against the first offending line.
  std::vector<std::pair<std::string, std::size_t>> references;

  while (std::getline(in, line)) {
    ++lineno;
    auto tokens = tokenize(line, lineno);
    if (tokens.empty()) continue;
    if (tokens.size() == 1 && tokens[0].front() == '[' && tokens[0].back() == ']') {
      const auto name = tokens[0].substr(1, tokens[0].size() - 2);
      if (name == "scheme")
        section = Section::scheme;
      else if (name == "levels")
        section = Section::levels;
      else if (name == "decays")
        section = Section::decays;
      else if (name == "drives")
        section = Section::drives;
      else
        throw ParseError(lineno, "unknown section [" + name + "]");
      continue;
    }
    switch (section) {
      case Section::none:
        throw ParseError(lineno, "data outside of a section");
      case Section::scheme:
        expect_columns(tokens, 2, lineno, "[scheme]");
        if (tokens[0] != "ionization_limit_cm1")
          throw ParseError(lineno, "unknown scheme key '" + tokens[0] + "'");
        limit = parse_double(tokens[1], lineno, "ionization limit");
        break;
      case Section::levels: {
        expect_columns(tokens, 5, lineno, "[levels]");
        Level level{tokens[0], tokens[1], parse_two_j(tokens[2], lineno),
                    parse_double(tokens[3], lineno, "energy"),
                    parse_optional(tokens[4], lineno, "lifetime")};
        if (!level_line.emplace(level.label, lineno).second)
          throw ParseError(lineno, "duplicate level label '" + level.label + "'");
        levels.push_back(std::move(level));
        break;
      }
      case Section::decays:
        expect_columns(tokens, 3, lineno, "[decays]");
        decays.push_back({tokens[0], tokens[1], parse_double(tokens[2], lineno, "branching ratio")});
        references.emplace_back(tokens[0], lineno);
        references.emplace_back(tokens[1], lineno);
        break;
      case Section::drives: {
        expect_columns(tokens, 8, lineno, "[drives]");
        LaserDrive d;
        d.upper = tokens[0];
        d.lower = tokens[1];
        d.wavelength_nm = parse_double(tokens[2], lineno, "wavelength");
        d.power_w = parse_optional(tokens[3], lineno, "power");
        d.waist_m = parse_optional(tokens[4], lineno, "waist");
        d.saturation = parse_optional(tokens[5], lineno, "saturation");
        d.detuning_hz = parse_double(tokens[6], lineno, "detuning");
        if (tokens[7] == "yes")
          d.chopped = true;
        else if (tokens[7] != "no")
          throw ParseError(lineno, "chopped must be yes or no");
        drives.push_back(std::move(d));
        references.emplace_back(tokens[0], lineno);
        references.emplace_back(tokens[1], lineno);
        break;
      }
    }
  }
  if (levels.empty()) throw ValidationError("no levels");
  for (const auto& [label, at] : references)
    if (!level_line.contains(label))
      throw ParseError(at, "unknown level label '" + label + "'");
  return LevelScheme::create(std::move(levels), std::move(decays), std::move(drives), limit);
}

LevelScheme load_scheme(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load_scheme(in);
}

LevelScheme load_scheme_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scheme file " + path.string());
  return load_scheme(in);
}

std::string serialize_scheme(const LevelScheme& scheme) {
  std::ostringstream out;
  if (auto limit = scheme.ionization_limit_cm1())
    out << "[scheme]\nionization_limit_cm1 " << format_number(*limit) << "\n\n";
  out << "[levels]\n# label configuration J energy_cm1 lifetime_s\n";
  for (const auto& l : scheme.levels())
    out << l.label << " \"" << l.configuration << "\" " << two_j_text(l.two_j) << ' '
        << format_number(l.energy_cm1) << ' ' << optional_text(l.lifetime_s) << '\n';
  out << "\n[decays]\n# upper lower branching_ratio\n";
  for (const auto& d : scheme.decays())
    out << d.upper << ' ' << d.lower << ' ' << format_number(d.branching_ratio) << '\n';
  out << "\n[drives]\n# upper lower wavelength_nm power_W waist_m saturation detuning_Hz chopped\n";
  for (const auto& d : scheme.drives())
    out << d.upper << ' ' << d.lower << ' ' << format_number(d.wavelength_nm) << ' '
        << optional_text(d.power_w) << ' ' << optional_text(d.waist_m) << ' '
        << optional_text(d.saturation) << ' ' << format_number(d.detuning_hz) << ' '
        << (d.chopped ? "yes" : "no") << '\n';
  return out.str();
}

ValidationReport validate_scheme(const LevelScheme& scheme) {
  ValidationReport report;
  for (const auto& level : scheme.levels()) {
    const bool has_decays = std::any_of(scheme.decays().begin(), scheme.decays().end(),
                                        [&](auto& d) { return d.upper == level.label; });
    if (!has_decays) continue;
    const double sum = scheme.branching_sum(level.label);
    report.branching.push_back({level.label, sum, 1.0 - sum});
  }
  for (const auto& d : scheme.drives()) {
    const double computed = transition_wavelength(scheme, d.upper, d.lower);
    report.drives.push_back(
        {d.upper, d.lower, d.wavelength_nm, computed, (d.wavelength_nm - computed) / computed * 1e6});
  }
  return report;
}

std::string ValidationReport::text() const {
  std::ostringstream out;
  for (const auto& b : branching) {
    if (b.residual > 1e-12)
      out << b.level << ": branching sum " << format_number(b.sum) << ", residual "
          << format_number(b.residual) << " (unmodeled decay)\n";
    else if (b.residual < -1e-12)
      out << b.level << ": branching sum " << format_number(b.sum) << " exceeds 1\n";
  }
  for (const auto& d : drives)
    if (d.mismatch_ppm != 0.0)
      out << "drive " << d.lower << "->" << d.upper << ": declared " << format_number(d.declared_nm)
          << " nm, level energies give " << format_number(d.computed_nm) << " nm (mismatch "
          << format_fixed(d.mismatch_ppm, 1) << " ppm)\n";
  return out.str();
}

double transition_wavelength(const LevelScheme& scheme, std::string_view upper,
                             std::string_view lower) {
  const double delta = scheme.level(upper).energy_cm1 - scheme.level(lower).energy_cm1;
  if (!(delta > 0.0))
    throw DomainError("transition " + std::string(upper) + "->" + std::string(lower) +
                      ": upper energy must exceed lower");
  return 1e7 / delta;
}

}  // namespace ybion
