#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ybion {

struct Level {
  std::string label;          // short identifier, e.g. "6s12"
  std::string configuration;  // free text, e.g. "[Xe]4f14 6s"
  int two_j = 0;              // 2J, so half-integer J stays exact
  double energy_cm1 = 0.0;    // above the ground state
  std::optional<double> lifetime_s;

  double j() const { return 0.5 * two_j; }
  bool operator==(const Level&) const = default;
};

struct DecayChannel {
  std::string upper;
  std::string lower;
  double branching_ratio = 0.0;
  bool operator==(const DecayChannel&) const = default;
};

struct LaserDrive {
  std::string upper;
  std::string lower;
  double wavelength_nm = 0.0;  // vacuum
  std::optional<double> power_w;
  std::optional<double> waist_m;
  std::optional<double> saturation;
  double detuning_hz = 0.0;
  bool chopped = false;

  bool operator==(const LaserDrive&) const = default;
};

// Immutable, fully cross-referenced level scheme. Construction validates every
// structural invariant; derived copies are made with the with_* helpers.
class LevelScheme {
 public:
  static LevelScheme create(std::vector<Level> levels, std::vector<DecayChannel> decays,
                            std::vector<LaserDrive> drives,
                            std::optional<double> ionization_limit_cm1 = std::nullopt);

  const std::vector<Level>& levels() const { return levels_; }
  const std::vector<DecayChannel>& decays() const { return decays_; }
  const std::vector<LaserDrive>& drives() const { return drives_; }
  std::optional<double> ionization_limit_cm1() const { return ionization_limit_cm1_; }

  bool has_level(std::string_view label) const;
  std::size_t index_of(std::string_view label) const;  // throws DomainError
  const Level& level(std::string_view label) const;
  const Level& ground() const;

  // Index into drives() of the drive coupling lower<->upper, if any.
  std::optional<std::size_t> find_drive(std::string_view lower, std::string_view upper) const;
  const LaserDrive& drive(std::string_view lower, std::string_view upper) const;

  double branching_sum(std::string_view upper) const;

  LevelScheme with_drives(std::vector<LaserDrive> drives) const;
  LevelScheme with_drive(const LaserDrive& replacement) const;
  LevelScheme without_drive(std::string_view lower, std::string_view upper) const;
  LevelScheme with_lifetime(std::string_view label, std::optional<double> lifetime_s) const;

  bool operator==(const LevelScheme&) const = default;

 private:
  LevelScheme() = default;

  std::vector<Level> levels_;
  std::vector<DecayChannel> decays_;
  std::vector<LaserDrive> drives_;
  std::optional<double> ionization_limit_cm1_;
};

struct BranchingEntry {
  std::string level;
  double sum = 0.0;
  double residual = 0.0;  // 1 - sum; the unmodeled decay fraction
};

struct DriveMismatch {
  std::string upper;
  std::string lower;
  double declared_nm = 0.0;
  double computed_nm = 0.0;
  double mismatch_ppm = 0.0;  // (declared - computed) / computed * 1e6
};

struct ValidationReport {
  std::vector<BranchingEntry> branching;
  std::vector<DriveMismatch> drives;

  // Human-readable diagnostics; empty only when every sum is exactly one and
  // every drive wavelength matches its level energies exactly.
  std::string text() const;
};

LevelScheme load_scheme(std::istream& in);
LevelScheme load_scheme(std::string_view text);
LevelScheme load_scheme_file(const std::filesystem::path& path);
std::string serialize_scheme(const LevelScheme& scheme);

ValidationReport validate_scheme(const LevelScheme& scheme);

// Vacuum wavelength in nm of the upper -> lower transition: 1e7 / dE[cm^-1].
double transition_wavelength(const LevelScheme& scheme, std::string_view upper,
                             std::string_view lower);

// Relative tolerance between a drive's declared wavelength and its level energies.
inline constexpr double kDriveWavelengthTolerance = 1e-3;
inline constexpr double kBranchingSumSlack = 1e-9;

}  // namespace ybion
