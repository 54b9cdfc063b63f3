#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "ybion/crystal.hpp"

namespace ybion {

// Chopped ionization/cooling sequence. Each cycle of length 1/chop_rate opens
// the ionization window for the first `ionization_duty` fraction; the trial
// starts at a uniformly random phase of the free-running chopper.
struct SequenceConfig {
  double ionization_rate = 0.0;  // s^-1 while the ionization window is open
  double chop_rate_hz = 50.0;
  double ionization_duty = 0.5;
  double max_time_s = 10.0;
  std::uint64_t rng_seed = 0;
  double failure_probability = 0.0;  // per ionization window, ends the trial without an event

  void check() const;
};

struct IonizationRun {
  std::size_t index = 0;
  std::optional<double> event_time_s;
  std::optional<double> exposure_s;  // accumulated open-window time at the event
  std::uint64_t attempt_windows = 0;
  bool failed = false;
  std::uint64_t seed = 0;

  bool operator==(const IonizationRun&) const = default;
};

// Trial i draws from the stream (seed, i), so results are identical for any
// worker count. workers = 0 picks the hardware concurrency.
std::vector<IonizationRun> simulate_ionization_times(const SequenceConfig& config, std::size_t trials,
                                                     unsigned workers = 1);

struct TimeSummary {
  std::size_t runs = 0;
  std::size_t events = 0;
  double success_fraction = 0.0;
  std::optional<double> mean_s;  // absent when no run has an event
  std::optional<double> median_s;
  std::optional<double> std_error_s;
  std::optional<double> ci95_low_s;
  std::optional<double> ci95_high_s;
};

TimeSummary summarize_times(std::span<const IonizationRun> runs);

void write_runs(std::ostream& out, std::span<const IonizationRun> runs);
void write_summary(std::ostream& out, const TimeSummary& summary);

// Relative Gaussian noise applied to the synthetic verification measurement.
struct VerificationNoise {
  double ratio_relative = 0.0;
  double frequency_relative = 0.0;
};

// Displacement ratio 1.74 +- 0.04, the 0.04 read as a two-sigma bound, and a
// 0.2% readout error on each motional frequency.
inline constexpr VerificationNoise kMeasuredNoise{0.02 / 1.74, 0.002};

struct VerificationRecord {
  double displacement_ratio = 0.0;
  double displacement_ratio_sigma = 0.0;
  double nu1_hz = 0.0;
  double nu_com_hz = 0.0;
  double nu_bre_hz = 0.0;
};

VerificationRecord synthesize_verification(const TrapAxis& trap, const ChargePair& charges,
                                           const VerificationNoise& noise, std::uint64_t seed);

struct ChargeInference {
  double eta_com = 0.0;
  double eta_bre = 0.0;
  double eta_mean = 0.0;
  double q2 = 0.0;
};

ChargeInference infer_from_record(const VerificationRecord& record);

struct RoundTripStats {
  std::size_t seeds = 0;
  std::size_t within = 0;        // |q2 - q2_true| <= tolerance
  std::size_t inversion_errors = 0;
  double fraction_within = 0.0;
  double mean_q2 = 0.0;
  double sd_q2 = 0.0;
};

RoundTripStats verification_roundtrip(const TrapAxis& trap, const ChargePair& charges,
                                      const VerificationNoise& noise, std::size_t seeds,
                                      std::uint64_t base_seed, double tolerance);

}  // namespace ybion
