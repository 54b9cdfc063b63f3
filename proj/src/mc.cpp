#include "ybion/mc.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

#include "ybion/error.hpp"
#include "ybion/format.hpp"
#include "ybion/random.hpp"

namespace ybion {

void SequenceConfig::check() const {
  if (!(ionization_rate >= 0.0)) throw DomainError("ionization rate must be >= 0");
  if (!(ionization_duty > 0.0 && ionization_duty <= 1.0))
    throw DomainError("ionization duty must lie in (0, 1]");
  if (!(chop_rate_hz > 0.0)) throw DomainError("chop rate must be > 0");
  if (!(max_time_s > 0.0)) throw DomainError("max time must be > 0");
  if (!(failure_probability >= 0.0 && failure_probability < 1.0))
    throw DomainError("failure probability must lie in [0, 1)");
}

namespace {

struct Clock {
  double period;
  double open;  // duty * period

  // Wall time needed to accumulate `exposure` of open-window time when the
  // sequence starts at cycle position `phase`, and the number of windows entered.
  std::pair<double, std::uint64_t> wall_time(double exposure, double phase) const {
    if (open >= period) return {exposure, 1};
    double t = 0.0;
    std::uint64_t windows = 0;
    if (phase < open) {
      const double left = open - phase;
      windows = 1;
      if (exposure <= left) return {exposure, windows};
      exposure -= left;
    }
    t += period - phase;
    double k = std::floor(exposure / open);
    double r = exposure - k * open;
    if (r <= 0.0 && k > 0.0) {
      k -= 1.0;
      r = open;
    }
    return {t + k * period + r, windows + static_cast<std::uint64_t>(k) + 1};
  }

  // Windows entered during [0, horizon].
  std::uint64_t windows_until(double horizon, double phase) const {
    if (open >= period) return 1;
    std::uint64_t count = phase < open ? 1 : 0;
    const double first_start = period - phase;
    if (horizon >= first_start)
      count += static_cast<std::uint64_t>(std::floor((horizon - first_start) / period)) + 1;
    return count;
  }
};

IonizationRun run_trial(const SequenceConfig& c, const Clock& clock, std::size_t index) {
  auto rng = Xoshiro256::stream(c.rng_seed, index);
  IonizationRun run;
  run.index = index;
  run.seed = c.rng_seed;
  const double phase = rng.uniform() * clock.period;
  const double unit_exposure = rng.exponential();

  std::uint64_t horizon_windows = clock.windows_until(c.max_time_s, phase);
  std::optional<std::pair<double, std::uint64_t>> event;
  if (c.ionization_rate > 0.0) {
    const double exposure = unit_exposure / c.ionization_rate;
    const auto hit = clock.wall_time(exposure, phase);
    if (hit.first <= c.max_time_s) {
      event = hit;
      run.exposure_s = exposure;
    }
  }
  const std::uint64_t windows = event ? event->second : horizon_windows;

  if (c.failure_probability > 0.0) {
    // Windows survived before the failure channel fires.
    const double u = rng.uniform();
    const double survived = std::floor(std::log1p(-u) / std::log1p(-c.failure_probability));
    if (survived < static_cast<double>(windows)) {
      run.failed = true;
      run.attempt_windows = static_cast<std::uint64_t>(survived) + 1;
      run.exposure_s.reset();
      return run;
    }
  }
  run.attempt_windows = windows;
  if (event) run.event_time_s = event->first;
  return run;
}

}  // namespace

std::vector<IonizationRun> simulate_ionization_times(const SequenceConfig& config, std::size_t trials,
                                                     unsigned workers) {
  config.check();
  if (trials == 0) throw DomainError("need at least one trial");
  const Clock clock{1.0 / config.chop_rate_hz, config.ionization_duty / config.chop_rate_hz};
  std::vector<IonizationRun> runs(trials);

  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, trials));
  if (workers <= 1) {
    for (std::size_t i = 0; i < trials; ++i) runs[i] = run_trial(config, clock, i);
    return runs;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (trials + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk, end = std::min(trials, begin + chunk);
    pool.emplace_back([&, begin, end] {
      for (std::size_t i = begin; i < end; ++i) runs[i] = run_trial(config, clock, i);
    });
  }
  pool.clear();
  return runs;
}

TimeSummary summarize_times(std::span<const IonizationRun> runs) {
  if (runs.empty()) throw DomainError("summary needs at least one run");
  TimeSummary s;
  s.runs = runs.size();
  std::vector<double> times;
  for (const auto& r : runs)
    if (r.event_time_s) times.push_back(*r.event_time_s);
  s.events = times.size();
  s.success_fraction = static_cast<double>(s.events) / static_cast<double>(s.runs);
  if (times.empty()) return s;

  double sum = 0.0;
  for (double t : times) sum += t;
  const double mean = sum / static_cast<double>(times.size());
  double ss = 0.0;
  for (double t : times) ss += (t - mean) * (t - mean);
  const double sd = times.size() > 1 ? std::sqrt(ss / static_cast<double>(times.size() - 1)) : 0.0;
  const double se = sd / std::sqrt(static_cast<double>(times.size()));
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  s.mean_s = mean;
  s.median_s = n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
  s.std_error_s = se;
  s.ci95_low_s = mean - 1.959963984540054 * se;
  s.ci95_high_s = mean + 1.959963984540054 * se;
  return s;
}

void write_runs(std::ostream& out, std::span<const IonizationRun> runs) {
  out << "index\tevent_time_s\twindows\tfailed\n";
  for (const auto& r : runs)
    out << r.index << '\t' << (r.event_time_s ? format_number(*r.event_time_s) : "NA") << '\t'
        << r.attempt_windows << '\t' << (r.failed ? 1 : 0) << '\n';
}

void write_summary(std::ostream& out, const TimeSummary& s) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("NA"); };
  out << "runs\tevents\tsuccess_fraction\tmean_s\tmedian_s\tstd_error_s\tci95_low_s\tci95_high_s\n";
  out << s.runs << '\t' << s.events << '\t' << format_number(s.success_fraction) << '\t' << opt(s.mean_s)
      << '\t' << opt(s.median_s) << '\t' << opt(s.std_error_s) << '\t' << opt(s.ci95_low_s) << '\t'
      << opt(s.ci95_high_s) << '\n';
}

VerificationRecord synthesize_verification(const TrapAxis& trap, const ChargePair& charges,
                                           const VerificationNoise& noise, std::uint64_t seed) {
  trap.check();
  charges.check();
  const double ratio = displacement_ratio(trap.eta, charges.q2 / charges.q1);
  const auto modes = normal_mode_frequencies(trap);
  Xoshiro256 rng(seed);
  auto perturb = [&](double value, double rel) {
    const double z = rng.normal();
    return rel > 0.0 ? value * (1.0 + rel * z) : value;
  };
  VerificationRecord rec;
  rec.displacement_ratio = perturb(ratio, noise.ratio_relative);
  rec.displacement_ratio_sigma = ratio * noise.ratio_relative;
  rec.nu1_hz = perturb(trap.nu1_hz, noise.frequency_relative);
  rec.nu_com_hz = perturb(modes.nu_com_hz, noise.frequency_relative);
  rec.nu_bre_hz = perturb(modes.nu_bre_hz, noise.frequency_relative);
  if (!(rec.displacement_ratio > 0.0 && rec.nu1_hz > 0.0 && rec.nu_com_hz > 0.0 && rec.nu_bre_hz > 0.0))
    throw DomainError("synthetic record has a non-positive observable; noise too large");
  return rec;
}

ChargeInference infer_from_record(const VerificationRecord& record) {
  ChargeInference out;
  out.eta_com = infer_eta(record.nu_com_hz, record.nu1_hz, Mode::com);
  out.eta_bre = infer_eta(record.nu_bre_hz, record.nu1_hz, Mode::bre);
  out.eta_mean = 0.5 * (out.eta_com + out.eta_bre);
  out.q2 = infer_charge(record.displacement_ratio, out.eta_mean);
  return out;
}

RoundTripStats verification_roundtrip(const TrapAxis& trap, const ChargePair& charges,
                                      const VerificationNoise& noise, std::size_t seeds,
                                      std::uint64_t base_seed, double tolerance) {
  if (seeds == 0) throw DomainError("need at least one seed");
  RoundTripStats stats;
  stats.seeds = seeds;
  std::vector<double> q2s;
  for (std::size_t i = 0; i < seeds; ++i) {
    std::uint64_t s = base_seed + i;
    const std::uint64_t seed = Xoshiro256::splitmix64(s);
    try {
      const auto inferred = infer_from_record(synthesize_verification(trap, charges, noise, seed));
      q2s.push_back(inferred.q2);
      if (std::abs(inferred.q2 - charges.q2) <= tolerance) ++stats.within;
    } catch (const DomainError&) {
      ++stats.inversion_errors;
    }
  }
  stats.fraction_within = static_cast<double>(stats.within) / static_cast<double>(seeds);
  if (!q2s.empty()) {
    double sum = 0.0;
    for (double q : q2s) sum += q;
    stats.mean_q2 = sum / static_cast<double>(q2s.size());
    double ss = 0.0;
    for (double q : q2s) ss += (q - stats.mean_q2) * (q - stats.mean_q2);
    stats.sd_q2 = q2s.size() > 1 ? std::sqrt(ss / static_cast<double>(q2s.size() - 1)) : 0.0;
  }
  return stats;
}

}  // namespace ybion
