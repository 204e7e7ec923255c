#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slfv/coalescent.hpp"
#include "slfv/event_model.hpp"

namespace slfv {

/// coef * L^power * (log L)^log_power.
struct PowerLaw {
  double coef = 1.0;
  double power = 0.0;
  double log_power = 0.0;

  double operator()(double L) const;
};

struct RegimeSpec {
  PowerLaw psi;
  std::optional<PowerLaw> rho;  // nullopt: no large events
};

enum class TimescaleCase {
  large_gathering,   // psi^2 / rho -> infinity
  mixed_gathering,   // psi^2 / rho -> b finite, psi^2 log L / rho -> infinity
  small_gathering,   // large events negligible
  kingman,           // psi = cL, rho / (L^2 log L) -> infinity
  spatial_limit,     // psi = cL, rho / L^2 -> b finite
  lambda_coalescent  // psi = cL, rho / L^2 -> infinity, rho / (L^2 log L) -> finite
};

std::string_view to_string(TimescaleCase c);

struct Classification {
  TimescaleCase kind = TimescaleCase::small_gathering;
  double alpha = 0.0;
  double b = 0.0;  // lim psi^2/rho (mixed) or lim rho/L^2 (spatial limit)
  double c = 0.0;  // psi / L when alpha = 1
  /// lim rho / (L^2 log L); the Kingman rate of the Lambda coalescent is
  /// 2 pi sigma_s^2 times this.
  double rho_over_l2logl = 0.0;
  bool kingman_limit() const {
    return kind == TimescaleCase::large_gathering || kind == TimescaleCase::mixed_gathering ||
           kind == TimescaleCase::small_gathering || kind == TimescaleCase::kingman;
  }
};

/// Decides which limit applies from the exponents of psi and rho. Throws
/// UncoveredRegime when none does.
Classification classify(const RegimeSpec& regime);

/// The law on T(L): small class as given, large class scaled by psi_L and rho_L.
EventLaw law_at(const RegimeSpec& regime, double L, const EventClass& small,
                const std::optional<EventClass>& large);

/// phi_L for the regime's case, with sigma_s^2 and sigma_B^2 from the law.
double predicted_timescale(const RegimeSpec& regime, double L, const EventClass& small,
                           const std::optional<EventClass>& large);

/// Gathering distance matching the case: 2 psi R^B when large events drive
/// gathering, 2 R^s otherwise.
double gathering_threshold(const RegimeSpec& regime, double L, const EventClass& small,
                           const std::optional<EventClass>& large);

// --- shared helpers --------------------------------------------------------------

struct Trend {
  std::vector<double> values;
  double band = 0.0;
  bool weakly_decreasing = false;
};

/// values[i+1] <= values[i] + band for every i.
Trend weak_trend(std::vector<double> values, double band);

/// 99% two-sided KS critical value 1.63 / sqrt(n).
double ks_noise_band(std::size_t n);

struct Proportion {
  double estimate = 0.0;
  double std_error = 0.0;
};
Proportion proportion(std::size_t hits, std::size_t trials);

/// P[block count = j at time t], j = 1..n, for Kingman's coalescent with unit pair rate.
std::vector<double> kingman_block_distribution(int n, double t);
/// Same for the Lambda^(beta, c) coalescent.
std::vector<double> lambda_block_distribution(int n, double t, double c, double beta,
                                              const EventClass& large);

// --- pair times --------------------------------------------------------------------

struct PairTimeSetup {
  double L = 0.0;
  EventLaw law;
  Classification regime;
  double phi = 0.0;
  double threshold = 0.0;
  double horizon = 0.0;  // 50 phi
  std::uint64_t seed = 0;
  std::size_t n = 2;
};

struct PairTimeSample {
  double gathering = kNever;
  double coalescence = kNever;
};

PairTimeSetup make_pair_time_setup(const RegimeSpec& regime, double L, const EventClass& small,
                                   const std::optional<EventClass>& large, std::uint64_t seed);
/// Seed stream shared with block-count replicates of the same L.
std::uint64_t genealogy_seed(std::uint64_t root, double L, std::size_t replicate);
PairTimeSample pair_time_replicate(const PairTimeSetup& setup, std::size_t replicate);

struct PairTimeResult {
  double L = 0.0;
  double phi = 0.0;
  std::vector<double> gathering;     // normalised by phi; kNever when censored
  std::vector<double> coalescence;   // normalised by phi
  std::size_t censored = 0;
  double ks_gathering = 0.0;
  double ks_coalescence = 0.0;
  double mean_coalescence = 0.0;     // over uncensored samples
  bool non_coalescing = false;
};

PairTimeResult summarize_pair_times(const PairTimeSetup& setup, std::span<const PairTimeSample> raw);

struct PairTimeExperiment {
  std::vector<PairTimeResult> per_l;
  Trend gathering_trend;
  Trend coalescence_trend;
};

PairTimeExperiment pair_time_experiment(const RegimeSpec& regime, std::span<const double> ls,
                                        std::size_t replicates, const EventClass& small,
                                        const std::optional<EventClass>& large, std::uint64_t seed,
                                        unsigned threads);

// --- block counts -------------------------------------------------------------------

struct BlockCountSetup {
  PairTimeSetup base;
  std::vector<double> times;  // in units of phi
  std::optional<EventClass> large;
};

BlockCountSetup make_block_count_setup(std::size_t n, const RegimeSpec& regime, double L,
                                       std::vector<double> times, const EventClass& small,
                                       const std::optional<EventClass>& large, std::uint64_t seed);
/// Block counts at each requested time; -1 when the replicate timed out.
std::vector<int> block_count_replicate(const BlockCountSetup& setup, std::size_t replicate);

struct BlockCountResult {
  double L = 0.0;
  double phi = 0.0;
  std::size_t n = 0;
  std::vector<double> times;
  /// [time][j-1]: empirical P[count = j] with binomial standard errors.
  std::vector<std::vector<Proportion>> empirical;
  /// Limit overlay, empty when no closed form is available.
  std::vector<std::vector<double>> overlay;
  std::size_t censored = 0;
};

BlockCountResult summarize_block_counts(const BlockCountSetup& setup,
                                        std::span<const std::vector<int>> counts);

BlockCountResult block_count_experiment(std::size_t n, const RegimeSpec& regime, double L,
                                        std::vector<double> times, std::size_t replicates,
                                        const EventClass& small,
                                        const std::optional<EventClass>& large, std::uint64_t seed,
                                        unsigned threads);

// --- first mergers ------------------------------------------------------------------

struct FirstMergerSetup {
  std::size_t n = 4;
  double L = 0.0;
  double c = 1.0;
  EventLaw law;  // large class only, psi = c L
  std::vector<double> expected;  // P[k | k >= 2], index k - 2
  std::uint64_t seed = 0;
};

/// Requires finite large radius mass, c R^B <= 1/sqrt(2) and rho > L^2.
FirstMergerSetup make_first_merger_setup(std::size_t n, double L, double c, double rho,
                                         const EventClass& large, std::uint64_t seed);
/// Size of the first merger of the large-event dual with labels redrawn
/// uniformly before every candidate event.
int first_merger_replicate(const FirstMergerSetup& setup, std::size_t replicate);

struct FirstMergerResult {
  std::vector<double> observed;  // counts, index k - 2
  std::vector<double> expected;  // probabilities, index k - 2
  double chi_square = 0.0;
  int dof = 0;
  double p_value = 0.0;
  bool inconclusive = false;
  std::size_t mergers = 0;
};

FirstMergerResult summarize_first_mergers(const FirstMergerSetup& setup, std::span<const int> sizes);

FirstMergerResult first_merger_distribution(std::size_t n, double L, double c, double rho,
                                            const EventClass& large, std::size_t mergers,
                                            std::uint64_t seed, unsigned threads);

// --- single-lineage hitting times -----------------------------------------------------

struct HittingSetup {
  double L = 0.0;
  std::shared_ptr<const EventDriver> driver;
  double radius = 0.0;  // d_L
  double gamma = 0.0;
  double normalization = 0.0;
  double horizon = 0.0;
  std::optional<TorusPoint> start;  // uniform on Gamma(L,1) when unset
  std::uint64_t seed = 0;
};

/// d_L = target(L); gamma = max(target.power, 0) when the log power vanishes.
HittingSetup make_hitting_setup(const EventClass& small, double L, const PowerLaw& target,
                                std::optional<TorusPoint> start, std::uint64_t seed);
/// Normalised entrance time, kNever when censored.
double hitting_replicate(const HittingSetup& setup, std::size_t replicate);

struct HittingResult {
  double L = 0.0;
  double normalization = 0.0;
  std::vector<double> normalized;
  std::size_t censored = 0;
  double ks = 0.0;
};

HittingResult summarize_hitting(const HittingSetup& setup, std::span<const double> normalized);

struct HittingExperiment {
  std::vector<HittingResult> per_l;
  Trend trend;
};

HittingExperiment hitting_time_experiment(const EventClass& small, std::span<const double> ls,
                                          const PowerLaw& target, std::size_t replicates,
                                          std::uint64_t seed, unsigned threads);

struct UniformizationResult {
  Proportion inside;
  double expected = 0.0;
  bool within_3_sigma = false;
};

/// P[lineage in B(0, d) at time factor * L^2] against pi d^2 / L^2.
UniformizationResult uniformization_check(const EventClass& small, double L, double d,
                                          double factor, std::size_t replicates,
                                          std::uint64_t seed, unsigned threads);

struct WindowSetup {
  double L = 0.0;
  std::shared_ptr<const EventDriver> driver;
  double radius = 0.0;   // R
  double window_end = 0.0;   // U'_L
  double window_length = 0.0;  // u_L
  std::optional<TorusPoint> start;
  std::uint64_t seed = 0;
};

WindowSetup make_window_setup(const EventClass& small, double L, double R, double window_end,
                              double window_length, std::optional<TorusPoint> start,
                              std::uint64_t seed);
/// 1 when the entrance time falls in [U' - u, U'], 0 otherwise.
int window_replicate(const WindowSetup& setup, std::size_t replicate);

struct WindowResult {
  double L = 0.0;
  Proportion probability;
  double bound_scale = 0.0;  // u_L / L^2
  double ratio = 0.0;
};

WindowResult summarize_window(const WindowSetup& setup, std::span<const int> hits);

WindowResult short_window_entrance(const EventClass& small, double L, double R, double window_end,
                                   double window_length, std::size_t replicates,
                                   std::optional<TorusPoint> start, std::uint64_t seed,
                                   unsigned threads);

}  // namespace slfv
