#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "slfv/coalescent.hpp"
#include "slfv/event_model.hpp"
#include "slfv/rng.hpp"

namespace slfv {

using Partition = std::vector<std::vector<int>>;

/// Path of an unlabelled coalescent: the partition right after each merger,
/// starting with the singletons at time 0.
struct PartitionPath {
  struct Step {
    double time = 0.0;
    Partition partition;
  };

  std::size_t n = 0;
  double end_time = 0.0;
  std::vector<Step> steps;
  /// Times of events that marked fewer than two blocks.
  std::vector<double> null_events;

  std::size_t blocks_at(double t) const;
  const Partition& at(double t) const;
  /// Time of the first merger, kNever when there is none.
  double first_merger_time() const { return steps.size() > 1 ? steps[1].time : kNever; }
};

/// Kingman's coalescent with every pair merging at `rate`, up to `horizon`
/// or the last merger.
PartitionPath sample_kingman(std::size_t n, double rate, double horizon, Rng& rng);

/// The coalescent driven by large events on T(1) with radius c r, arriving at
/// total rate c^-2 times the radius mass, plus Kingman pair mergers at rate
/// beta. At an event every block is marked independently with probability
/// V(c r) u and the marked blocks merge when there are at least two.
PartitionPath sample_lambda_beta_c(std::size_t n, double c, double beta, const EventClass& large,
                                   double horizon, Rng& rng);

/// Labelled limit on T(1): independent Brownian labels with per-coordinate
/// variance b sigma_s2 per unit time between large events of radius c r at
/// total rate c^-2 times the radius mass. Every label in the event ball is
/// affected with probability u; affected blocks (including a lone one) merge
/// and take a label uniform in the ball.
GenealogyRecord sample_spatial_limit(std::span<const TorusPoint> points, double b, double c,
                                     const EventClass& large, double sigma_s2, double horizon,
                                     Rng& rng, bool stop_at_mrca = true);

/// Sup-distance between the empirical CDF of `samples` and `cdf`.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);
/// KS distance to Exp(1); needs at least ten samples.
double ks_exponential(std::span<const double> samples);
/// Asymptotic P[D_n >= d] under the null (Kolmogorov series with Stephens'
/// small-sample correction).
double kolmogorov_pvalue(double d, std::size_t n);

/// CSV rows "time,blocks" at every change of the block count.
void write_block_counts_csv(std::ostream& out, const PartitionPath& path);

}  // namespace slfv
