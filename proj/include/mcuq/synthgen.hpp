#pragma once

// Synthetic ground truth, noisy observations and the Monte-Carlo harness for
// coverage and normality checks.
//
// Streams: trial t draws its factors from substream 0, its observation mask
// from substream 1 and its noise from substream 2 of stream (seed, t).

#include "mcuq/estimator.hpp"
#include "mcuq/matgrid.hpp"
#include "mcuq/uq.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace mcuq {

enum class VarianceSource { Oracle, Plugin, Residual };

std::string_view to_string(VarianceSource src);

struct SimConfig {
  Index m = 100;
  Index n = 100;
  Index r = 2;
  double p = 0.6;
  double mean_target = 20.0;
  NoiseModel noise = PoissonNoise{};
  int trials = 1;
  std::uint64_t seed = 0;
  VarianceSource variance_source = VarianceSource::Oracle;
  double level = 0.95;
  /// Fit settings; `fit.rank` is overridden by r.
  FitConfig fit{};

  void validate() const;
  FitConfig fit_config() const;
};

struct SimInstance {
  DenseMatrix m_star;
  SvdTriple svd_star;
  MaskedObservations obs;
  std::uint64_t seed = 0;
  std::uint64_t trial = 0;
};

/// M* = k U Vᵀ with Gamma(2,1) factors. k matches the mean target; for
/// Bernoulli noise k is reduced when needed so that max M* <= 0.95.
struct GroundTruth {
  DenseMatrix m_star;
  SvdTriple svd_star;
};

GroundTruth gen_ground_truth(const SimConfig& cfg, std::uint64_t trial);
MaskedObservations sample_observations(const SimConfig& cfg, const DenseMatrix& m_star,
                                       std::uint64_t trial);
SimInstance gen_instance(const SimConfig& cfg, std::uint64_t trial);

/// Entry variances under the configured noise model at the true mean.
VarianceField variance_for(const SimConfig& cfg, VarianceSource source, const DenseMatrix& m_star,
                           const SvdTriple& svd_star, const MaskedObservations& obs,
                           const DebiasedEstimate& est);

struct Histogram {
  std::vector<double> left;
  std::vector<double> right;
  std::vector<std::size_t> count;
};

/// Bins of width `width` covering [-limit, limit] plus two open-ended tails.
Histogram histogram(std::span<const double> z, double limit = 4.0, double width = 0.25);

struct CoverageReport {
  std::vector<double> trial_coverage;  // NaN for skipped trials
  std::vector<int> trial_iters;
  std::vector<std::size_t> skipped_trials;
  double mean_coverage = 0.0;
  double std_coverage = 0.0;
  bool single_trial = false;  // std reported as 0
  EntryIndex tracked_entry;
  std::vector<double> z;      // tracked entry, trial order, excluded trials omitted
  std::vector<std::size_t> z_trials;  // trial index of each z sample
  std::size_t z_excluded = 0;
  double ks = 0.0;            // NaN when no z samples
  Histogram hist;
  std::size_t fallback_entries = 0;
  double seconds = 0.0;       // wall clock, not part of the deterministic output
};

/// Coverage of level-`cfg.level` intervals centred at M^d against M* per
/// trial. Trials run on up to `threads` workers; the report does not depend
/// on the thread count.
CoverageReport run_coverage_experiment(const SimConfig& cfg, int threads = 1,
                                       EntryIndex tracked = {0, 0});

/// Repeats trials on one fixed ground truth (drawn from trial 0), resampling
/// Ω and noise, and collects z = (M^d_ij − M*_ij)/s_ij for the given entry.
/// Entries with s_ij below 1e-8 ‖M^d‖_max are excluded and counted.
CoverageReport run_distribution_check(const SimConfig& cfg, EntryIndex entry, int threads = 1);

}  // namespace mcuq
