#pragma once

// Interval lengths that maximize expected Gaussian coverage under a total
// length budget:
//
//   maximize  Σ_e [2Φ(ℓ_e / 2s_e) − 1]   subject to  Σ_e ℓ_e <= α, ℓ >= 0
//
// Each term is concave in ℓ_e, so the optimum equalizes the marginal gains
// φ(ℓ_e / 2s_e)/s_e at a common multiplier λ* (water-filling). Intervals are
// centred at the point estimate.

#include "mcuq/matgrid.hpp"
#include "mcuq/uq.hpp"

#include <span>
#include <vector>

namespace mcuq {

struct AllocationProblem {
  std::vector<EntryIndex> entries;
  std::vector<double> center;
  std::vector<double> s;
  double budget = 0.0;

  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double length() const noexcept { return hi - lo; }
};

struct IntervalAllocation {
  std::vector<EntryIndex> entries;
  std::vector<Interval> intervals;
  double total_length = 0.0;
  double multiplier = 0.0;
  double expected_coverage = 0.0;
  std::size_t degenerate = 0;  // entries with s = 0, given zero length
};

/// Mean over entries of P(N(c, s²) ∈ [a, b]). An s = 0 entry counts as
/// covered when its centre lies in its interval.
double expected_coverage(const IntervalAllocation& alloc, std::span<const double> centers,
                         std::span<const double> s);

/// Water-filling solution; λ* found by bisection in log scale.
IntervalAllocation allocate(const AllocationProblem& prob);

/// Discretized greedy: hands out the budget in `steps` equal increments, each
/// to the entry with the largest coverage gain. Exact on that grid because the
/// per-entry objective is concave.
IntervalAllocation allocate_greedy(const AllocationProblem& prob, std::size_t steps = 100000);

/// Fraction of entries whose true value lies in its interval. `truth` is
/// aligned with alloc.entries.
double realized_coverage(const IntervalAllocation& alloc, std::span<const double> truth);
double realized_coverage(const IntervalAllocation& alloc, const DenseMatrix& truth);

/// Marginal gain φ(ℓ/2s)/s of entry length ℓ.
double coverage_marginal(double length, double s);

}  // namespace mcuq
