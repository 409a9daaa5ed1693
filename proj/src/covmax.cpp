#include "mcuq/covmax.hpp"

#include "mcuq/normal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <stdexcept>

namespace mcuq {

namespace {

double gain(double length, double s) { return 2.0 * normal_cdf(length / (2.0 * s)) - 1.0; }

// Stationary length for multiplier λ: φ(ℓ/2s)/s = λ, or 0 if φ(0)/s <= λ.
double length_at(double lambda, double s) {
  const double arg = lambda * s * std::sqrt(2.0 * std::numbers::pi);
  if (arg >= 1.0) return 0.0;
  return 2.0 * s * std::sqrt(2.0 * std::log(1.0 / arg));
}

IntervalAllocation centred(const AllocationProblem& prob, const std::vector<double>& lengths) {
  IntervalAllocation out;
  out.entries = prob.entries;
  out.intervals.resize(lengths.size());
  for (std::size_t e = 0; e < lengths.size(); ++e) {
    const double half = 0.5 * lengths[e];
    out.intervals[e] = {prob.center[e] - half, prob.center[e] + half};
    out.total_length += out.intervals[e].length();
    if (prob.s[e] == 0.0) ++out.degenerate;
  }
  out.expected_coverage = expected_coverage(out, prob.center, prob.s);
  return out;
}

}  // namespace

void AllocationProblem::validate() const {
  if (!(budget >= 0.0) || !std::isfinite(budget)) throw std::invalid_argument("budget must be >= 0");
  if (center.size() != s.size() || entries.size() != s.size())
    throw std::invalid_argument("allocation problem arrays differ in length");
  for (std::size_t e = 0; e < s.size(); ++e) {
    if (!(s[e] >= 0.0) || !std::isfinite(s[e]))
      throw std::invalid_argument("standard deviations must be finite and >= 0");
    if (!std::isfinite(center[e])) throw std::invalid_argument("centers must be finite");
  }
}

double coverage_marginal(double length, double s) {
  return normal_pdf(length / (2.0 * s)) / s;
}

double expected_coverage(const IntervalAllocation& alloc, std::span<const double> centers,
                         std::span<const double> s) {
  if (centers.size() != alloc.intervals.size() || s.size() != alloc.intervals.size())
    throw std::invalid_argument("expected_coverage: shape mismatch");
  if (alloc.intervals.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t e = 0; e < s.size(); ++e) {
    const Interval& iv = alloc.intervals[e];
    if (s[e] == 0.0) {
      acc += (centers[e] >= iv.lo && centers[e] <= iv.hi) ? 1.0 : 0.0;
    } else {
      acc += normal_cdf((iv.hi - centers[e]) / s[e]) - normal_cdf((iv.lo - centers[e]) / s[e]);
    }
  }
  return acc / static_cast<double>(s.size());
}

IntervalAllocation allocate(const AllocationProblem& prob) {
  prob.validate();
  const std::size_t count = prob.s.size();
  std::vector<double> lengths(count, 0.0);

  double lambda_hi = 0.0;  // at or above this every length is zero
  double s_sum = 0.0;
  for (double s : prob.s) {
    if (s > 0.0) {
      lambda_hi = std::max(lambda_hi, 1.0 / (s * std::sqrt(2.0 * std::numbers::pi)));
      s_sum += s;
    }
  }
  if (prob.budget == 0.0 || lambda_hi == 0.0) {
    IntervalAllocation out = centred(prob, lengths);
    out.multiplier = lambda_hi;
    return out;
  }

  auto total = [&](double lambda) {
    double acc = 0.0;
    for (std::size_t e = 0; e < count; ++e)
      if (prob.s[e] > 0.0) acc += length_at(lambda, prob.s[e]);
    return acc;
  };

  // Total length is decreasing in λ; bracket the budget from below.
  double lambda_lo = lambda_hi;
  constexpr double kFloor = 1e-300;
  while (total(lambda_lo) < prob.budget && lambda_lo > kFloor) lambda_lo = std::max(lambda_lo * 1e-3, kFloor);

  double lambda = lambda_hi;
  if (total(lambda_lo) < prob.budget) {
    // Budget beyond what any representable multiplier absorbs: take the
    // floor solution and spread the remainder in proportion to s.
    for (std::size_t e = 0; e < count; ++e)
      if (prob.s[e] > 0.0) lengths[e] = length_at(lambda_lo, prob.s[e]);
    const double rest = prob.budget - total(lambda_lo);
    for (std::size_t e = 0; e < count; ++e)
      if (prob.s[e] > 0.0) lengths[e] += rest * prob.s[e] / s_sum;
    lambda = lambda_lo;
  } else {
    double lo = std::log(lambda_lo);
    double hi = std::log(lambda_hi);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (total(std::exp(mid)) >= prob.budget) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    lambda = std::exp(hi);
    double used = 0.0;
    for (std::size_t e = 0; e < count; ++e) {
      if (prob.s[e] > 0.0) lengths[e] = length_at(lambda, prob.s[e]);
      used += lengths[e];
    }
    if (used > 0.0) {
      const double scale = prob.budget / used;
      for (double& l : lengths) l *= scale;
    } else {
      // Budget too small to resolve: share it by the marginal ordering at 0.
      lengths.assign(count, 0.0);
      std::size_t best = 0;
      for (std::size_t e = 0; e < count; ++e)
        if (prob.s[e] > 0.0 && (prob.s[best] == 0.0 || prob.s[e] < prob.s[best])) best = e;
      lengths[best] = prob.budget;
    }
  }

  IntervalAllocation out = centred(prob, lengths);
  if (out.total_length > prob.budget) {
    // Rounding in the centred endpoints; shave the largest interval.
    const auto widest = std::max_element(out.intervals.begin(), out.intervals.end(),
                                         [](const Interval& a, const Interval& b) {
                                           return a.length() < b.length();
                                         });
    const double excess = out.total_length - prob.budget;
    widest->hi -= excess;
    out.total_length = 0.0;
    for (const Interval& iv : out.intervals) out.total_length += iv.length();
    out.expected_coverage = expected_coverage(out, prob.center, prob.s);
  }
  out.multiplier = lambda;
  return out;
}

IntervalAllocation allocate_greedy(const AllocationProblem& prob, std::size_t steps) {
  prob.validate();
  if (steps == 0) throw std::invalid_argument("greedy needs at least one step");
  const std::size_t count = prob.s.size();
  std::vector<double> lengths(count, 0.0);
  if (prob.budget == 0.0 || count == 0) return centred(prob, lengths);

  const double delta = prob.budget / static_cast<double>(steps);
  using Item = std::pair<double, std::size_t>;
  auto cmp = [](const Item& a, const Item& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  };
  std::priority_queue<Item, std::vector<Item>, decltype(cmp)> heap(cmp);
  std::vector<std::size_t> units(count, 0);
  for (std::size_t e = 0; e < count; ++e)
    if (prob.s[e] > 0.0) heap.push({gain(delta, prob.s[e]), e});
  if (heap.empty()) return centred(prob, lengths);

  for (std::size_t step = 0; step < steps; ++step) {
    const auto [g, e] = heap.top();
    heap.pop();
    ++units[e];
    const double cur = delta * static_cast<double>(units[e]);
    heap.push({gain(cur + delta, prob.s[e]) - gain(cur, prob.s[e]), e});
  }
  for (std::size_t e = 0; e < count; ++e) lengths[e] = delta * static_cast<double>(units[e]);
  IntervalAllocation out = centred(prob, lengths);
  const auto [g, e] = heap.top();
  out.multiplier = g / delta;
  return out;
}

double realized_coverage(const IntervalAllocation& alloc, std::span<const double> truth) {
  if (truth.size() != alloc.intervals.size())
    throw std::invalid_argument("truth values missing for allocated entries");
  if (truth.empty()) throw std::invalid_argument("no allocated entries");
  std::size_t hit = 0;
  for (std::size_t e = 0; e < truth.size(); ++e)
    if (truth[e] >= alloc.intervals[e].lo && truth[e] <= alloc.intervals[e].hi) ++hit;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double realized_coverage(const IntervalAllocation& alloc, const DenseMatrix& truth) {
  std::vector<double> values;
  values.reserve(alloc.entries.size());
  for (const EntryIndex& e : alloc.entries) {
    if (e.row < 0 || e.row >= truth.rows() || e.col < 0 || e.col >= truth.cols())
      throw std::invalid_argument("truth matrix does not cover entry (" + std::to_string(e.row) +
                                  "," + std::to_string(e.col) + ")");
    values.push_back(truth(e.row, e.col));
  }
  return realized_coverage(alloc, values);
}

}  // namespace mcuq
