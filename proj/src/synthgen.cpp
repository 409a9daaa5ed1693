#include "mcuq/synthgen.hpp"

#include "mcuq/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "mcuq/rng.hpp"

namespace mcuq {

namespace {

constexpr std::uint32_t kFactorStream = 0;
constexpr std::uint32_t kMaskStream = 1;
constexpr std::uint32_t kNoiseStream = 2;
constexpr double kBinaryMaxMean = 0.95;
constexpr double kDegenerateRel = 1e-8;

struct TrialResult {
  bool skipped = false;
  double coverage = std::numeric_limits<double>::quiet_NaN();
  int iters = 0;
  bool z_valid = false;
  double z = 0.0;
  std::size_t fallback = 0;
};

// Runs job(t) for t in [0, count) on up to `threads` workers. Results are
// stored by index, so scheduling does not affect them.
template <typename Job>
std::vector<TrialResult> run_trials(int count, int threads, Job job) {
  std::vector<TrialResult> results(static_cast<std::size_t>(count));
  const int workers = std::clamp(threads, 1, std::max(count, 1));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const int t = next.fetch_add(1);
      if (t >= count) return;
      try {
        results[static_cast<std::size_t>(t)] = job(t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

Rank1Model plugin_model_for(const NoiseModel& noise) {
  switch (kind_of(noise)) {
    case NoiseKind::Poisson: return Rank1Model::Poisson;
    case NoiseKind::Binary: return Rank1Model::Binary;
    case NoiseKind::HomogeneousGaussian: return Rank1Model::Gaussian;
    default: break;
  }
  throw std::invalid_argument("simulation noise must be poisson, binary or gaussian");
}

TrialResult evaluate_trial(const SimConfig& cfg, const DenseMatrix& m_star,
                           const SvdTriple& svd_star, const MaskedObservations& obs,
                           EntryIndex tracked, const VarianceField* fixed_variance) {
  TrialResult out;
  DebiasedEstimate est;
  try {
    est = fit(obs, cfg.fit_config());
  } catch (const NumericalError&) {
    out.skipped = true;
    return out;
  }
  out.iters = est.iters_used;
  const VarianceField s = fixed_variance
                              ? *fixed_variance
                              : variance_for(cfg, cfg.variance_source, m_star, svd_star, obs, est);
  const DegeneracyFallback fb = default_fallback(obs, est, kDegenerateRel);
  const IntervalField iv = intervals(est.Md, s, cfg.level, fb);
  out.coverage = coverage_rate(iv, m_star);
  out.fallback = iv.fallback_count;

  const double s_ij = s.s(tracked.row, tracked.col);
  if (s_ij >= fb.threshold && s_ij > 0.0) {
    out.z_valid = true;
    out.z = (est.Md(tracked.row, tracked.col) - m_star(tracked.row, tracked.col)) / s_ij;
  }
  return out;
}

CoverageReport summarize(const std::vector<TrialResult>& results, EntryIndex tracked) {
  CoverageReport rep;
  rep.tracked_entry = tracked;
  std::vector<double> kept;
  for (std::size_t t = 0; t < results.size(); ++t) {
    const TrialResult& tr = results[t];
    rep.trial_coverage.push_back(tr.coverage);
    rep.trial_iters.push_back(tr.iters);
    if (tr.skipped) {
      rep.skipped_trials.push_back(t);
      continue;
    }
    kept.push_back(tr.coverage);
    rep.fallback_entries += tr.fallback;
    if (tr.z_valid) {
      rep.z.push_back(tr.z);
      rep.z_trials.push_back(t);
    } else {
      ++rep.z_excluded;
    }
  }
  if (!kept.empty()) {
    double sum = 0.0;
    for (double c : kept) sum += c;
    rep.mean_coverage = sum / static_cast<double>(kept.size());
    if (kept.size() > 1) {
      double ss = 0.0;
      for (double c : kept) ss += (c - rep.mean_coverage) * (c - rep.mean_coverage);
      rep.std_coverage = std::sqrt(ss / static_cast<double>(kept.size() - 1));
    } else {
      rep.single_trial = true;
    }
  } else {
    rep.mean_coverage = std::numeric_limits<double>::quiet_NaN();
  }
  rep.ks = rep.z.empty() ? std::numeric_limits<double>::quiet_NaN() : ks_statistic(rep.z);
  rep.hist = histogram(rep.z);
  return rep;
}

void check_entry(const SimConfig& cfg, EntryIndex e) {
  if (e.row < 0 || e.row >= cfg.m || e.col < 0 || e.col >= cfg.n)
    throw std::invalid_argument("tracked entry out of range");
}

}  // namespace

std::string_view to_string(VarianceSource src) {
  switch (src) {
    case VarianceSource::Oracle: return "oracle";
    case VarianceSource::Plugin: return "plugin";
    case VarianceSource::Residual: return "residual";
  }
  return "unknown";
}

void SimConfig::validate() const {
  if (m < 1 || n < 1) throw std::invalid_argument("m and n must be >= 1");
  if (r < 1 || r > std::min(m, n)) throw std::invalid_argument("r must lie in [1, min(m, n)]");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in (0, 1]");
  if (!(mean_target > 0.0) || !std::isfinite(mean_target))
    throw std::invalid_argument("mean_target must be positive");
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  const NoiseKind kind = kind_of(noise);
  if (kind != NoiseKind::Poisson && kind != NoiseKind::Binary &&
      kind != NoiseKind::HomogeneousGaussian)
    throw std::invalid_argument("noise must be poisson, binary or gaussian");
  if (kind == NoiseKind::HomogeneousGaussian && !(std::get<HomogeneousGaussian>(noise).sigma > 0.0))
    throw std::invalid_argument("gaussian sigma must be positive");
  fit_config().validate();
}

FitConfig SimConfig::fit_config() const {
  FitConfig cfg = fit;
  cfg.rank = r;
  return cfg;
}

GroundTruth gen_ground_truth(const SimConfig& cfg, std::uint64_t trial) {
  cfg.validate();
  RngStream rng(cfg.seed, trial, kFactorStream);
  RowMatrix u(cfg.m, cfg.r);
  RowMatrix v(cfg.n, cfg.r);
  for (Index k = 0; k < u.size(); ++k) u.data()[k] = rng.gamma2();
  for (Index k = 0; k < v.size(); ++k) v.data()[k] = rng.gamma2();

  const RowMatrix product = u * v.transpose();
  const double cells = static_cast<double>(cfg.m) * static_cast<double>(cfg.n);
  double k = cfg.mean_target * cells / product.sum();
  if (kind_of(cfg.noise) == NoiseKind::Binary) k = std::min(k, kBinaryMaxMean / product.maxCoeff());

  GroundTruth gt;
  gt.m_star = DenseMatrix(RowMatrix(k * product));
  if (gt.m_star.values().minCoeff() < 0.0) throw std::logic_error("negative ground truth entry");
  const double root = std::sqrt(k);
  gt.svd_star = svd_of_product(DenseMatrix(RowMatrix(root * u)), DenseMatrix(RowMatrix(root * v)));
  return gt;
}

MaskedObservations sample_observations(const SimConfig& cfg, const DenseMatrix& m_star,
                                       std::uint64_t trial) {
  RngStream mask(cfg.seed, trial, kMaskStream);
  RngStream noise(cfg.seed, trial, kNoiseStream);
  const NoiseKind kind = kind_of(cfg.noise);
  std::vector<Observation> entries;
  entries.reserve(static_cast<std::size_t>(cfg.p * static_cast<double>(m_star.size()) * 1.1) + 16);
  for (Index i = 0; i < m_star.rows(); ++i) {
    for (Index j = 0; j < m_star.cols(); ++j) {
      if (!mask.bernoulli(cfg.p)) continue;
      const double mean = m_star(i, j);
      double value = 0.0;
      switch (kind) {
        case NoiseKind::Poisson:
          value = static_cast<double>(noise.poisson(mean));
          break;
        case NoiseKind::Binary:
          value = noise.bernoulli(mean) ? 1.0 : 0.0;
          break;
        case NoiseKind::HomogeneousGaussian:
          value = mean + std::get<HomogeneousGaussian>(cfg.noise).sigma * noise.normal();
          break;
        default:
          throw std::invalid_argument("unsupported simulation noise");
      }
      entries.push_back({i, j, value});
    }
  }
  return MaskedObservations::create(m_star.rows(), m_star.cols(), std::move(entries), cfg.p);
}

SimInstance gen_instance(const SimConfig& cfg, std::uint64_t trial) {
  GroundTruth gt = gen_ground_truth(cfg, trial);
  MaskedObservations obs = sample_observations(cfg, gt.m_star, trial);
  return {std::move(gt.m_star), std::move(gt.svd_star), std::move(obs), cfg.seed, trial};
}

VarianceField variance_for(const SimConfig& cfg, VarianceSource source, const DenseMatrix& m_star,
                           const SvdTriple& svd_star, const MaskedObservations& obs,
                           const DebiasedEstimate& est) {
  switch (source) {
    case VarianceSource::Oracle: {
      VarianceField f =
          oracle_variance(svd_star.U, svd_star.V, noise_variance(cfg.noise, m_star), cfg.p);
      f.model = kind_of(cfg.noise);
      return f;
    }
    case VarianceSource::Plugin:
      return empirical_plugin_variance(obs, est, plugin_model_for(cfg.noise)).field;
    case VarianceSource::Residual:
      return residual_variance_field(obs, est);
  }
  throw std::invalid_argument("unknown variance source");
}

Histogram histogram(std::span<const double> z, double limit, double width) {
  Histogram h;
  const auto bins = static_cast<std::size_t>(std::llround(2.0 * limit / width));
  h.left.push_back(-std::numeric_limits<double>::infinity());
  h.right.push_back(-limit);
  for (std::size_t b = 0; b < bins; ++b) {
    h.left.push_back(-limit + width * static_cast<double>(b));
    h.right.push_back(-limit + width * static_cast<double>(b + 1));
  }
  h.left.push_back(limit);
  h.right.push_back(std::numeric_limits<double>::infinity());
  h.count.assign(h.left.size(), 0);
  for (double x : z) {
    std::size_t idx = 0;
    if (x < -limit) {
      idx = 0;
    } else if (x >= limit) {
      idx = bins + 1;
    } else {
      idx = 1 + std::min(bins - 1, static_cast<std::size_t>((x + limit) / width));
    }
    ++h.count[idx];
  }
  return h;
}

CoverageReport run_coverage_experiment(const SimConfig& cfg, int threads, EntryIndex tracked) {
  cfg.validate();
  check_entry(cfg, tracked);
  const auto start = std::chrono::steady_clock::now();
  auto results = run_trials(cfg.trials, threads, [&](int t) {
    const SimInstance inst = gen_instance(cfg, static_cast<std::uint64_t>(t));
    return evaluate_trial(cfg, inst.m_star, inst.svd_star, inst.obs, tracked, nullptr);
  });
  CoverageReport rep = summarize(results, tracked);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

CoverageReport run_distribution_check(const SimConfig& cfg, EntryIndex entry, int threads) {
  cfg.validate();
  check_entry(cfg, entry);
  const auto start = std::chrono::steady_clock::now();
  const GroundTruth gt = gen_ground_truth(cfg, 0);
  std::optional<VarianceField> fixed;
  if (cfg.variance_source == VarianceSource::Oracle) {
    fixed = oracle_variance(gt.svd_star.U, gt.svd_star.V, noise_variance(cfg.noise, gt.m_star), cfg.p);
  }
  auto results = run_trials(cfg.trials, threads, [&](int t) {
    const MaskedObservations obs = sample_observations(cfg, gt.m_star, static_cast<std::uint64_t>(t));
    return evaluate_trial(cfg, gt.m_star, gt.svd_star, obs, entry, fixed ? &*fixed : nullptr);
  });
  CoverageReport rep = summarize(results, entry);
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace mcuq
