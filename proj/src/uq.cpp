#include "mcuq/uq.hpp"

#include "mcuq/normal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mcuq {

namespace {

void check_p(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in (0, 1]");
}

void check_factors(const DenseMatrix& u, const DenseMatrix& v) {
  if (u.cols() != v.cols() || u.cols() < 1)
    throw std::invalid_argument("U and V must share a positive column count");
}

// (U Uᵀ) squared entrywise.
Eigen::MatrixXd squared_projector(const DenseMatrix& q) {
  const Eigen::MatrixXd proj = q.values() * q.values().transpose();
  return proj.cwiseAbs2();
}

DenseMatrix sqrt_field(const Eigen::MatrixXd& s_sq) {
  return DenseMatrix(RowMatrix(s_sq.cwiseMax(0.0).cwiseSqrt()));
}

DenseMatrix homogeneous_field(const DenseMatrix& u, const DenseMatrix& v, double sigma_sq,
                              double p) {
  check_factors(u, v);
  check_p(p);
  const Eigen::VectorXd ru = u.values().rowwise().squaredNorm();
  const Eigen::VectorXd rv = v.values().rowwise().squaredNorm();
  Eigen::MatrixXd s_sq(u.rows(), v.rows());
  for (Index j = 0; j < v.rows(); ++j)
    for (Index i = 0; i < u.rows(); ++i) s_sq(i, j) = sigma_sq * (ru(i) + rv(j)) / p;
  return sqrt_field(s_sq);
}

void check_unit(std::span<const double> w, const char* name) {
  double sq = 0.0;
  for (double x : w) sq += x * x;
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-10)
    throw std::invalid_argument(std::string(name) + " must have unit norm");
}

double power_sum(std::span<const double> w, int k) {
  double acc = 0.0;
  for (double x : w) acc += std::pow(x, k);
  return acc;
}

}  // namespace

NoiseKind kind_of(const NoiseModel& model) {
  return static_cast<NoiseKind>(model.index());
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::HomogeneousGaussian: return "gaussian";
    case NoiseKind::Poisson: return "poisson";
    case NoiseKind::Binary: return "binary";
    case NoiseKind::HeterogeneousOracle: return "heterogeneous";
    case NoiseKind::Empirical: return "empirical";
  }
  return "unknown";
}

VarianceField oracle_variance(const DenseMatrix& u, const DenseMatrix& v,
                              const DenseMatrix& sigma_sq, double p) {
  check_factors(u, v);
  check_p(p);
  if (sigma_sq.rows() != u.rows() || sigma_sq.cols() != v.rows())
    throw std::invalid_argument("noise variance matrix must be " + std::to_string(u.rows()) + "x" +
                                std::to_string(v.rows()));
  if (sigma_sq.size() > 0 && sigma_sq.values().minCoeff() < 0.0)
    throw std::invalid_argument("noise variances must be nonnegative");

  const Eigen::MatrixXd var = sigma_sq.values();
  const Eigen::MatrixXd s_sq = (squared_projector(u) * var + var * squared_projector(v)) / p;
  return {sqrt_field(s_sq), NoiseKind::HeterogeneousOracle, p};
}

VarianceField gaussian_homogeneous_variance(const DenseMatrix& u, const DenseMatrix& v,
                                            double sigma, double p) {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  return {homogeneous_field(u, v, sigma * sigma, p), NoiseKind::HomogeneousGaussian, p};
}

VarianceField poisson_variance(const DenseMatrix& m_star, const DenseMatrix& u,
                               const DenseMatrix& v, double p) {
  VarianceField out = oracle_variance(u, v, noise_variance(PoissonNoise{}, m_star), p);
  out.model = NoiseKind::Poisson;
  return out;
}

VarianceField binary_variance(const DenseMatrix& m_star, const DenseMatrix& u,
                              const DenseMatrix& v, double p) {
  VarianceField out = oracle_variance(u, v, noise_variance(BinaryNoise{}, m_star), p);
  out.model = NoiseKind::Binary;
  return out;
}

DenseMatrix noise_variance(const NoiseModel& model, const DenseMatrix& mean) {
  switch (kind_of(model)) {
    case NoiseKind::HomogeneousGaussian: {
      const double sigma = std::get<HomogeneousGaussian>(model).sigma;
      if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
      return DenseMatrix::constant(mean.rows(), mean.cols(), sigma * sigma);
    }
    case NoiseKind::Poisson:
      if (mean.size() > 0 && mean.values().minCoeff() < 0.0)
        throw std::invalid_argument("Poisson means must be nonnegative");
      return mean;
    case NoiseKind::Binary:
      if (mean.size() > 0 && (mean.values().minCoeff() < 0.0 || mean.values().maxCoeff() > 1.0))
        throw std::invalid_argument("Bernoulli means must lie in [0, 1]");
      return DenseMatrix(RowMatrix(mean.values().array() * (1.0 - mean.values().array())));
    case NoiseKind::HeterogeneousOracle: {
      const DenseMatrix& var = std::get<HeterogeneousOracle>(model).sigma_sq;
      if (var.rows() != mean.rows() || var.cols() != mean.cols())
        throw std::invalid_argument("noise variance matrix shape mismatch");
      return var;
    }
    case NoiseKind::Empirical:
      break;
  }
  throw std::invalid_argument("empirical noise has no closed-form variance");
}

VarianceField rank1_closed_form(Rank1Model model, double sigma1, std::span<const double> u,
                                std::span<const double> v, double p, double gaussian_sigma_sq) {
  check_unit(u, "u");
  check_unit(v, "v");
  check_p(p);
  if (!(sigma1 > 0.0)) throw std::invalid_argument("sigma1 must be positive");

  const double u3 = power_sum(u, 3);
  const double v3 = power_sum(v, 3);
  const double u4 = power_sum(u, 4);
  const double v4 = power_sum(v, 4);
  const auto m = static_cast<Index>(u.size());
  const auto n = static_cast<Index>(v.size());
  Eigen::MatrixXd s_sq(m, n);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < n; ++j) {
      const double ui = u[static_cast<std::size_t>(i)];
      const double vj = v[static_cast<std::size_t>(j)];
      const double mij = sigma1 * ui * vj;
      switch (model) {
        case Rank1Model::Gaussian:
          s_sq(i, j) = gaussian_sigma_sq * (ui * ui + vj * vj) / p;
          break;
        case Rank1Model::Poisson:
          s_sq(i, j) = mij * (ui * u3 + vj * v3) / p;
          break;
        case Rank1Model::Binary:
          if (mij < 0.0 || mij > 1.0) throw std::invalid_argument("Bernoulli mean outside [0, 1]");
          s_sq(i, j) = mij * (ui * u3 + vj * v3 - mij * u4 - mij * v4) / p;
          break;
      }
    }
  }
  const NoiseKind kind = model == Rank1Model::Gaussian ? NoiseKind::HomogeneousGaussian
                         : model == Rank1Model::Poisson ? NoiseKind::Poisson
                                                        : NoiseKind::Binary;
  return {sqrt_field(s_sq), kind, p};
}

PluginVariance plugin_variance(const DenseMatrix& md, const DenseMatrix& ud, const DenseMatrix& vd,
                               double p, Rank1Model model, double sigma_hat_sq) {
  PluginVariance out;
  switch (model) {
    case Rank1Model::Gaussian:
      if (!(sigma_hat_sq >= 0.0)) throw std::invalid_argument("sigma_hat_sq must be >= 0");
      out.sigma_hat_sq = sigma_hat_sq;
      out.field = {homogeneous_field(ud, vd, sigma_hat_sq, p), NoiseKind::HomogeneousGaussian, p};
      return out;
    case Rank1Model::Poisson:
    case Rank1Model::Binary: {
      const double upper = model == Rank1Model::Binary ? 1.0 : std::numeric_limits<double>::infinity();
      RowMatrix clamped = md.values();
      for (Index k = 0; k < clamped.size(); ++k) {
        double& x = clamped.data()[k];
        const double c = std::clamp(x, 0.0, upper);
        if (c != x) {
          ++out.clamped;
          x = c;
        }
      }
      const DenseMatrix mean(std::move(clamped));
      out.field = model == Rank1Model::Poisson ? poisson_variance(mean, ud, vd, p)
                                               : binary_variance(mean, ud, vd, p);
      return out;
    }
  }
  throw std::invalid_argument("unknown plug-in model");
}

PluginVariance empirical_plugin_variance(const MaskedObservations& obs, const DebiasedEstimate& est,
                                         Rank1Model model) {
  double sigma_hat_sq = 0.0;
  if (model == Rank1Model::Gaussian) {
    if (obs.size() == 0) throw std::invalid_argument("Gaussian plug-in needs observations");
    for (const Observation& e : obs.entries()) {
      const double r = e.value - est.Md(e.row, e.col);
      sigma_hat_sq += r * r;
    }
    sigma_hat_sq /= static_cast<double>(obs.size());
  }
  return plugin_variance(est.Md, est.svd.U, est.svd.V, est.p_used, model, sigma_hat_sq);
}

ResidualVariance empirical_residual_variance(const MaskedObservations& obs,
                                             const DebiasedEstimate& est, Index i, Index j) {
  const DenseMatrix& ud = est.svd.U;
  const DenseMatrix& vd = est.svd.V;
  if (i < 0 || i >= ud.rows() || j < 0 || j >= vd.rows())
    throw std::invalid_argument("entry out of range");
  const double p = est.p_used;
  check_p(p);

  ResidualVariance out;
  double col_part = 0.0;
  double row_part = 0.0;
  bool any = false;
  for (const Observation& e : obs.entries()) {
    if (e.col != j && e.row != i) continue;
    any = true;
    const double resid = e.value - est.Md(e.row, e.col);
    const double r2 = resid * resid;
    if (e.col == j) {
      const double w = ud.values().row(i).dot(ud.values().row(e.row));
      col_part += r2 / p * w * w;
    }
    if (e.row == i) {
      const double w = vd.values().row(e.col).dot(vd.values().row(j));
      row_part += r2 / p * w * w;
    }
  }
  out.unsupported = !any;
  out.s_sq = (col_part + row_part) / p;
  return out;
}

VarianceField residual_variance_field(const MaskedObservations& obs, const DebiasedEstimate& est) {
  const double p = est.p_used;
  check_p(p);
  Eigen::MatrixXd e2 = Eigen::MatrixXd::Zero(obs.rows(), obs.cols());
  for (const Observation& e : obs.entries()) {
    const double r = e.value - est.Md(e.row, e.col);
    e2(e.row, e.col) = r * r;
  }
  const Eigen::MatrixXd s_sq =
      (squared_projector(est.svd.U) * e2 + e2 * squared_projector(est.svd.V)) / (p * p);
  return {sqrt_field(s_sq), NoiseKind::Empirical, p};
}

IntervalField intervals(const DenseMatrix& md, const VarianceField& s, double level,
                        std::optional<DegeneracyFallback> fallback) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0, 1)");
  if (md.rows() != s.s.rows() || md.cols() != s.s.cols())
    throw std::invalid_argument("variance field shape mismatch");
  const double z = normal_quantile(0.5 * (1.0 + level));
  RowMatrix lo(md.rows(), md.cols());
  RowMatrix hi(md.rows(), md.cols());
  IntervalField out;
  for (Index i = 0; i < md.rows(); ++i) {
    for (Index j = 0; j < md.cols(); ++j) {
      double half = z * s.s(i, j);
      if (fallback && s.s(i, j) < fallback->threshold) {
        half = fallback->half_width;
        ++out.fallback_count;
      }
      lo(i, j) = md(i, j) - half;
      hi(i, j) = md(i, j) + half;
    }
  }
  out.lo = DenseMatrix(std::move(lo));
  out.hi = DenseMatrix(std::move(hi));
  out.level = level;
  return out;
}

double coverage_rate(const IntervalField& iv, const DenseMatrix& truth) {
  if (truth.rows() != iv.lo.rows() || truth.cols() != iv.lo.cols())
    throw std::invalid_argument("truth shape mismatch");
  if (truth.size() == 0) throw std::invalid_argument("empty coverage subset");
  std::size_t hit = 0;
  for (Index i = 0; i < truth.rows(); ++i)
    for (Index j = 0; j < truth.cols(); ++j)
      if (truth(i, j) >= iv.lo(i, j) && truth(i, j) <= iv.hi(i, j)) ++hit;
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double coverage_rate(const IntervalField& iv, const DenseMatrix& truth,
                     std::span<const EntryIndex> subset) {
  if (truth.rows() != iv.lo.rows() || truth.cols() != iv.lo.cols())
    throw std::invalid_argument("truth shape mismatch");
  if (subset.empty()) throw std::invalid_argument("empty coverage subset");
  std::size_t hit = 0;
  for (const EntryIndex& e : subset) {
    if (e.row < 0 || e.row >= truth.rows() || e.col < 0 || e.col >= truth.cols())
      throw std::invalid_argument("subset entry out of range");
    const double t = truth(e.row, e.col);
    if (t >= iv.lo(e.row, e.col) && t <= iv.hi(e.row, e.col)) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(subset.size());
}

ZScores zscores(const DenseMatrix& md, const DenseMatrix& truth, const DenseMatrix& s,
                double min_s, std::span<const EntryIndex> subset) {
  if (md.rows() != truth.rows() || md.cols() != truth.cols() || md.rows() != s.rows() ||
      md.cols() != s.cols())
    throw std::invalid_argument("zscores: shape mismatch");
  ZScores out;
  auto visit = [&](Index i, Index j) {
    if (s(i, j) <= min_s) {
      ++out.excluded;
      return;
    }
    out.z.push_back((md(i, j) - truth(i, j)) / s(i, j));
  };
  if (subset.empty()) {
    for (Index i = 0; i < md.rows(); ++i)
      for (Index j = 0; j < md.cols(); ++j) visit(i, j);
  } else {
    for (const EntryIndex& e : subset) visit(e.row, e.col);
  }
  return out;
}

double ks_statistic(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::vector<double> sorted(z.begin(), z.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    const double f = normal_cdf(sorted[k]);
    const double below = static_cast<double>(k) / n;
    const double above = static_cast<double>(k + 1) / n;
    d = std::max({d, f - below, above - f});
  }
  return d;
}

double entrywise_bound(Index m, Index n, double l_hat, double mu, Index r, double kappa, double p) {
  if (m < 1 || n < 1 || r < 1 || !(mu > 0.0) || !(kappa > 0.0) || !(l_hat >= 0.0))
    throw std::invalid_argument("entrywise_bound: arguments must be positive");
  check_p(p);
  const double small = static_cast<double>(std::min(m, n));
  const double large = static_cast<double>(std::max(m, n));
  return kappa * mu * static_cast<double>(r) * l_hat * std::sqrt(std::log(large) / (small * p));
}

double entrywise_bound(const DebiasedEstimate& est, double l_hat, double mu, Index r, double kappa,
                       double p) {
  return entrywise_bound(est.Md.rows(), est.Md.cols(), l_hat, mu, r, kappa, p);
}

double subexponential_scale_proxy(const MaskedObservations& obs, const DebiasedEstimate& est) {
  if (obs.size() == 0) return 0.0;
  std::vector<double> abs_res;
  abs_res.reserve(obs.size());
  for (const Observation& e : obs.entries()) abs_res.push_back(std::abs(e.value - est.Md(e.row, e.col)));
  std::sort(abs_res.begin(), abs_res.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(abs_res.size())));
  return abs_res[std::max<std::size_t>(rank, 1) - 1];
}

DegeneracyFallback default_fallback(const MaskedObservations& obs, const DebiasedEstimate& est,
                                    double rel_threshold) {
  DegeneracyFallback fb;
  fb.threshold = rel_threshold * norm_max(est.Md);
  const auto& sigma = est.svd.sigma;
  const Index r = est.svd.rank();
  double half = fb.threshold;
  if (r > 0 && sigma.back() > 0.0) {
    const double kappa = sigma.front() / sigma.back();
    const double mu = incoherence(est.svd.U, est.svd.V, r);
    half = std::max(half, entrywise_bound(est, subexponential_scale_proxy(obs, est), mu, r, kappa,
                                          est.p_used));
  }
  fb.half_width = half;
  return fb;
}

}  // namespace mcuq
