#include "mcuq/estimator.hpp"

#include "mcuq/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mcuq {

namespace {

constexpr int kMaxHalvings = 30;
constexpr double kDivergenceFactor = 10.0;
constexpr double kMaxGramCondition = 1e12;

struct SpectralStart {
  FactorPair factors;
  double sigma1 = 0.0;
};

SpectralStart spectral_start(const MaskedObservations& obs, Index r) {
  if (r < 1 || r > std::min(obs.rows(), obs.cols()))
    throw std::invalid_argument("rank " + std::to_string(r) + " out of range");
  const SvdTriple svd = truncated_svd(obs.scaled_dense(), r);
  RowMatrix root = RowMatrix::Zero(r, r);
  for (Index k = 0; k < r; ++k) root(k, k) = std::sqrt(svd.sigma[static_cast<std::size_t>(k)]);
  SpectralStart out;
  out.factors.X = DenseMatrix(RowMatrix(svd.U.values() * root));
  out.factors.Y = DenseMatrix(RowMatrix(svd.V.values() * root));
  out.sigma1 = svd.sigma.front();
  return out;
}

void check_shapes(const FactorPair& f, const MaskedObservations& obs) {
  if (f.X.rows() != obs.rows() || f.Y.rows() != obs.cols() || f.X.cols() != f.Y.cols())
    throw std::invalid_argument("factor shapes do not match the observation grid");
}

// Residuals XᵢYⱼᵀ − O_ij over Ω in entry order.
void residuals(const RowMatrix& x, const RowMatrix& y, std::span<const Observation> entries,
               std::vector<double>& out) {
  const Index r = x.cols();
  out.resize(entries.size());
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Observation& e = entries[k];
    const double* xi = x.data() + e.row * r;
    const double* yj = y.data() + e.col * r;
    double dot = 0.0;
    for (Index c = 0; c < r; ++c) dot += xi[c] * yj[c];
    out[k] = dot - e.value;
  }
}

double objective_from(const std::vector<double>& res, const RowMatrix& x, const RowMatrix& y,
                      double lambda, double p) {
  double sq = 0.0;
  for (double v : res) sq += v * v;
  return (0.5 * sq + 0.5 * lambda * (x.squaredNorm() + y.squaredNorm())) / p;
}

void gradient_from(const std::vector<double>& res, const RowMatrix& x, const RowMatrix& y,
                   std::span<const Observation> entries, double lambda, double p, RowMatrix& gx,
                   RowMatrix& gy) {
  const Index r = x.cols();
  gx.setZero(x.rows(), r);
  gy.setZero(y.rows(), r);
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const Observation& e = entries[k];
    const double rk = res[k];
    double* gxi = gx.data() + e.row * r;
    double* gyj = gy.data() + e.col * r;
    const double* xi = x.data() + e.row * r;
    const double* yj = y.data() + e.col * r;
    for (Index c = 0; c < r; ++c) {
      gxi[c] += rk * yj[c];
      gyj[c] += rk * xi[c];
    }
  }
  gx = (gx + lambda * x) / p;
  gy = (gy + lambda * y) / p;
}

double pair_norm(const RowMatrix& a, const RowMatrix& b) {
  return std::sqrt(a.squaredNorm() + b.squaredNorm());
}

RowMatrix debias_factor(const RowMatrix& f, double shrink, const char* name) {
  const Eigen::MatrixXd gram = f.transpose() * f;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double lo = ev.minCoeff();
  const double hi = ev.maxCoeff();
  if (!(lo > 0.0) || hi / lo >= kMaxGramCondition) {
    throw NumericalError(std::string("singular Gram matrix for factor ") + name);
  }
  const Eigen::VectorXd root = (1.0 + shrink * ev.cwiseInverse().array()).sqrt().matrix();
  const Eigen::MatrixXd transform =
      eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
  return f * transform;
}

}  // namespace

MaskedObservations MaskedObservations::create(Index rows, Index cols,
                                              std::vector<Observation> entries,
                                              std::optional<double> p) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("observation grid must be non-empty");
  for (const Observation& e : entries) {
    if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
      throw std::invalid_argument("entry (" + std::to_string(e.row) + "," +
                                  std::to_string(e.col) + ") out of range");
    if (!std::isfinite(e.value))
      throw std::invalid_argument("entry (" + std::to_string(e.row) + "," +
                                  std::to_string(e.col) + ") is not finite");
  }
  std::sort(entries.begin(), entries.end(), [](const Observation& a, const Observation& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  const auto dup = std::adjacent_find(entries.begin(), entries.end(),
                                      [](const Observation& a, const Observation& b) {
                                        return a.row == b.row && a.col == b.col;
                                      });
  if (dup != entries.end())
    throw std::invalid_argument("duplicate entry (" + std::to_string(dup->row) + "," +
                                std::to_string(dup->col) + ")");

  MaskedObservations obs;
  obs.rows_ = rows;
  obs.cols_ = cols;
  obs.entries_ = std::move(entries);
  if (p) {
    if (!(*p > 0.0 && *p <= 1.0)) throw std::invalid_argument("p must lie in (0, 1]");
    obs.p_ = *p;
  } else {
    obs.p_ = estimate_p(obs);
    obs.p_estimated_ = true;
  }
  return obs;
}

DenseMatrix MaskedObservations::scaled_dense() const {
  RowMatrix dense = RowMatrix::Zero(rows_, cols_);
  for (const Observation& e : entries_) dense(e.row, e.col) = e.value / p_;
  return DenseMatrix(std::move(dense));
}

double estimate_p(const MaskedObservations& obs) {
  if (obs.size() == 0) throw std::invalid_argument("cannot estimate p from an empty observation set");
  const double cells = static_cast<double>(obs.rows()) * static_cast<double>(obs.cols());
  return std::clamp(static_cast<double>(obs.size()) / cells, 1.0 / cells, 1.0);
}

void FitConfig::validate() const {
  if (rank < 1) throw std::invalid_argument("rank must be >= 1");
  if (lambda && !(*lambda >= 0.0 && std::isfinite(*lambda)))
    throw std::invalid_argument("lambda must be a nonnegative finite number");
  if (eta && !(*eta > 0.0 && std::isfinite(*eta)))
    throw std::invalid_argument("eta must be positive");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(grad_tol >= 0.0)) throw std::invalid_argument("grad_tol must be >= 0");
}

FactorPair spectral_init(const MaskedObservations& obs, Index r) {
  return spectral_start(obs, r).factors;
}

double objective(const FactorPair& f, const MaskedObservations& obs, double lambda) {
  check_shapes(f, obs);
  std::vector<double> res;
  residuals(f.X.values(), f.Y.values(), obs.entries(), res);
  return objective_from(res, f.X.values(), f.Y.values(), lambda, obs.p());
}

FactorPair gradient(const FactorPair& f, const MaskedObservations& obs, double lambda) {
  check_shapes(f, obs);
  std::vector<double> res;
  residuals(f.X.values(), f.Y.values(), obs.entries(), res);
  RowMatrix gx, gy;
  gradient_from(res, f.X.values(), f.Y.values(), obs.entries(), lambda, obs.p(), gx, gy);
  return {DenseMatrix(std::move(gx)), DenseMatrix(std::move(gy))};
}

double default_lambda(const MaskedObservations& obs, const FactorPair& init) {
  std::vector<double> res;
  residuals(init.X.values(), init.Y.values(), obs.entries(), res);
  double mean = 0.0;
  for (double v : res) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(res.size(), 1));
  double var = 0.0;
  for (double v : res) var += (v - mean) * (v - mean);
  var /= static_cast<double>(std::max<std::size_t>(res.size(), 1));
  const double n = static_cast<double>(std::max(obs.rows(), obs.cols()));
  return 0.1 * std::sqrt(var) * std::log(n) * std::sqrt(n * obs.p());
}

GdResult gd_fit_from(const MaskedObservations& obs, const FitConfig& cfg, FactorPair start,
                     double lambda, double eta) {
  cfg.validate();
  check_shapes(start, obs);
  if (!(eta > 0.0) || !std::isfinite(eta)) throw std::invalid_argument("step size must be positive");
  const double p = obs.p();
  const auto entries = obs.entries();

  RowMatrix x = start.X.values();
  RowMatrix y = start.Y.values();
  std::vector<double> res, cand_res;
  residuals(x, y, entries, res);
  double f = objective_from(res, x, y, lambda, p);
  if (!std::isfinite(f)) throw NumericalError("objective is not finite at the start point", 0);
  const double f0 = f;

  RowMatrix gx, gy;
  gradient_from(res, x, y, entries, lambda, p, gx, gy);
  double gnorm = pair_norm(gx, gy);

  GdResult out;
  out.lambda = lambda;
  out.eta_initial = eta;
  out.initial_grad_norm = gnorm;
  out.objective_trace.push_back(f);
  const double threshold = cfg.grad_tol * (gnorm + 1.0);

  RowMatrix xc, yc;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    if (gnorm <= threshold) {
      out.converged = true;
      break;
    }
    bool accepted = false;
    double fc = f;
    for (int halving = 0; halving <= kMaxHalvings; ++halving) {
      xc = x - eta * gx;
      yc = y - eta * gy;
      residuals(xc, yc, entries, cand_res);
      fc = objective_from(cand_res, xc, yc, lambda, p);
      if (std::isfinite(fc) && fc <= f) {
        accepted = true;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) {
      if (!std::isfinite(fc) || fc > kDivergenceFactor * f0)
        throw NumericalError("gradient descent diverged at iteration " + std::to_string(it), it);
      break;  // no decrease possible at any tried step: numerical floor
    }
    x.swap(xc);
    y.swap(yc);
    res.swap(cand_res);
    f = fc;
    out.objective_trace.push_back(f);
    gradient_from(res, x, y, entries, lambda, p, gx, gy);
    gnorm = pair_norm(gx, gy);
  }
  if (!out.converged && gnorm <= threshold) out.converged = true;

  out.iters_used = it;
  out.final_grad_norm = gnorm;
  out.eta_final = eta;
  out.factors = {DenseMatrix(std::move(x)), DenseMatrix(std::move(y))};
  return out;
}

GdResult gd_fit(const MaskedObservations& obs, const FitConfig& cfg) {
  cfg.validate();
  SpectralStart start = spectral_start(obs, cfg.rank);
  const double lambda = cfg.lambda ? *cfg.lambda : default_lambda(obs, start.factors);
  double eta = 1.0;
  if (cfg.eta) {
    eta = *cfg.eta;
  } else if (start.sigma1 > 0.0) {
    eta = 0.5 / start.sigma1;
  }
  return gd_fit_from(obs, cfg, std::move(start.factors), lambda, eta);
}

DebiasedEstimate debias(const FactorPair& f, double lambda, double p) {
  if (f.X.cols() != f.Y.cols()) throw std::invalid_argument("factor ranks differ");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("p must lie in (0, 1]");

  DebiasedEstimate est;
  if (lambda == 0.0) {
    est.Xd = f.X;
    est.Yd = f.Y;
  } else {
    est.Xd = DenseMatrix(debias_factor(f.X.values(), lambda / p, "X"));
    est.Yd = DenseMatrix(debias_factor(f.Y.values(), lambda / p, "Y"));
  }
  est.Md = DenseMatrix(RowMatrix(est.Xd.values() * est.Yd.values().transpose()));
  est.svd = svd_of_product(est.Xd, est.Yd);
  est.lambda_used = lambda;
  est.p_used = p;
  return est;
}

DebiasedEstimate fit(const MaskedObservations& obs, const FitConfig& cfg) {
  const GdResult gd = gd_fit(obs, cfg);
  DebiasedEstimate est = debias(gd.factors, gd.lambda, obs.p());
  est.iters_used = gd.iters_used;
  est.final_grad_norm = gd.final_grad_norm;
  est.config = cfg;
  return est;
}

}  // namespace mcuq
