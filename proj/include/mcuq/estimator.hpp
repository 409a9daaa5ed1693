#pragma once

// Gradient descent with de-bias for noisy low-rank matrix completion.
//
//   f(X, Y) = 1/(2p) ‖P_Ω(XYᵀ − O)‖²_F + λ/(2p) (‖X‖²_F + ‖Y‖²_F)
//
// fit() runs spectral initialization, gradient descent on f, then replaces
// each factor F by F (I + (λ/p)(FᵀF)⁻¹)^{1/2}.

#include "mcuq/matgrid.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace mcuq {

struct Observation {
  Index row = 0;
  Index col = 0;
  double value = 0.0;
};

/// Observed entries P_Ω(O) of an m x n matrix, kept sorted row-major.
class MaskedObservations {
 public:
  /// Validates ranges, uniqueness and finiteness. When `p` is absent it is
  /// estimated as |Ω|/(mn), which requires at least one entry.
  static MaskedObservations create(Index rows, Index cols, std::vector<Observation> entries,
                                   std::optional<double> p = std::nullopt);

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  std::span<const Observation> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  double p() const noexcept { return p_; }
  bool p_estimated() const noexcept { return p_estimated_; }

  /// (1/p) P_Ω(O) as a dense matrix.
  DenseMatrix scaled_dense() const;

 private:
  MaskedObservations() = default;

  Index rows_ = 0;
  Index cols_ = 0;
  std::vector<Observation> entries_;
  double p_ = 1.0;
  bool p_estimated_ = false;
};

/// |Ω|/(mn), clamped to [1/(mn), 1]. Throws on an empty observation set.
double estimate_p(const MaskedObservations& obs);

struct FactorPair {
  DenseMatrix X;  // m x r
  DenseMatrix Y;  // n x r

  Index rank() const noexcept { return X.cols(); }
};

struct FitConfig {
  Index rank = 1;
  std::optional<double> lambda;  // empty: 0.1 σ̂ log(n) sqrt(n p)
  std::optional<double> eta;     // empty: 0.5 / σ₁((1/p) P_Ω(O))
  int max_iters = 2000;
  double grad_tol = 1e-7;
  std::uint64_t seed = 0;

  void validate() const;
};

struct GdResult {
  FactorPair factors;
  int iters_used = 0;
  double initial_grad_norm = 0.0;
  double final_grad_norm = 0.0;
  double lambda = 0.0;
  double eta_initial = 0.0;
  double eta_final = 0.0;
  bool converged = false;
  /// Objective at the start point followed by every accepted iterate.
  std::vector<double> objective_trace;
};

struct DebiasedEstimate {
  DenseMatrix Xd;
  DenseMatrix Yd;
  DenseMatrix Md;  // Xd Ydᵀ
  SvdTriple svd;   // of Md, rank r
  int iters_used = 0;
  double final_grad_norm = 0.0;
  FitConfig config;
  double lambda_used = 0.0;
  double p_used = 1.0;
};

/// X⁰ = U sqrt(Σ), Y⁰ = V sqrt(Σ) from the top-r SVD of (1/p) P_Ω(O).
FactorPair spectral_init(const MaskedObservations& obs, Index r);

double objective(const FactorPair& f, const MaskedObservations& obs, double lambda);
FactorPair gradient(const FactorPair& f, const MaskedObservations& obs, double lambda);

/// Default regularizer 0.1 σ̂ log(n) sqrt(n p), n = max(m, n), where σ̂ is the
/// standard deviation of O − X⁰Y⁰ᵀ over Ω.
double default_lambda(const MaskedObservations& obs, const FactorPair& init);

/// Gradient descent from `start` with step halving on objective increase
/// (at most 30 halvings per iteration). Stops when the gradient norm falls to
/// grad_tol (‖∇f(start)‖ + 1). Throws NumericalError if the objective exceeds
/// ten times its initial value or becomes non-finite.
GdResult gd_fit_from(const MaskedObservations& obs, const FitConfig& cfg, FactorPair start,
                     double lambda, double eta);

/// Spectral initialization followed by gd_fit_from with the resolved λ and η.
GdResult gd_fit(const MaskedObservations& obs, const FitConfig& cfg);

/// Throws NumericalError when a Gram matrix is singular (condition >= 1e12).
DebiasedEstimate debias(const FactorPair& f, double lambda, double p);

DebiasedEstimate fit(const MaskedObservations& obs, const FitConfig& cfg);

}  // namespace mcuq
