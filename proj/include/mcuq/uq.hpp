#pragma once

// Entrywise uncertainty for the de-biased estimate.
//
// For true singular factors U (m x r), V (n x r), noise variances σ²_ij and
// sampling rate p, the asymptotic variance of M^d_ij − M*_ij is
//
//   s²_ij = [ Σ_l σ²_lj (U_i·U_l)² + Σ_l σ²_il (V_l·V_j)² ] / p
//
// Poisson noise uses σ² = M*, Bernoulli noise σ² = M*(1 − M*). The plug-in
// versions substitute (M^d, U^d, V^d); the residual version replaces σ² by
// squared residuals on Ω with an extra 1/p weight.

#include "mcuq/estimator.hpp"
#include "mcuq/matgrid.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace mcuq {

struct HomogeneousGaussian {
  double sigma = 1.0;
};
struct PoissonNoise {};
struct BinaryNoise {};
struct HeterogeneousOracle {
  DenseMatrix sigma_sq;
};
struct EmpiricalNoise {};

using NoiseModel =
    std::variant<HomogeneousGaussian, PoissonNoise, BinaryNoise, HeterogeneousOracle, EmpiricalNoise>;

enum class NoiseKind { HomogeneousGaussian, Poisson, Binary, HeterogeneousOracle, Empirical };

NoiseKind kind_of(const NoiseModel& model);
std::string_view to_string(NoiseKind kind);

struct VarianceField {
  DenseMatrix s;  // per-entry standard deviations
  NoiseKind model = NoiseKind::HeterogeneousOracle;
  double p = 1.0;
};

struct IntervalField {
  DenseMatrix lo;
  DenseMatrix hi;
  double level = 0.95;
  std::size_t fallback_count = 0;  // entries that used the degeneracy fallback
};

struct EntryIndex {
  Index row = 0;
  Index col = 0;
  friend bool operator==(const EntryIndex&, const EntryIndex&) = default;
};

VarianceField oracle_variance(const DenseMatrix& u, const DenseMatrix& v,
                              const DenseMatrix& sigma_sq, double p);
VarianceField gaussian_homogeneous_variance(const DenseMatrix& u, const DenseMatrix& v,
                                            double sigma, double p);
VarianceField poisson_variance(const DenseMatrix& m_star, const DenseMatrix& u,
                               const DenseMatrix& v, double p);
VarianceField binary_variance(const DenseMatrix& m_star, const DenseMatrix& u,
                              const DenseMatrix& v, double p);

/// Noise variance matrix σ²_ij implied by a model for mean matrix `mean`.
/// Empirical has no closed form and is rejected.
DenseMatrix noise_variance(const NoiseModel& model, const DenseMatrix& mean);

enum class Rank1Model { Gaussian, Poisson, Binary };

/// Rank-one closed forms for M* = σ₁ u vᵀ with unit u, v:
///   Gaussian  σ²(u_i² + v_j²)/p
///   Poisson   M*_ij (u_i‖u‖₃³ + v_j‖v‖₃³)/p
///   Binary    M*_ij (u_i‖u‖₃³ + v_j‖v‖₃³ − M*_ij‖u‖₄⁴ − M*_ij‖v‖₄⁴)/p
/// `gaussian_sigma_sq` is only read for the Gaussian row.
VarianceField rank1_closed_form(Rank1Model model, double sigma1, std::span<const double> u,
                                std::span<const double> v, double p,
                                double gaussian_sigma_sq = 0.0);

struct PluginVariance {
  VarianceField field;
  std::size_t clamped = 0;     // entries of M^d moved into the model's domain
  double sigma_hat_sq = 0.0;   // Gaussian only: Σ_Ω (O − M^d)² / |Ω|
};

/// Plug-in estimate using (M^d, U^d, V^d) from the fit and p_used.
PluginVariance empirical_plugin_variance(const MaskedObservations& obs,
                                         const DebiasedEstimate& est, Rank1Model model);

/// Same as above from explicit plug-in quantities. Gaussian requires
/// `sigma_hat_sq`.
PluginVariance plugin_variance(const DenseMatrix& md, const DenseMatrix& ud,
                               const DenseMatrix& vd, double p, Rank1Model model,
                               double sigma_hat_sq = 0.0);

struct ResidualVariance {
  double s_sq = 0.0;
  bool unsupported = false;  // row i and column j carry no observations
};

/// Residual-based estimate of s²_ij with Ê = O − M^d on Ω:
///   [ Σ_{(l,j)∈Ω} Ê²_lj (U^d_i·U^d_l)²/p + Σ_{(i,l)∈Ω} Ê²_il (V^d_l·V^d_j)²/p ] / p
ResidualVariance empirical_residual_variance(const MaskedObservations& obs,
                                             const DebiasedEstimate& est, Index i, Index j);
/// The residual estimate for every entry, as standard deviations.
VarianceField residual_variance_field(const MaskedObservations& obs, const DebiasedEstimate& est);

/// Replaces Gaussian half-widths where s_ij < threshold.
struct DegeneracyFallback {
  double threshold = 0.0;
  double half_width = 0.0;
};

IntervalField intervals(const DenseMatrix& md, const VarianceField& s, double level,
                        std::optional<DegeneracyFallback> fallback = std::nullopt);

double coverage_rate(const IntervalField& iv, const DenseMatrix& truth);
double coverage_rate(const IntervalField& iv, const DenseMatrix& truth,
                     std::span<const EntryIndex> subset);

struct ZScores {
  std::vector<double> z;
  std::size_t excluded = 0;  // entries with s_ij <= min_s
};

/// (M^d_ij − truth_ij)/s_ij over all entries, or over `subset` when given.
ZScores zscores(const DenseMatrix& md, const DenseMatrix& truth, const DenseMatrix& s,
                double min_s = 0.0, std::span<const EntryIndex> subset = {});

/// One-sample two-sided Kolmogorov-Smirnov distance to the standard normal.
double ks_statistic(std::span<const double> z);

/// κ μ r L̂ sqrt(log(n) / (m p)) with m <= n the grid dimensions.
double entrywise_bound(Index m, Index n, double l_hat, double mu, Index r, double kappa, double p);
double entrywise_bound(const DebiasedEstimate& est, double l_hat, double mu, Index r, double kappa,
                       double p);

/// 99th percentile of |O − M^d| over Ω; stands in for the sub-exponential scale L.
double subexponential_scale_proxy(const MaskedObservations& obs, const DebiasedEstimate& est);

/// Fallback used when s_ij < rel_threshold ‖M^d‖_max: half-width is the
/// entrywise bound built from the fit's κ and μ and the L̂ proxy, and never
/// less than the threshold itself.
DegeneracyFallback default_fallback(const MaskedObservations& obs, const DebiasedEstimate& est,
                                    double rel_threshold = 1e-8);

}  // namespace mcuq
