#pragma once
// Independent reference computations used by the tests. Deliberately naive:
// explicit loops, extended precision, no shared code with the library.

#include "mcuq/matgrid.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<long double>>;

Mat to_mat(const mcuq::DenseMatrix& a);

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Eigenvalues in
/// descending order; eigenvectors as columns.
struct Eigen {
  std::vector<long double> values;
  Mat vectors;
};
Eigen jacobi_eigen(Mat a);

/// Singular values of A from the eigenvalues of AᵀA.
std::vector<long double> singular_values(const mcuq::DenseMatrix& a);

/// ‖A − A_r‖_F² where A_r is the best rank-r approximation (sum of the tail
/// squared singular values).
long double truncation_error_sq(const mcuq::DenseMatrix& a, int r);

/// s²_ij = [Σ_l σ²_lj (Σ_k U_ik U_lk)² + Σ_l σ²_il (Σ_k V_lk V_jk)²] / p,
/// evaluated term by term.
long double variance_sum(const mcuq::DenseMatrix& u, const mcuq::DenseMatrix& v,
                         const mcuq::DenseMatrix& sigma_sq, double p, int i, int j);

/// Residual-based s²_ij; `observed` flags Ω, `resid` holds Ê on Ω.
long double residual_sum(const mcuq::DenseMatrix& u, const mcuq::DenseMatrix& v,
                         const mcuq::DenseMatrix& resid, const std::vector<std::vector<bool>>& observed,
                         double p, int i, int j);

/// 1/(2p) Σ_Ω (XYᵀ − O)² + λ/(2p)(‖X‖² + ‖Y‖²).
long double objective_sum(const mcuq::DenseMatrix& x, const mcuq::DenseMatrix& y,
                          const std::vector<std::tuple<int, int, double>>& omega, double p,
                          double lambda);

/// Φ via the series/continued-fraction-free route: long double erfc.
long double phi(long double x);

/// KS distance computed directly from the definition with long double Φ.
long double ks_distance(std::vector<double> z);

/// Φ⁻¹ by bisection on phi().
long double phi_inv(long double q);

/// Brute force over a grid of lengths (step `h`) for up to three entries:
/// best expected coverage with Σ ℓ <= budget.
double brute_force_coverage(const std::vector<double>& s, double budget, double h);

/// Random matrix with N(0,1) entries from std::mt19937_64.
mcuq::DenseMatrix random_matrix(int rows, int cols, std::mt19937_64& gen);

/// Random matrix with orthonormal columns (Gram-Schmidt, long double).
mcuq::DenseMatrix random_orthonormal(int rows, int cols, std::mt19937_64& gen);

}  // namespace oracle
