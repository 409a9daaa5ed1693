#pragma once

// Dense matrices, truncated SVD, matrix norms and incoherence.
//
// Singular vectors of repeated singular values are basis-arbitrary: callers
// should only rely on the spanned subspace (e.g. through U Uᵀ) in that case.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace mcuq {

using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Row-major real matrix whose entries are finite at construction.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(Index rows, Index cols);
  explicit DenseMatrix(RowMatrix values);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix zeros(Index rows, Index cols) { return DenseMatrix(rows, cols); }
  static DenseMatrix identity(Index n);
  static DenseMatrix constant(Index rows, Index cols, double value);

  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }
  Index size() const noexcept { return values_.size(); }

  double operator()(Index i, Index j) const { return values_(i, j); }
  double& operator()(Index i, Index j) { return values_(i, j); }

  const RowMatrix& values() const noexcept { return values_; }
  std::span<const double> data() const noexcept {
    return {values_.data(), static_cast<std::size_t>(values_.size())};
  }

  bool all_finite() const;

  friend bool operator==(const DenseMatrix& a, const DenseMatrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::equal(a.data().begin(), a.data().end(), b.data().begin());
  }

 private:
  RowMatrix values_;
};

struct SvdTriple {
  DenseMatrix U;              // m x r, orthonormal columns
  std::vector<double> sigma;  // r values, non-increasing
  DenseMatrix V;              // n x r, orthonormal columns

  Index rank() const noexcept { return static_cast<Index>(sigma.size()); }
  DenseMatrix reconstruct() const;
};

/// Top-r singular triple. Each column of U has its largest-magnitude entry
/// (lowest row index on ties) made nonnegative; V follows.
///
/// Uses a dense divide-and-conquer SVD when min(rows, cols) <= 2000 and block
/// subspace iteration above that.
SvdTriple truncated_svd(const DenseMatrix& a, Index r);

/// Block subspace iteration with Rayleigh-Ritz extraction. Exposed so the
/// large-matrix path can be exercised on small inputs.
SvdTriple truncated_svd_subspace(const DenseMatrix& a, Index r, double tol = 1e-10,
                                 int max_sweeps = 500, std::uint64_t seed = 0);

/// SVD of X Yᵀ for thin factors, via QR of each factor and an r x r SVD.
SvdTriple svd_of_product(const DenseMatrix& x, const DenseMatrix& y);

double norm_2inf(const DenseMatrix& a);
double norm_fro(const DenseMatrix& a);
double norm_max(const DenseMatrix& a);
/// Largest singular value by power iteration on AᵀA.
double norm_spectral(const DenseMatrix& a, double rel_tol = 1e-8, int max_iters = 100000);

/// Smallest mu with ‖U‖²_{2,∞} <= mu r / m and ‖V‖²_{2,∞} <= mu r / n.
/// Throws std::invalid_argument unless UᵀU = VᵀV = I within 1e-8.
double incoherence(const DenseMatrix& u, const DenseMatrix& v, Index r);

/// Max absolute deviation of QᵀQ from the identity.
double orthonormality_defect(const DenseMatrix& q);

}  // namespace mcuq
