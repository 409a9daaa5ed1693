#include "mcuq/matgrid.hpp"

#include "mcuq/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mcuq {

namespace {

void require_finite(const RowMatrix& m) {
  if (!m.allFinite()) throw std::invalid_argument("matrix contains non-finite values");
}

// Flip column pairs so the largest |U_ik| in each column is nonnegative.
void canonicalize_signs(RowMatrix& u, RowMatrix& v) {
  for (Index k = 0; k < u.cols(); ++k) {
    Index best = 0;
    double best_abs = -1.0;
    for (Index i = 0; i < u.rows(); ++i) {
      const double a = std::abs(u(i, k));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (u(best, k) < 0.0) {
      u.col(k) = -u.col(k);
      v.col(k) = -v.col(k);
    }
  }
}

SvdTriple make_triple(RowMatrix u, const Vector& s, RowMatrix v) {
  canonicalize_signs(u, v);
  SvdTriple out;
  out.sigma.assign(s.data(), s.data() + s.size());
  for (double& x : out.sigma) x = std::max(x, 0.0);
  out.U = DenseMatrix(std::move(u));
  out.V = DenseMatrix(std::move(v));
  return out;
}

void check_rank(const DenseMatrix& a, Index r) {
  if (r < 1 || r > std::min(a.rows(), a.cols())) {
    throw std::invalid_argument("rank " + std::to_string(r) + " out of range for " +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " matrix");
  }
  require_finite(a.values());
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& z) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  return qr.householderQ() * Eigen::MatrixXd::Identity(z.rows(), z.cols());
}

}  // namespace

DenseMatrix::DenseMatrix(Index rows, Index cols) : values_(RowMatrix::Zero(rows, cols)) {
  if (rows < 0 || cols < 0) throw std::invalid_argument("negative matrix dimension");
}

DenseMatrix::DenseMatrix(RowMatrix values) : values_(std::move(values)) {
  require_finite(values_);
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  const auto nrows = static_cast<Index>(rows.size());
  const auto ncols = nrows == 0 ? Index{0} : static_cast<Index>(rows.begin()->size());
  values_.resize(nrows, ncols);
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != ncols) throw std::invalid_argument("ragged rows");
    Index j = 0;
    for (double x : row) values_(i, j++) = x;
    ++i;
  }
  require_finite(values_);
}

DenseMatrix DenseMatrix::identity(Index n) { return DenseMatrix(RowMatrix::Identity(n, n)); }

DenseMatrix DenseMatrix::constant(Index rows, Index cols, double value) {
  return DenseMatrix(RowMatrix::Constant(rows, cols, value));
}

bool DenseMatrix::all_finite() const { return values_.allFinite(); }

DenseMatrix SvdTriple::reconstruct() const {
  const Eigen::Map<const Vector> s(sigma.data(), static_cast<Index>(sigma.size()));
  return DenseMatrix(RowMatrix(U.values() * s.asDiagonal() * V.values().transpose()));
}

SvdTriple truncated_svd(const DenseMatrix& a, Index r) {
  check_rank(a, r);
  if (std::min(a.rows(), a.cols()) > 2000) return truncated_svd_subspace(a, r);

  const Eigen::MatrixXd dense = a.values();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(dense, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return make_triple(svd.matrixU().leftCols(r), svd.singularValues().head(r),
                     svd.matrixV().leftCols(r));
}

SvdTriple truncated_svd_subspace(const DenseMatrix& a, Index r, double tol, int max_sweeps,
                                 std::uint64_t seed) {
  check_rank(a, r);
  const Eigen::MatrixXd m = a.values();
  const Index block = std::min<Index>(r + 5, std::min(m.rows(), m.cols()));

  RngStream rng(seed, 0);
  Eigen::MatrixXd q(m.cols(), block);
  for (Index j = 0; j < block; ++j)
    for (Index i = 0; i < m.cols(); ++i) q(i, j) = rng.normal();
  q = orthonormal_basis(q);

  Eigen::MatrixXd left;
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(r);
  Eigen::JacobiSVD<Eigen::MatrixXd> small;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    left = orthonormal_basis(m * q);
    q = orthonormal_basis(m.transpose() * left);
    small.compute(left.transpose() * m * q, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::VectorXd cur = small.singularValues().head(r);
    const double scale = std::max(cur(0), 1e-300);
    if ((cur - prev).cwiseAbs().maxCoeff() <= tol * scale) break;
    prev = cur;
  }
  small.compute(left.transpose() * m * q, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return make_triple(left * small.matrixU().leftCols(r), small.singularValues().head(r),
                     q * small.matrixV().leftCols(r));
}

SvdTriple svd_of_product(const DenseMatrix& x, const DenseMatrix& y) {
  if (x.cols() != y.cols()) throw std::invalid_argument("factor ranks differ");
  const Index r = x.cols();
  if (r < 1 || r > x.rows() || r > y.rows()) throw std::invalid_argument("factor rank out of range");

  Eigen::HouseholderQR<Eigen::MatrixXd> qx(x.values());
  Eigen::HouseholderQR<Eigen::MatrixXd> qy(y.values());
  const Eigen::MatrixXd rx = qx.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd ry = qy.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd basis_x = qx.householderQ() * Eigen::MatrixXd::Identity(x.rows(), r);
  const Eigen::MatrixXd basis_y = qy.householderQ() * Eigen::MatrixXd::Identity(y.rows(), r);

  Eigen::JacobiSVD<Eigen::MatrixXd> core(rx * ry.transpose(),
                                         Eigen::ComputeFullU | Eigen::ComputeFullV);
  return make_triple(basis_x * core.matrixU(), core.singularValues(), basis_y * core.matrixV());
}

double norm_2inf(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  return std::sqrt(a.values().rowwise().squaredNorm().maxCoeff());
}

double norm_fro(const DenseMatrix& a) { return a.values().norm(); }

double norm_max(const DenseMatrix& a) {
  if (a.size() == 0) return 0.0;
  return a.values().cwiseAbs().maxCoeff();
}

double norm_spectral(const DenseMatrix& a, double rel_tol, int max_iters) {
  require_finite(a.values());
  if (a.size() == 0 || norm_max(a) == 0.0) return 0.0;
  const RowMatrix& m = a.values();

  RngStream rng(0x5eed, 0);
  Vector v(m.cols());
  for (Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
  v.normalize();

  double sigma = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    const Vector u_raw = m * v;
    sigma = u_raw.norm();
    if (sigma == 0.0) {
      // Start vector fell in the null space; restart from a fresh draw.
      for (Index i = 0; i < v.size(); ++i) v(i) = rng.normal();
      v.normalize();
      continue;
    }
    const Vector u = u_raw / sigma;
    Vector w = m.transpose() * u;
    const double residual = (w - sigma * v).norm();
    v = w.normalized();
    if (residual <= rel_tol * sigma) break;
  }
  return std::max(sigma, (m * v).norm());
}

double orthonormality_defect(const DenseMatrix& q) {
  const Eigen::MatrixXd gram = q.values().transpose() * q.values();
  return (gram - Eigen::MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff();
}

double incoherence(const DenseMatrix& u, const DenseMatrix& v, Index r) {
  if (r < 1 || u.cols() != r || v.cols() != r)
    throw std::invalid_argument("incoherence: factors must have r columns");
  if (orthonormality_defect(u) > 1e-8 || orthonormality_defect(v) > 1e-8)
    throw std::invalid_argument("incoherence: factors are not orthonormal");
  const double ru = norm_2inf(u);
  const double rv = norm_2inf(v);
  const double rr = static_cast<double>(r);
  return std::max(static_cast<double>(u.rows()) / rr * ru * ru,
                  static_cast<double>(v.rows()) / rr * rv * rv);
}

}  // namespace mcuq
