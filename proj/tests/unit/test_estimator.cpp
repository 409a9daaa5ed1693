#include "mcuq/error.hpp"
#include "mcuq/estimator.hpp"
#include "mcuq/synthgen.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace mcuq;

namespace {

MaskedObservations full(const DenseMatrix& o) {
  std::vector<Observation> e;
  for (Index i = 0; i < o.rows(); ++i)
    for (Index j = 0; j < o.cols(); ++j) e.push_back({i, j, o(i, j)});
  return MaskedObservations::create(o.rows(), o.cols(), std::move(e), 1.0);
}

MaskedObservations random_mask(const DenseMatrix& o, double p, std::mt19937_64& gen) {
  std::bernoulli_distribution keep(p);
  std::vector<Observation> e;
  for (Index i = 0; i < o.rows(); ++i)
    for (Index j = 0; j < o.cols(); ++j)
      if (keep(gen)) e.push_back({i, j, o(i, j)});
  return MaskedObservations::create(o.rows(), o.cols(), std::move(e), p);
}

DenseMatrix low_rank(int m, int n, int r, std::mt19937_64& gen) {
  return DenseMatrix(oracle::random_matrix(m, r, gen).values() *
                     oracle::random_matrix(r, n, gen).values());
}

}  // namespace

TEST(MaskedObservations, EstimatesRate) {
  std::vector<Observation> e;
  for (Index k = 0; k < 6; ++k) e.push_back({k / 4, k % 4, 1.0});
  const auto obs = MaskedObservations::create(3, 4, e);
  EXPECT_DOUBLE_EQ(obs.p(), 0.5);
  EXPECT_TRUE(obs.p_estimated());
}

TEST(MaskedObservations, FullGridRateIsOne) {
  EXPECT_DOUBLE_EQ(estimate_p(full(DenseMatrix::constant(3, 3, 1.0))), 1.0);
}

TEST(MaskedObservations, EmptyCannotEstimate) {
  EXPECT_THROW(MaskedObservations::create(3, 3, {}), std::invalid_argument);
}

TEST(MaskedObservations, RejectsDuplicatesAndRange) {
  EXPECT_THROW(MaskedObservations::create(2, 2, {{0, 0, 1.0}, {0, 0, 2.0}}), std::invalid_argument);
  EXPECT_THROW(MaskedObservations::create(2, 2, {{2, 0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(MaskedObservations::create(2, 2, {{0, 0, INFINITY}}), std::invalid_argument);
  EXPECT_THROW(MaskedObservations::create(2, 2, {{0, 0, 1.0}}, 0.0), std::invalid_argument);
}

TEST(SpectralInit, DiagonalHand) {
  const FactorPair f = spectral_init(full(DenseMatrix{{4, 0}, {0, 1}}), 1);
  EXPECT_NEAR(f.X(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(f.X(1, 0), 0.0, 1e-14);
  EXPECT_NEAR(f.Y(0, 0), 2.0, 1e-14);
  EXPECT_NEAR(f.Y(1, 0), 0.0, 1e-14);
}

TEST(SpectralInit, NoiselessFullObservationIsExact) {
  std::mt19937_64 gen(4);
  const DenseMatrix m = low_rank(20, 15, 3, gen);
  const FactorPair f = spectral_init(full(m), 3);
  EXPECT_LT((f.X.values() * f.Y.values().transpose() - m.values()).norm(), 1e-8 * norm_fro(m));
}

TEST(SpectralInit, NoisyPartialObservationIsClose) {
  SimConfig sc;
  sc.m = sc.n = 50;
  sc.r = 2;
  sc.seed = 12;
  const DenseMatrix m = gen_ground_truth(sc, 0).m_star;
  std::mt19937_64 gen(12);
  std::normal_distribution<double> nd(0.0, 0.01 * norm_max(m));
  DenseMatrix o = m;
  for (Index i = 0; i < 50; ++i)
    for (Index j = 0; j < 50; ++j) o(i, j) += nd(gen);
  const FactorPair f = spectral_init(random_mask(o, 0.8, gen), 2);
  EXPECT_LT((f.X.values() * f.Y.values().transpose() - m.values()).norm() / norm_fro(m), 0.1);
}

TEST(SpectralInit, IsBestRankRApproximation) {
  std::mt19937_64 gen(13);
  const DenseMatrix o = oracle::random_matrix(9, 7, gen);
  const auto obs = random_mask(o, 0.6, gen);
  const DenseMatrix a = obs.scaled_dense();
  const FactorPair f = spectral_init(obs, 2);
  const double err = (f.X.values() * f.Y.values().transpose() - a.values()).squaredNorm();
  EXPECT_NEAR(err, static_cast<double>(oracle::truncation_error_sq(a, 2)), 1e-10 * a.values().squaredNorm());
  EXPECT_LT((f.X.values().transpose() * f.X.values() - f.Y.values().transpose() * f.Y.values()).norm(), 1e-10);
}

TEST(Objective, ZeroAtExactFit) {
  std::mt19937_64 gen(1);
  const DenseMatrix x = oracle::random_matrix(4, 2, gen);
  const DenseMatrix y = oracle::random_matrix(3, 2, gen);
  const DenseMatrix o(x.values() * y.values().transpose());
  EXPECT_NEAR(objective({x, y}, random_mask(o, 0.5, gen), 0.0), 0.0, 1e-24);
}

TEST(Objective, ZeroFactors) {
  const DenseMatrix o{{1, 2}, {3, 4}};
  const auto obs = MaskedObservations::create(2, 2, {{0, 1, 2.0}, {1, 0, 3.0}}, 0.25);
  EXPECT_DOUBLE_EQ(objective({DenseMatrix(2, 1), DenseMatrix(2, 1)}, obs, 0.0), (4.0 + 9.0) / 0.5);
}

TEST(Objective, HandEvaluation) {
  const DenseMatrix x{{1}, {2}};
  const DenseMatrix y{{1}, {-1}};
  const auto obs = MaskedObservations::create(2, 2, {{0, 0, 1.0}, {1, 1, 5.0}}, 0.5);
  EXPECT_DOUBLE_EQ(objective({x, y}, obs, 1.0), 56.0);
}

TEST(Objective, MatchesSummationOracle) {
  std::mt19937_64 gen(77);
  for (int t = 0; t < 10; ++t) {
    const DenseMatrix o = oracle::random_matrix(6, 5, gen);
    const auto obs = random_mask(o, 0.6, gen);
    const DenseMatrix x = oracle::random_matrix(6, 2, gen);
    const DenseMatrix y = oracle::random_matrix(5, 2, gen);
    std::vector<std::tuple<int, int, double>> omega;
    for (const auto& e : obs.entries()) omega.emplace_back(e.row, e.col, e.value);
    const long double ref = oracle::objective_sum(x, y, omega, 0.6, 0.3);
    EXPECT_NEAR(objective({x, y}, obs, 0.3), static_cast<double>(ref), 1e-12 * std::abs(static_cast<double>(ref)));
  }
}

TEST(Gradient, ZeroAtExactFit) {
  std::mt19937_64 gen(2);
  const DenseMatrix x = oracle::random_matrix(4, 2, gen);
  const DenseMatrix y = oracle::random_matrix(3, 2, gen);
  const DenseMatrix o(x.values() * y.values().transpose());
  const FactorPair g = gradient({x, y}, random_mask(o, 0.7, gen), 0.0);
  EXPECT_LT(g.X.values().norm() + g.Y.values().norm(), 1e-13);
}

TEST(Gradient, RegularizerOnlyWhenNoObservations) {
  std::mt19937_64 gen(3);
  const DenseMatrix x = oracle::random_matrix(3, 2, gen);
  const DenseMatrix y = oracle::random_matrix(4, 2, gen);
  const auto obs = MaskedObservations::create(3, 4, {}, 0.5);
  const FactorPair g = gradient({x, y}, obs, 0.7);
  EXPECT_LT((g.X.values() - (0.7 / 0.5) * x.values()).norm(), 1e-15);
  EXPECT_LT((g.Y.values() - (0.7 / 0.5) * y.values()).norm(), 1e-15);
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 gen(99);
  for (int t = 0; t < 50; ++t) {
    const int m = 2 + static_cast<int>(gen() % 7);
    const int n = 2 + static_cast<int>(gen() % 7);
    const int r = 1 + static_cast<int>(gen() % std::min(3, std::min(m, n)));
    const DenseMatrix o = oracle::random_matrix(m, n, gen);
    const auto obs = random_mask(o, 0.7, gen);
    const FactorPair f{oracle::random_matrix(m, r, gen), oracle::random_matrix(n, r, gen)};
    const double lambda = 0.5;
    const FactorPair g = gradient(f, obs, lambda);
    double num = 0.0;
    double den = 0.0;
    auto probe = [&](const DenseMatrix& analytic, bool is_x) {
      for (Index i = 0; i < analytic.rows(); ++i) {
        for (Index k = 0; k < analytic.cols(); ++k) {
          FactorPair plus = f;
          FactorPair minus = f;
          DenseMatrix& pm = is_x ? plus.X : plus.Y;
          DenseMatrix& mm = is_x ? minus.X : minus.Y;
          const double h = 1e-6 * std::max(1.0, std::abs(pm(i, k)));
          pm(i, k) += h;
          mm(i, k) -= h;
          const double fd = (objective(plus, obs, lambda) - objective(minus, obs, lambda)) / (2 * h);
          num += (fd - analytic(i, k)) * (fd - analytic(i, k));
          den += analytic(i, k) * analytic(i, k);
        }
      }
    };
    probe(g.X, true);
    probe(g.Y, false);
    EXPECT_LT(std::sqrt(num / den), 1e-5) << "instance " << t;
  }
}

TEST(GdFit, NoiselessFullObservationStaysExact) {
  std::mt19937_64 gen(14);
  const DenseMatrix m = low_rank(12, 10, 2, gen);
  FitConfig cfg;
  cfg.rank = 2;
  cfg.lambda = 0.0;
  const GdResult res = gd_fit(full(m), cfg);
  EXPECT_LT((res.factors.X.values() * res.factors.Y.values().transpose() - m.values()).norm(),
            1e-6 * norm_fro(m));
}

TEST(GdFit, StationaryPointIsBalanced) {
  std::mt19937_64 gen(15);
  const DenseMatrix m = low_rank(15, 12, 2, gen);
  DenseMatrix o = m;
  std::normal_distribution<double> nd(0.0, 0.1);
  for (Index i = 0; i < o.rows(); ++i)
    for (Index j = 0; j < o.cols(); ++j) o(i, j) += nd(gen);
  FitConfig cfg;
  cfg.rank = 2;
  cfg.lambda = 0.5;
  cfg.grad_tol = 1e-12;
  cfg.max_iters = 20000;
  const GdResult res = gd_fit(full(o), cfg);
  const RowMatrix xtx = res.factors.X.values().transpose() * res.factors.X.values();
  const RowMatrix yty = res.factors.Y.values().transpose() * res.factors.Y.values();
  EXPECT_LE((xtx - yty).norm(), 1e-6 * xtx.norm());
}

TEST(GdFit, ObjectiveNeverIncreases) {
  SimConfig sc;
  sc.m = sc.n = 100;
  sc.r = 2;
  sc.p = 0.6;
  sc.mean_target = 20.0;
  sc.seed = 5;
  const SimInstance inst = gen_instance(sc, 0);
  FitConfig cfg;
  cfg.rank = 2;
  const GdResult res = gd_fit(inst.obs, cfg);
  ASSERT_GE(res.objective_trace.size(), 2u);
  for (std::size_t k = 1; k < res.objective_trace.size(); ++k)
    ASSERT_LE(res.objective_trace[k], res.objective_trace[k - 1]) << "iteration " << k;
  EXPECT_LE(res.objective_trace.back(), res.objective_trace.front());
}

TEST(GdFit, DivergenceRaisesNumericalError) {
  std::mt19937_64 gen(16);
  const DenseMatrix m = low_rank(10, 10, 2, gen);
  FitConfig cfg;
  cfg.rank = 2;
  cfg.lambda = 0.0;
  const FactorPair start{oracle::random_matrix(10, 2, gen), oracle::random_matrix(10, 2, gen)};
  EXPECT_THROW(gd_fit_from(full(m), cfg, start, 0.0, 1e150), NumericalError);
}

TEST(Debias, ZeroLambdaIsIdentity) {
  std::mt19937_64 gen(17);
  const FactorPair f{oracle::random_matrix(5, 2, gen), oracle::random_matrix(4, 2, gen)};
  const DebiasedEstimate d = debias(f, 0.0, 0.5);
  EXPECT_EQ(d.Xd, f.X);
  EXPECT_EQ(d.Yd, f.Y);
}

TEST(Debias, ScalarHand) {
  const FactorPair f{DenseMatrix{{2}, {0}}, DenseMatrix{{2}, {0}}};
  const DebiasedEstimate d = debias(f, 5.0, 1.0);
  EXPECT_NEAR(d.Xd(0, 0), 3.0, 1e-14);
  EXPECT_NEAR(d.Xd(1, 0), 0.0, 1e-14);
  EXPECT_NEAR(d.Md(0, 0), 9.0, 1e-13);
}

TEST(Debias, SingularGramThrows) {
  const FactorPair f{DenseMatrix(3, 1), DenseMatrix{{1}, {1}}};
  EXPECT_THROW(debias(f, 1.0, 1.0), NumericalError);
}

TEST(Fit, FullObservationRecoversTruncatedSvd) {
  std::mt19937_64 gen(18);
  for (int t = 0; t < 5; ++t) {
    const DenseMatrix m = low_rank(14, 11, 2, gen);
    DenseMatrix o = m;
    std::normal_distribution<double> nd(0.0, 0.05);
    for (Index i = 0; i < o.rows(); ++i)
      for (Index j = 0; j < o.cols(); ++j) o(i, j) += nd(gen);
    const SvdTriple ref = truncated_svd(o, 2);
    FitConfig cfg;
    cfg.rank = 2;
    cfg.lambda = 0.25 * ref.sigma[1];
    cfg.grad_tol = 1e-12;
    cfg.max_iters = 50000;
    const DebiasedEstimate est = fit(full(o), cfg);
    EXPECT_LT((est.Md.values() - ref.reconstruct().values()).norm(), 1e-6 * norm_fro(o));
  }
}

TEST(Fit, Deterministic) {
  SimConfig sc;
  sc.m = sc.n = 60;
  sc.r = 2;
  sc.seed = 3;
  const SimInstance inst = gen_instance(sc, 0);
  FitConfig cfg;
  cfg.rank = 2;
  const DebiasedEstimate a = fit(inst.obs, cfg);
  const DebiasedEstimate b = fit(inst.obs, cfg);
  EXPECT_EQ(a.Md, b.Md);
  EXPECT_EQ(a.Xd, b.Xd);
  EXPECT_EQ(a.iters_used, b.iters_used);
}

TEST(Fit, DistributionSettingAccuracy) {
  SimConfig sc;
  sc.m = sc.n = 300;
  sc.r = 2;
  sc.p = 0.6;
  sc.mean_target = 20.0;
  sc.seed = 1;
  const SimInstance inst = gen_instance(sc, 0);
  FitConfig cfg;
  cfg.rank = 2;
  const DebiasedEstimate est = fit(inst.obs, cfg);
  EXPECT_LT(norm_max(DenseMatrix(est.Md.values() - inst.m_star.values())) / norm_max(inst.m_star), 0.2);
}

TEST(FitConfig, Validation) {
  FitConfig cfg;
  cfg.rank = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.rank = 1;
  cfg.lambda = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.lambda = 1.0;
  cfg.eta = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}
