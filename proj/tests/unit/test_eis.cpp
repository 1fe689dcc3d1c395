#include "gsae/eis.hpp"
#include "gsae/transform.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace gsae;
using namespace gsae::eis;

namespace {

struct Toy {
  GroupedSample y;
  Eigen::VectorXd x;
  Hyperparameters psi;
  std::vector<double> boundaries;

  Toy(std::vector<int> counts, std::vector<double> cuts, double kappa = 0.0)
      : y(std::move(counts)), x(Eigen::Vector2d(1.0, 0.3)) {
    psi.beta = Eigen::Vector2d(1.2, 0.4);
    psi.gamma = Eigen::Vector2d(-0.8, 0.2);
    psi.tau2 = 0.25;
    psi.lambda = 8.0;
    psi.kappa = kappa;
    boundaries = BoxCox(kappa).transformed_boundaries(Thresholds(std::move(cuts)));
  }

  AreaTarget target() const { return {y, x, psi, boundaries, false}; }
};

double rel_diff(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST(ProposalParams, NaturalParametersRoundTrip) {
  const ProposalParams q{0.3, 0.5, 4.0, 2.5};
  const auto a = q.natural();
  EXPECT_DOUBLE_EQ(a[0], 0.6);
  EXPECT_DOUBLE_EQ(a[1], -1.0);
  EXPECT_DOUBLE_EQ(a[2], -5.0);
  EXPECT_DOUBLE_EQ(a[3], -2.5);
  const auto back = ProposalParams::from_natural(a);
  ASSERT_TRUE(back);
  EXPECT_NEAR(back->theta1, 0.3, 1e-15);
  EXPECT_NEAR(back->theta2, 0.5, 1e-15);
  EXPECT_NEAR(back->theta3, 4.0, 1e-15);
  EXPECT_NEAR(back->theta4, 2.5, 1e-15);
}

TEST(ProposalParams, InvalidSignsAreRejected) {
  EXPECT_FALSE(ProposalParams::from_natural({0.0, 0.1, -3.0, -1.0}));
  EXPECT_FALSE(ProposalParams::from_natural({0.0, -0.1, -0.5, -1.0}));
  EXPECT_FALSE(ProposalParams::from_natural({0.0, -0.1, -3.0, 0.0}));
  EXPECT_TRUE(ProposalParams::from_natural({0.0, -0.1, -1.01, -1e-9}));
}

TEST(ProposalParams, DensityIntegratesToOne) {
  const ProposalParams q{0.2, 0.7, 3.0, 2.0};
  const double inf = std::numeric_limits<double>::infinity();
  const double mb = oracle::integrate([&](double b) { return std::exp(q.log_density({b, 1.0}) - q.log_density({0.0, 1.0})); }, -inf, inf);
  const double ms = oracle::integrate([&](double s) { return std::exp(q.log_density({0.0, s}) - q.log_density({0.0, 1.0})); }, 0.0, inf);
  // The joint density factorises, so the product of the two slices times the
  // density at the pivot integrates to one.
  EXPECT_NEAR(mb * ms * std::exp(q.log_density({0.0, 1.0})), 1.0, 1e-8);
}

TEST(GlsSolve, RecoversExactlyLinearResponse) {
  Rng rng(3);
  std::vector<RandomEffects> draws(40);
  for (auto& d : draws) d = {rng.normal(), 0.2 + rng.exponential()};
  const Eigen::MatrixXd Z = eis_design(draws);
  Eigen::VectorXd a(5);
  a << -3.0, 0.7, -1.3, -4.0, -0.9;
  const Eigen::VectorXd f = Z * a;
  Eigen::VectorXd w(40);
  for (int k = 0; k < 40; ++k) w[k] = rng.uniform();
  const auto coef = gls_solve(Z, f, w);
  ASSERT_TRUE(coef);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR((*coef)[k], a[k], 1e-9 * (1 + std::abs(a[k])));
}

TEST(GlsSolve, UniformWeightsAndDuplicatesGiveOrdinaryLeastSquares) {
  Rng rng(4);
  std::vector<RandomEffects> draws(30);
  for (auto& d : draws) d = {rng.normal(), 0.5 + rng.exponential()};
  const Eigen::MatrixXd Z = eis_design(draws);
  Eigen::VectorXd f(30);
  for (int k = 0; k < 30; ++k) f[k] = rng.normal();
  const auto ols = oracle::normal_equations(Z, f, Eigen::VectorXd::Ones(30));
  const auto scaled = gls_solve(Z, f, Eigen::VectorXd::Constant(30, 0.37));
  ASSERT_TRUE(scaled);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR((*scaled)[k], ols[k], 1e-9 * (1 + std::abs(ols[k])));

  // Weight 2 on a row equals listing that row twice.
  Eigen::MatrixXd Zd(31, 5);
  Zd << Z, Z.row(7);
  Eigen::VectorXd fd(31);
  fd << f, f[7];
  Eigen::VectorXd w = Eigen::VectorXd::Ones(30);
  w[7] = 2.0;
  const auto dup = gls_solve(Zd, fd, Eigen::VectorXd::Ones(31));
  const auto weighted = gls_solve(Z, f, w);
  ASSERT_TRUE(dup && weighted);
  for (int k = 0; k < 5; ++k) EXPECT_NEAR((*dup)[k], (*weighted)[k], 1e-9 * (1 + std::abs((*dup)[k])));
}

TEST(GlsSolve, RankDeficientSystemIsReported) {
  std::vector<RandomEffects> draws(20, RandomEffects{0.5, 1.0});
  const Eigen::MatrixXd Z = eis_design(draws);
  EXPECT_FALSE(gls_solve(Z, Eigen::VectorXd::Ones(20), Eigen::VectorXd::Ones(20)));
  EXPECT_FALSE(gls_solve(Z.topRows(4), Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(4)));
}

TEST(GlsSolveProperty, MatchesDenseNormalEquations) {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    const int S = 20 + static_cast<int>(ud(gen) * 200);
    std::vector<RandomEffects> draws(static_cast<std::size_t>(S));
    for (auto& d : draws) d = {0.5 * nd(gen), std::exp(0.5 * nd(gen))};
    const Eigen::MatrixXd Z = eis_design(draws);
    Eigen::VectorXd f(S);
    Eigen::VectorXd w(S);
    for (int k = 0; k < S; ++k) {
      f[k] = -2.0 * draws[static_cast<std::size_t>(k)].b * draws[static_cast<std::size_t>(k)].b + nd(gen);
      w[k] = std::exp(2.0 * nd(gen));
    }
    const auto coef = gls_solve(Z, f, w);
    ASSERT_TRUE(coef);
    const auto want = oracle::normal_equations(Z, f, w);
    for (int k = 0; k < 5; ++k) {
      EXPECT_LE(std::abs((*coef)[k] - want[k]), 1e-8 * std::max(1.0, std::abs(want[k])))
          << "rep " << rep << " k " << k;
    }
  }
}

TEST(EisFit, PriorIsAFixedPointWithoutData) {
  // With n = 0 the target is the prior, whose log-kernel is linear in Z.
  Toy toy({0, 0}, {3.0});
  Rng rng(9);
  const auto res = eis_fit(toy.target(), rng, {50, 50, 1e-3, 10});
  const auto prior = ProposalParams::prior(toy.psi, toy.x);
  EXPECT_TRUE(res.converged);
  EXPECT_EQ(res.iterations, 1);
  EXPECT_NEAR(res.proposal.theta1, prior.theta1, 1e-9);
  EXPECT_NEAR(res.proposal.theta2, prior.theta2, 1e-9 * prior.theta2);
  EXPECT_NEAR(res.proposal.theta3, prior.theta3, 1e-9 * prior.theta3);
  EXPECT_NEAR(res.proposal.theta4, prior.theta4, 1e-9 * prior.theta4);
}

TEST(EisFit, SmallCaseMatchesNormalEquationOracle) {
  Toy toy({4, 3}, {3.0});
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    for (int iters = 1; iters <= 3; ++iters) {
      Rng rng(seed);
      const auto res = eis_fit(toy.target(), rng, {50, iters, 0.0, 10});
      ASSERT_TRUE(res.final_step_plain) << seed;
      const auto a = oracle::normal_equations(res.design, res.response, res.weights);
      const auto want = ProposalParams::from_natural({a[1], a[2], a[3], a[4]});
      ASSERT_TRUE(want);
      EXPECT_LE(rel_diff(res.proposal.theta1, want->theta1), 1e-8);
      EXPECT_LE(rel_diff(res.proposal.theta2, want->theta2), 1e-8);
      EXPECT_LE(rel_diff(res.proposal.theta3, want->theta3), 1e-8);
      EXPECT_LE(rel_diff(res.proposal.theta4, want->theta4), 1e-8);
    }
  }
}

TEST(EisFit, ConvergesAndImprovesOnThePrior) {
  Toy toy({2, 9, 14, 5, 1}, {3, 5, 7, 10}, 0.1);
  Rng rng(5);
  const auto res = eis_fit(toy.target(), rng);
  EXPECT_TRUE(res.converged);
  EXPECT_TRUE(res.proposal.valid());
  Rng r1(77);
  Rng r2(77);
  const auto fitted = sir(toy.target(), res.proposal, 4000, 100, r1);
  const auto prior = sir(toy.target(), ProposalParams::prior(toy.psi, toy.x), 4000, 100, r2);
  EXPECT_GT(fitted.diagnostics.ess, 0.8 * 4000);
  EXPECT_GT(fitted.diagnostics.ess, prior.diagnostics.ess);
}

TEST(EisFit, IsDeterministicGivenTheStream) {
  Toy toy({2, 9, 14, 5, 1}, {3, 5, 7, 10}, 0.1);
  Rng a(12);
  Rng b(12);
  const auto ra = eis_fit(toy.target(), a);
  const auto rb = eis_fit(toy.target(), b);
  EXPECT_EQ(ra.proposal.theta1, rb.proposal.theta1);
  EXPECT_EQ(ra.proposal.theta2, rb.proposal.theta2);
  EXPECT_EQ(ra.proposal.theta3, rb.proposal.theta3);
  EXPECT_EQ(ra.proposal.theta4, rb.proposal.theta4);
}

TEST(EisFit, RejectsTooFewDraws) {
  Toy toy({1, 1}, {3.0});
  Rng rng(1);
  EXPECT_THROW(eis_fit(toy.target(), rng, {5}), ValidationError);
}

TEST(Sir, IdentityProposalGivesFullEss) {
  Toy toy({0, 0, 0}, {3.0, 5.0});
  Rng rng(2);
  const auto res = sir(toy.target(), ProposalParams::prior(toy.psi, toy.x), 2000, 500, rng);
  EXPECT_NEAR(res.diagnostics.ess, 2000.0, 1e-6);
  EXPECT_EQ(res.resampled.size(), 500u);
}

TEST(Sir, DegenerateWeights) {
  std::vector<double> lw(100, -std::numeric_limits<double>::infinity());
  lw[37] = -5.0;
  const auto w = normalized_weights(lw);
  EXPECT_EQ(w[37], 1.0);
  EXPECT_EQ(kish_ess(w), 1.0);
  Rng rng(1);
  for (auto k : resample_indices(w, 50, rng)) EXPECT_EQ(k, 37u);
}

TEST(Sir, TotalCollapseIsAnError) {
  std::vector<double> lw(10, -std::numeric_limits<double>::infinity());
  EXPECT_THROW(normalized_weights(lw), NumericalError);
}

TEST(Sir, ResampledMeanMatchesSelfNormalizedEstimate) {
  Toy toy({2, 9, 14, 5, 1}, {3, 5, 7, 10}, 0.1);
  Rng fit_rng(5);
  const auto q = eis_fit(toy.target(), fit_rng).proposal;
  // A deliberately widened proposal makes the weights non-trivial.
  const ProposalParams wide{q.theta1 + 0.1, 2.0 * q.theta2, q.theta3, q.theta4};
  Rng rng(6);
  const int s1 = 10000;
  const int s2 = 10000;
  const auto res = sir(toy.target(), wide, s1, s2, rng);
  const auto w = normalized_weights(res.diagnostics.log_weights);
  double is_mean = 0.0;
  for (int s = 0; s < s1; ++s) is_mean += w[static_cast<std::size_t>(s)] * res.diagnostics.draws[static_cast<std::size_t>(s)].b;
  double is_var = 0.0;
  for (int s = 0; s < s1; ++s) {
    const double d = res.diagnostics.draws[static_cast<std::size_t>(s)].b - is_mean;
    is_var += w[static_cast<std::size_t>(s)] * d * d;
  }
  double rs_mean = 0.0;
  for (const auto& u : res.resampled) rs_mean += u.b;
  rs_mean /= s2;
  // Given the weighted set, the resampled mean has variance is_var / s2.
  EXPECT_LE(std::abs(rs_mean - is_mean), 3.0 * std::sqrt(is_var / s2));
}

TEST(Sir, NoDataRecoversThePrior) {
  Toy toy({0, 0}, {3.0});
  const auto prior = ProposalParams::prior(toy.psi, toy.x);
  // A proposal that differs from the prior, so the weights do the work.
  const ProposalParams q{0.1, 0.4, prior.theta3, 1.2 * prior.theta4};
  Rng rng(8);
  const int s1 = 10000;
  const int s2 = 10000;
  const auto res = sir(toy.target(), q, s1, s2, rng);
  double m1 = 0.0;
  double m2 = 0.0;
  for (const auto& u : res.resampled) {
    m1 += u.b;
    m2 += u.b * u.b;
  }
  m1 /= s2;
  m2 /= s2;
  const double tau2 = toy.psi.tau2;
  // Resampling noise plus the importance-sampling noise of the weighted set,
  // the latter bounded via the ESS.
  const double n_eff = 1.0 / (1.0 / s2 + 1.0 / res.diagnostics.ess);
  EXPECT_LE(std::abs(m1), 4.0 * std::sqrt(tau2 / n_eff));
  EXPECT_LE(std::abs(m2 - tau2), 4.0 * std::sqrt(2.0 * tau2 * tau2 / n_eff));
}

TEST(SirProperty, ConstantShiftOfLogWeightsIsInvisible) {
  // Dyadic log-weights keep the shifted values exactly representable, so the
  // max-subtracted weights coincide bit for bit.
  Rng rng(4);
  std::vector<double> lw(500);
  for (auto& l : lw) l = std::ldexp(std::floor(rng.normal() * 4096.0), -10);
  for (double c : {1024.0, -512.0, 3.0, 0.125}) {
    std::vector<double> shifted(lw);
    for (auto& l : shifted) l += c;
    const auto a = normalized_weights(lw);
    const auto b = normalized_weights(shifted);
    for (std::size_t s = 0; s < a.size(); ++s) ASSERT_EQ(a[s], b[s]);
    EXPECT_EQ(kish_ess(a), kish_ess(b));
  }
}

TEST(LogMarginal, PriorProposalWithoutDataIsExactlyZero) {
  Toy toy({0, 0}, {3.0});
  Rng rng(1);
  const auto est = log_marginal_is(toy.target(), ProposalParams::prior(toy.psi, toy.x), 1000, rng);
  EXPECT_NEAR(est.value, 0.0, 1e-12);
  EXPECT_NEAR(est.se, 0.0, 1e-12);
}

TEST(LogMarginal, MatchesQuadratureOnATwoClassToy) {
  Toy toy({3, 2}, {3.0});
  const auto target = toy.target();
  Rng fit_rng(2);
  const auto q = eis_fit(target, fit_rng).proposal;
  Rng rng(3);
  const auto est = log_marginal_is(target, q, 20000, rng);
  oracle::GridPosterior grid;
  // Integrate exp(log_target) over (b, log sigma2) by the grid rule.
  const double inf = std::numeric_limits<double>::infinity();
  const double value = std::log(oracle::integrate(
      [&](double b) {
        return oracle::integrate(
            [&](double ls) { return std::exp(target.log_target({b, std::exp(ls)}) + ls); }, -inf, inf,
            1e-14, 1e-9);
      },
      -inf, inf, 1e-14, 1e-8));
  EXPECT_LE(std::abs(est.value - value), 4.0 * est.se + 1e-6);
}
