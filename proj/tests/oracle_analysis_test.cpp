#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "naive_oracle.hpp"
#include "ope_lab/monte_carlo.hpp"
#include "ope_lab/oracle_analysis.hpp"

using namespace ope_lab;

namespace {

EnvConfig pool_config(std::size_t n_actions, std::vector<int> cards, std::size_t pool, double beta = 0.5) {
  EnvConfig c;
  c.n_actions = n_actions;
  c.d_e = cards.size();
  c.cardinalities = std::move(cards);
  c.pool_size = pool;
  c.beta = beta;
  return c;
}

const VisitationExpectation kPool = VisitationExpectation::pool_exact();

// V(pi_e) from the naive oracle, straight over the pool.
double naive_value(const Environment& env) {
  double v = 0.0;
  for (const Context& x : env.context_pool()) {
    const std::vector<double> q = naive::all_q_xa(env, x);
    const std::vector<double> pi = naive::epsilon_greedy(env.config().epsilon, q);
    for (std::size_t a = 0; a < q.size(); ++a) v += pi[a] * q[a];
  }
  return v / static_cast<double>(env.context_pool().size());
}

// Per-sample second central moment of a term t(x, a, e) + noise weight by enumeration.
template <class Term>
double enumerated_variance(const Environment& env, Term term, double noise_coef_power) {
  double m1 = 0.0, m2 = 0.0;
  const double px = 1.0 / static_cast<double>(env.context_pool().size());
  const double s2 = env.config().reward_noise_sd * env.config().reward_noise_sd;
  for (const Context& x : env.context_pool()) {
    const std::vector<double> q = naive::all_q_xa(env, x);
    const std::vector<double> pb = naive::softmax(env.config().beta, q);
    const std::vector<double> pe = naive::epsilon_greedy(env.config().epsilon, q);
    for (ActionId a = 0; a < env.n_actions(); ++a) {
      naive::enumerate(env.cardinalities(), [&](const EmbeddingVector& e) {
        const double p = px * pb[a] * naive::p_embedding(env, a, e);
        const auto [mean, w] = term(x, pe, pb, q, a, e);
        m1 += p * mean;
        m2 += p * (mean * mean + std::pow(w, noise_coef_power) * s2);
      });
    }
  }
  return m2 - m1 * m1;
}

}  // namespace

TEST(TrueValue, ZeroRewardEnvironmentHasZeroValue) {
  const Environment base = init_env(pool_config(4, {3}, 5), 1);
  EnvParameters p = base.params();
  std::fill(p.M.begin(), p.M.end(), 0.0);
  std::fill(p.theta_x.begin(), p.theta_x.end(), 0.0);
  std::fill(p.theta_e.begin(), p.theta_e.end(), 0.0);
  const Environment env(base.config(), p, 1);
  EXPECT_EQ(true_value(env, kPool).value, 0.0);
  EXPECT_EQ(true_value(env, kPool).standard_error, 0.0);
}

TEST(TrueValue, UniformEvaluationOverOneContextAveragesActions) {
  EnvConfig c = pool_config(2, {3}, 1);
  c.epsilon = 1.0;
  const Environment env = init_env(c, 2);
  const Context& x = env.context_pool()[0];
  EXPECT_NEAR(true_value(env, kPool).value, 0.5 * (naive::q_xa(env, x, 0) + naive::q_xa(env, x, 1)), 1e-12);
}

TEST(TrueValue, PoolExactMatchesNaiveOracle) {
  EnvConfig c = pool_config(7, {3, 4}, 12);
  c.direct_effect_strength = 0.3;
  const Environment env = init_env(c, 3);
  EXPECT_NEAR(true_value(env, kPool).value, naive_value(env), 1e-12);
}

TEST(TrueValue, MonteCarloAgreesWithPoolWithinItsError) {
  const Environment env = init_env(pool_config(10, {3, 3}, 30), 4);
  const OracleValue exact = true_value(env, kPool);
  const OracleValue mc = true_value(env, VisitationExpectation::monte_carlo(200000, 5));
  EXPECT_GT(mc.standard_error, 0.0);
  EXPECT_LE(std::fabs(mc.value - exact.value), 4.0 * mc.standard_error);
  EXPECT_THROW(true_value(env, VisitationExpectation::monte_carlo(1, 5)), ValidationError);
}

TEST(TrueValue, PoolOrderDoesNotMatter) {
  const Environment env = init_env(pool_config(6, {4}, 9), 6);
  EnvParameters p = env.params();
  std::reverse(p.context_pool.begin(), p.context_pool.end());
  const Environment reversed(env.config(), p, env.seed());
  EXPECT_NEAR(true_value(env, kPool).value, true_value(reversed, kPool).value, 1e-13);
}

TEST(TrueValue, PoolExactNeedsAPool) {
  EXPECT_THROW(true_value(init_env(pool_config(3, {2}, 0), 1), kPool), ValidationError);
}

TEST(AnalyticVariance, IpsUnderUniformPoliciesIsRewardVariance) {
  EnvConfig c = pool_config(5, {3, 2}, 6, 0.0);
  c.epsilon = 1.0;
  c.reward_noise_sd = 0.0;
  const Environment env = init_env(c, 7);
  const double expected = enumerated_variance(
      env,
      [&](const Context& x, const std::vector<double>&, const std::vector<double>&, const std::vector<double>&,
          ActionId a, const EmbeddingVector& e) { return std::pair{naive::q_xae(env, x, a, e), 1.0}; },
      2.0);
  EXPECT_NEAR(analytic_variance_ips(env, kPool), expected, 1e-10);
}

TEST(AnalyticVariance, IpsMatchesEnumerationWithNoise) {
  EnvConfig c = pool_config(6, {3, 3}, 8);
  c.direct_effect_strength = 0.4;
  const Environment env = init_env(c, 8);
  const double expected = enumerated_variance(
      env,
      [&](const Context& x, const std::vector<double>& pe, const std::vector<double>& pb, const std::vector<double>&,
          ActionId a, const EmbeddingVector& e) {
        const double w = pe[a] / pb[a];
        return std::pair{w * naive::q_xae(env, x, a, e), w};
      },
      2.0);
  EXPECT_NEAR(analytic_variance_ips(env, kPool), expected, 1e-9 * expected);
}

TEST(AnalyticVariance, DrWithExactModelDropsActionTerm) {
  const Environment env = init_env(pool_config(8, {3, 2}, 10), 9);
  const auto exact = [&](const Context& x, ActionId a) { return expected_reward_xa(env, x, a); };
  EXPECT_NEAR(analytic_variance_dr_terms(env, exact, kPool).action, 0.0, 1e-12);
}

TEST(AnalyticVariance, DrWithZeroModelEqualsIps) {
  const Environment env = init_env(pool_config(8, {3, 2}, 10), 10);
  const auto zero = [](const Context&, ActionId) { return 0.0; };
  EXPECT_NEAR(analytic_variance_dr(env, zero, kPool), analytic_variance_ips(env, kPool), 1e-12);
}

TEST(AnalyticVariance, DrMatchesEnumeration) {
  const Environment env = init_env(pool_config(5, {2, 3}, 7), 11);
  const auto qhat = [](const Context& x, ActionId a) { return 0.3 * x[0] - 0.1 * static_cast<double>(a); };
  const double expected = enumerated_variance(
      env,
      [&](const Context& x, const std::vector<double>& pe, const std::vector<double>& pb, const std::vector<double>&,
          ActionId a, const EmbeddingVector& e) {
        double base = 0.0;
        for (ActionId b = 0; b < env.n_actions(); ++b) base += pe[b] * qhat(x, b);
        const double w = pe[a] / pb[a];
        return std::pair{base + w * (naive::q_xae(env, x, a, e) - qhat(x, a)), w};
      },
      2.0);
  EXPECT_NEAR(analytic_variance_dr(env, qhat, kPool), expected, 1e-9 * expected);
}

TEST(VarianceGap, ComponentsSumToExactDifference) {
  const Environment env = init_env(pool_config(12, {3, 3}, 8), 12);
  const auto qa = [](const Context& x, ActionId) { return 0.2 * x[1]; };
  const auto qae = [](const Context& x, ActionId, const EmbeddingVector&) { return 0.2 * x[1]; };
  const VarianceGap gap = variance_gap_terms(env, qa, qae, kPool);
  EXPECT_NEAR(gap.exact, gap.prediction_error + gap.noise + gap.embedding_spread, 1e-9 * std::fabs(gap.exact));
  EXPECT_EQ(variance_gap_mdr(env, qa, qae, kPool), gap.exact);
}

TEST(VarianceGap, MatchesDifferenceOfEnumeratedVariances) {
  const Environment env = init_env(pool_config(6, {2, 3}, 5), 13);
  const auto qa = [](const Context& x, ActionId a) { return 0.1 * x[0] + 0.05 * static_cast<double>(a); };
  const auto qae = [](const Context& x, ActionId, const EmbeddingVector& e) { return 0.1 * x[0] + 0.2 * e[0]; };
  const double dr = enumerated_variance(
      env,
      [&](const Context& x, const std::vector<double>& pe, const std::vector<double>& pb, const std::vector<double>&,
          ActionId a, const EmbeddingVector& e) {
        double base = 0.0;
        for (ActionId b = 0; b < env.n_actions(); ++b) base += pe[b] * qa(x, b);
        const double w = pe[a] / pb[a];
        return std::pair{base + w * (naive::q_xae(env, x, a, e) - qa(x, a)), w};
      },
      2.0);
  const double mdr = enumerated_variance(
      env,
      [&](const Context& x, const std::vector<double>& pe, const std::vector<double>& pb, const std::vector<double>&,
          ActionId a, const EmbeddingVector& e) {
        double base = 0.0;
        for (ActionId b = 0; b < env.n_actions(); ++b) base += pe[b] * qa(x, b);
        const double w = naive::p_embedding_under(env, pe, e) / naive::p_embedding_under(env, pb, e);
        return std::pair{base + w * (naive::q_xae(env, x, a, e) - qae(x, a, e)), w};
      },
      2.0);
  EXPECT_NEAR(variance_gap_mdr(env, qa, qae, kPool), dr - mdr, 1e-9 * std::max(1.0, std::fabs(dr)));
}

TEST(VarianceGap, IdentityEmbeddingClosesTheGapForActionFreeModel) {
  EnvConfig c = pool_config(4, {4}, 6);
  EnvParameters p = init_env(c, 14).params();
  for (ActionId a = 0; a < 4; ++a) {
    for (int k = 0; k < 4; ++k) p.alpha[a * 4 + static_cast<std::size_t>(k)] = (k == static_cast<int>(a)) ? 0.0 : -1e4;
  }
  const Environment env(c, p, 14);
  const auto qa = [&](const Context& x, ActionId a) { return expected_reward_xa(env, x, a); };
  const auto qae = [&](const Context& x, ActionId a, const EmbeddingVector& e) {
    return expected_reward_xae(env, x, a, e);
  };
  EXPECT_NEAR(variance_gap_mdr(env, qa, qae, kPool), 0.0, 1e-8);
}

TEST(VarianceGap, RejectsDirectEffectAndOversizedSpaces) {
  EnvConfig c = pool_config(4, {3}, 3);
  c.direct_effect_strength = 0.2;
  const auto qa = [](const Context&, ActionId) { return 0.0; };
  const auto qae = [](const Context&, ActionId, const EmbeddingVector&) { return 0.0; };
  EXPECT_THROW(variance_gap_mdr(init_env(c, 1), qa, qae, kPool), ValidationError);
  EXPECT_THROW(variance_gap_mdr(init_env(pool_config(4, {10, 10, 10}, 3), 1), qa, qae, kPool, 5000), CapacityError);
}

TEST(MonteCarloEval, ConstantEstimatorHasNoErrorAgainstMatchingTruth) {
  const Environment env = init_env(pool_config(5, {3}, 4), 15);
  EstimatorSpec constant{"C", [](const ReplicationView&) { return 1.5; }};
  MonteCarloOptions opt;
  opt.known_truth = OracleValue{1.5, 0.0};
  const EvalReport r = monte_carlo_eval(env, {constant}, 50, 10, 1, opt);
  const EstimatorSummary& s = r.at("C");
  EXPECT_EQ(s.bias, 0.0);
  EXPECT_EQ(s.variance, 0.0);
  EXPECT_EQ(s.mse, 0.0);
  EXPECT_THROW(r.at("nope"), ValidationError);
}

TEST(MonteCarloEval, DirectMethodWithTrueModelIsExactUnderCyclePool) {
  EnvConfig c = pool_config(6, {3, 2}, 5);
  c.pool_sampling = PoolSampling::cycle;
  const Environment env = init_env(c, 16);
  MonteCarloOptions opt;
  opt.qhat = QhatSource::fixed([&](const Context& x, ActionId a) { return expected_reward_xa(env, x, a); },
                               [&](const Context& x, ActionId a, const EmbeddingVector& e) {
                                 return expected_reward_xae(env, x, a, e);
                               });
  const EvalReport r = monte_carlo_eval(env, standard_estimators({EstimatorKind::dm}), 25, 4, 2, opt);
  EXPECT_NEAR(r.at("DM").bias, 0.0, 1e-12);
  EXPECT_NEAR(r.at("DM").variance, 0.0, 1e-24);
}

TEST(MonteCarloEval, MseDecomposesAndInputsAreValidated) {
  const Environment env = init_env(pool_config(8, {3, 3}, 10), 17);
  const auto specs = standard_estimators(
      {EstimatorKind::dm, EstimatorKind::ips, EstimatorKind::dr, EstimatorKind::mips, EstimatorKind::mdr});
  const EvalReport r = monte_carlo_eval(env, specs, 200, 20, 3);
  for (const EstimatorSummary& s : r.estimators) {
    EXPECT_NEAR(s.mse, s.bias * s.bias + s.variance, 1e-15 * std::max(1.0, s.mse));
    ASSERT_EQ(s.estimates.size(), 20u);
    double sq = 0.0;
    for (double v : s.estimates) sq += (v - r.true_value) * (v - r.true_value);
    EXPECT_NEAR(s.mse, sq / 20.0, 1e-12 * std::max(1.0, s.mse));
  }
  EXPECT_THROW(monte_carlo_eval(env, specs, 200, 1, 3), ValidationError);
  EXPECT_THROW(monte_carlo_eval(env, specs, 0, 5, 3), ValidationError);
  EXPECT_THROW(monte_carlo_eval(env, {}, 10, 5, 3), ValidationError);
}

TEST(MonteCarloEval, FailedReplicationsAreCountedNotAveraged) {
  const Environment env = init_env(pool_config(4, {2}, 3), 18);
  EstimatorSpec flaky{"F", [](const ReplicationView& v) {
                        if (v.replication % 3 == 0) throw NumericalError("boom");
                        return 2.0;
                      }};
  MonteCarloOptions opt;
  opt.known_truth = OracleValue{1.0, 0.0};
  const EvalReport r = monte_carlo_eval(env, {flaky}, 20, 9, 4, opt);
  EXPECT_EQ(r.at("F").failures, 3u);
  EXPECT_EQ(r.at("F").replications, 6u);
  EXPECT_DOUBLE_EQ(r.at("F").bias, 1.0);
  EXPECT_TRUE(std::isnan(r.at("F").estimates[0]));
}

TEST(MonteCarloEval, ResultsDoNotDependOnThreadCount) {
  const Environment env = init_env(pool_config(10, {3, 2}, 8), 19);
  const auto specs = standard_estimators({EstimatorKind::ips, EstimatorKind::mdr});
  MonteCarloOptions one, four;
  four.threads = 4;
  const EvalReport a = monte_carlo_eval(env, specs, 100, 16, 5, one);
  const EvalReport b = monte_carlo_eval(env, specs, 100, 16, 5, four);
  for (std::size_t s = 0; s < specs.size(); ++s) EXPECT_EQ(a.estimators[s].estimates, b.estimators[s].estimates);
}

TEST(MonteCarloEval, UnbiasedEstimatorsCenterOnTruth) {
  const Environment env = init_env(pool_config(10, {3, 3}, 10), 20);
  const auto specs = standard_estimators({EstimatorKind::ips, EstimatorKind::mips});
  const EvalReport r = monte_carlo_eval(env, specs, 500, 400, 6);
  for (const EstimatorSummary& s : r.estimators) {
    EXPECT_LE(std::fabs(s.bias), 4.0 * std::sqrt(s.variance / 399.0)) << s.name;
  }
}
