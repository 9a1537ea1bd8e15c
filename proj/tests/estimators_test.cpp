#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "naive_oracle.hpp"
#include "ope_lab/estimators.hpp"
#include "ope_lab/oracle_analysis.hpp"
#include "ope_lab/reward_model.hpp"
#include "ope_lab/synthetic_env.hpp"

using namespace ope_lab;

namespace {

EnvConfig env_config(std::size_t n_actions, std::vector<int> cards, double beta = 0.5) {
  EnvConfig c;
  c.n_actions = n_actions;
  c.d_e = cards.size();
  c.cardinalities = std::move(cards);
  c.beta = beta;
  return c;
}

// Two actions, one embedding dimension with two categories:
// a0 emits e=0 w.p. 0.8, a1 emits e=0 w.p. 0.2.
struct TwoByTwo {
  FactoredEmbeddingTable table{2, {2}};
  TwoByTwo() {
    table.prob(0, 0, 0) = 0.8;
    table.prob(0, 0, 1) = 0.2;
    table.prob(1, 0, 0) = 0.2;
    table.prob(1, 0, 1) = 0.8;
  }
  const FactoredEmbeddingTable& embedding_table(const Context&) const { return table; }
};

LoggedDataset single_sample(ActionId a, int e, double r, double pb) {
  LoggedDataset d;
  d.meta = {1, 2, 1, 1, {2}, 0};
  d.samples = {{{0.0}, a, {e}, r, pb}};
  return d;
}

auto zero_xa = [](const Context&, ActionId) { return 0.0; };
auto zero_xae = [](const Context&, ActionId, const EmbeddingVector&) { return 0.0; };

struct Drawn {
  Environment env;
  LoggedDataset data;
  DatasetPolicies policies;
};

Drawn draw(const EnvConfig& c, std::uint64_t seed, std::size_t n) {
  Environment env = init_env(c, seed);
  LoggedDataset data = sample_logged_data(env, n, seed + 1);
  DatasetPolicies pol = dataset_policies(env, data);
  return {std::move(env), std::move(data), std::move(pol)};
}

double mean_reward(const LoggedDataset& d) {
  double s = 0.0;
  for (const auto& x : d.samples) s += x.reward;
  return s / static_cast<double>(d.size());
}

}  // namespace

TEST(DirectMethod, ConstantModelReturnsTheConstant) {
  const Drawn d = draw(env_config(8, {3}), 1, 50);
  EXPECT_NEAR(estimate_dm(d.data, d.policies.evaluation, [](const Context&, ActionId) { return 2.5; }).value, 2.5,
              1e-14);
  EXPECT_EQ(estimate_dm(d.data, d.policies.evaluation, zero_xa).value, 0.0);
  EXPECT_EQ(estimate_dm(d.data, d.policies.evaluation, zero_xa).name, "DM");
}

TEST(DirectMethod, TrueRewardOverFullPoolCycleIsExact) {
  EnvConfig c = env_config(6, {3, 2});
  c.pool_size = 5;
  c.pool_sampling = PoolSampling::cycle;
  const Environment env = init_env(c, 2);
  const LoggedDataset data = sample_logged_data(env, 20, 3);
  const IndexedPolicyRows rows(env.pool_evaluation(), data.context_ids);
  const double dm = estimate_dm(data, rows, [&](const Context& x, ActionId a) { return naive::q_xa(env, x, a); }).value;
  EXPECT_NEAR(dm, true_value(env, VisitationExpectation::pool_exact()).value, 1e-12);
}

TEST(InverseProbability, SamePoliciesGiveTheMeanReward) {
  const Drawn d = draw(env_config(10, {3}), 4, 200);
  EXPECT_NEAR(estimate_ips(d.data, d.policies.behavior).value, mean_reward(d.data), 1e-12);
}

TEST(InverseProbability, SingleSampleArithmetic) {
  const LoggedDataset d = single_sample(1, 0, 2.0, 0.4);
  const PolicyMatrix pe(1, 2, PolicyKind::evaluation, {0.2, 0.8});
  EXPECT_DOUBLE_EQ(estimate_ips(d, pe).value, 4.0);
}

TEST(InverseProbability, ZeroPropensityIsASupportError) {
  const LoggedDataset d = single_sample(1, 0, 2.0, 0.0);
  const PolicyMatrix pe(1, 2, PolicyKind::evaluation, {0.2, 0.8});
  EXPECT_THROW(estimate_ips(d, pe), SupportError);
}

TEST(InverseProbability, MisalignedPolicyRowsThrow) {
  const LoggedDataset d = single_sample(1, 0, 2.0, 0.4);
  const PolicyMatrix two_rows(2, 2, PolicyKind::evaluation, {0.5, 0.5, 0.5, 0.5});
  EXPECT_THROW(estimate_ips(d, two_rows), ShapeError);
  const PolicyMatrix three_actions(1, 3, PolicyKind::evaluation, {0.2, 0.3, 0.5});
  EXPECT_THROW(estimate_ips(d, three_actions), ShapeError);
}

TEST(DoublyRobust, ZeroModelReducesToIps) {
  const Drawn d = draw(env_config(12, {4, 2}), 5, 300);
  EXPECT_NEAR(estimate_dr(d.data, d.policies.evaluation, zero_xa).value,
              estimate_ips(d.data, d.policies.evaluation).value, 1e-12);
}

TEST(DoublyRobust, ModelEqualToEveryRewardLeavesOnlyTheBaseline) {
  // With a predictor that reproduces the logged reward exactly the residual term vanishes.
  LoggedDataset d = single_sample(1, 0, 2.0, 0.4);
  const PolicyMatrix pe(1, 2, PolicyKind::evaluation, {0.2, 0.8});
  const auto model = [](const Context&, ActionId a) { return a == 1 ? 2.0 : -1.0; };
  EXPECT_NEAR(estimate_dr(d, pe, model).value, 0.2 * -1.0 + 0.8 * 2.0, 1e-15);
}

TEST(MarginalWeights, ArithmeticCase) {
  const TwoByTwo model;
  const LoggedDataset d = single_sample(0, 0, 1.25, 0.5);
  const PolicyMatrix pe(1, 2, PolicyKind::evaluation, {1.0, 0.0});
  const PolicyMatrix pb(1, 2, PolicyKind::behavior, {0.5, 0.5});
  const WeightVector w = compute_marginal_weights(model, pe, pb, d);
  EXPECT_DOUBLE_EQ(w[0], 1.6);
  EXPECT_EQ(w.kind, WeightKind::marginal);
  EXPECT_DOUBLE_EQ(estimate_mips(d, w).value, 2.0);
}

TEST(MarginalWeights, IdentityEmbeddingRecoversVanillaWeights) {
  EnvConfig c = env_config(5, {5});
  EnvParameters p = init_env(c, 6).params();
  for (ActionId a = 0; a < 5; ++a) {
    for (int k = 0; k < 5; ++k) p.alpha[a * 5 + static_cast<std::size_t>(k)] = (k == static_cast<int>(a)) ? 0.0 : -1e4;
  }
  const Environment env(c, p, 6);
  const LoggedDataset data = sample_logged_data(env, 200, 7);
  const DatasetPolicies pol = dataset_policies(env, data);
  const WeightVector w_e = compute_marginal_weights(env, pol.evaluation, pol.behavior, data);
  const WeightVector w_a = vanilla_weights(data, pol.evaluation);
  for (std::size_t i = 0; i < data.size(); ++i) EXPECT_NEAR(w_e[i], w_a[i], 1e-9 * std::max(1.0, w_a[i]));
}

TEST(MarginalWeights, SamePoliciesGiveUnitWeights) {
  const Drawn d = draw(env_config(20, {3, 3}), 8, 100);
  const WeightVector w = compute_marginal_weights(d.env, d.policies.behavior, d.policies.behavior, d.data);
  for (double v : w.values) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(MarginalWeights, MatchNaiveEnumeration) {
  const Drawn d = draw(env_config(15, {3, 4}), 9, 60);
  const WeightVector w = compute_marginal_weights(d.env, d.policies.evaluation, d.policies.behavior, d.data);
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    const auto& s = d.data.samples[i];
    const std::vector<double> pe(d.policies.evaluation.row(i).begin(), d.policies.evaluation.row(i).end());
    const std::vector<double> pb(d.policies.behavior.row(i).begin(), d.policies.behavior.row(i).end());
    EXPECT_NEAR(w[i], naive::p_embedding_under(d.env, pe, s.embedding) / naive::p_embedding_under(d.env, pb, s.embedding),
                1e-10 * std::max(1.0, w[i]));
  }
}

TEST(MarginalizedImportance, RejectsWrongLengthOrKind) {
  const LoggedDataset d = single_sample(0, 0, 1.0, 0.5);
  EXPECT_THROW(estimate_mips(d, WeightVector{{1.0, 1.0}, WeightKind::marginal}), ShapeError);
  EXPECT_THROW(estimate_mips(d, WeightVector{{1.0}, WeightKind::vanilla}), ValidationError);
}

TEST(MarginalizedDoublyRobust, ZeroModelReducesToMips) {
  const Drawn d = draw(env_config(12, {3, 3}), 10, 300);
  const WeightVector w = compute_marginal_weights(d.env, d.policies.evaluation, d.policies.behavior, d.data);
  EXPECT_NEAR(estimate_mdr(d.data, d.policies.evaluation, zero_xa, zero_xae, w).value, estimate_mips(d.data, w).value,
              1e-12);
}

TEST(MarginalizedDoublyRobust, IdentityEmbeddingReducesToDr) {
  EnvConfig c = env_config(4, {4});
  EnvParameters p = init_env(c, 11).params();
  for (ActionId a = 0; a < 4; ++a) {
    for (int k = 0; k < 4; ++k) p.alpha[a * 4 + static_cast<std::size_t>(k)] = (k == static_cast<int>(a)) ? 0.0 : -1e4;
  }
  const Environment env(c, p, 11);
  const LoggedDataset data = sample_logged_data(env, 300, 12);
  const DatasetPolicies pol = dataset_policies(env, data);
  const RewardModel model = fit_qhat(data, {}, 1.0);
  const MarginalizedRewardModel qa = marginalize_qhat(env, model);
  const WeightVector w = compute_marginal_weights(env, pol.evaluation, pol.behavior, data);
  EXPECT_NEAR(estimate_mdr(data, pol.evaluation, qa, as_xae(model), w).value,
              estimate_dr(data, pol.evaluation, qa).value, 1e-9);
}

TEST(RewardModelFit, RecoversNoiselessLinearRewards) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> normal(0.0, 1.0);
  LoggedDataset d;
  d.meta = {400, 3, 2, 2, {3, 2}, 0};
  const auto truth = [](const Context& x, const EmbeddingVector& e) {
    return 0.5 + 2.0 * x[0] - x[1] + (e[0] == 2 ? 1.5 : 0.0) + (e[1] == 1 ? -0.75 : 0.0);
  };
  for (std::size_t i = 0; i < 400; ++i) {
    LoggedSample s;
    s.x = {normal(rng), normal(rng)};
    s.action = i % 3;
    s.embedding = {static_cast<int>(i % 3), static_cast<int>((i / 3) % 2)};
    s.reward = truth(s.x, s.embedding);
    s.behavior_propensity = 1.0 / 3;
    d.samples.push_back(s);
  }
  const RewardModel m = fit_qhat(d, {}, 1e-9);
  for (const LoggedSample& s : d.samples) EXPECT_NEAR(m.predict_xae(s.x, s.action, s.embedding), s.reward, 1e-6);
}

TEST(RewardModelFit, ConstantRewardsAndHeavyRidge) {
  Drawn d = draw(env_config(6, {3}), 14, 500);
  for (auto& s : d.data.samples) s.reward = 3.0;
  const RewardModel flat = fit_qhat(d.data, {}, 1.0);
  EXPECT_NEAR(flat.predict_xae(d.data.samples[0].x, 2, {1}), 3.0, 1e-9);

  const Drawn e = draw(env_config(6, {3}), 15, 500);
  const RewardModel shrunk = fit_qhat(e.data, {}, 1e8);
  EXPECT_NEAR(shrunk.intercept(), mean_reward(e.data), 1e-4);
  for (std::size_t j = 0; j < 10; ++j) EXPECT_LT(std::fabs(shrunk.context_weight(j)), 1e-4);
}

TEST(RewardModelFit, SingularSystemWithoutRidgeThrows) {
  const Drawn d = draw(env_config(6, {3}), 16, 200);
  EXPECT_THROW(fit_qhat(d.data, {}, 0.0), NumericalError);
  EXPECT_THROW(fit_qhat(d.data, {}, -1.0), ValidationError);
}

TEST(RewardModelFit, JsonRoundTrip) {
  const Drawn d = draw(env_config(7, {2, 3}), 17, 200);
  const RewardModel m = fit_qhat(d.data, FeatureConfig{true}, 0.5);
  const RewardModel back = reward_model_from_json(nlohmann::json::parse(reward_model_to_json(m).dump()));
  EXPECT_EQ(back.weights(), m.weights());
  EXPECT_EQ(back.features(), m.features());
  EXPECT_EQ(back.ridge_lambda(), m.ridge_lambda());
  EXPECT_THROW(reward_model_from_json(nlohmann::json::parse("{\"d_x\": 2}")), ValidationError);
}

TEST(Marginalize, LinearModelMatchesEnumeration) {
  const Drawn d = draw(env_config(9, {3, 4}), 18, 300);
  const RewardModel m = fit_qhat(d.data, FeatureConfig{true}, 1.0);
  const MarginalizedRewardModel qa = marginalize_qhat(d.env, m);
  for (std::size_t i = 0; i < 5; ++i) {
    const Context& x = d.data.samples[i].x;
    for (ActionId a = 0; a < 9; ++a) {
      double ref = 0.0;
      naive::enumerate(d.env.cardinalities(),
                       [&](const EmbeddingVector& e) { ref += naive::p_embedding(d.env, a, e) * m.predict_xae(x, a, e); });
      EXPECT_NEAR(qa(x, a), ref, 1e-10);
    }
  }
}

TEST(Marginalize, NonAdditivePredictorMatchesEnumeration) {
  const Environment env = init_env(env_config(5, {3, 3}), 19);
  const auto fn = [](const Context& x, ActionId a, const EmbeddingVector& e) {
    return x[0] * e[0] * e[1] + 0.1 * static_cast<double>(a);
  };
  const auto qa = marginalize_qhat(env, FunctionRewardModel(fn, false));
  const auto additive = [](const Context& x, ActionId, const EmbeddingVector& e) { return x[1] + e[0] - 2.0 * e[1]; };
  const auto qb = marginalize_qhat(env, FunctionRewardModel(additive, true));
  const Context x(10, 0.7);
  for (ActionId a = 0; a < 5; ++a) {
    double ra = 0.0, rb = 0.0;
    naive::enumerate(env.cardinalities(), [&](const EmbeddingVector& e) {
      ra += naive::p_embedding(env, a, e) * fn(x, a, e);
      rb += naive::p_embedding(env, a, e) * additive(x, a, e);
    });
    EXPECT_NEAR(qa(x, a), ra, 1e-10);
    EXPECT_NEAR(qb(x, a), rb, 1e-10);
  }
}

TEST(Marginalize, EmbeddingFreeAndDeterministicCases) {
  EnvConfig c = env_config(3, {4});
  EnvParameters p = init_env(c, 20).params();
  for (ActionId a = 0; a < 3; ++a) {
    for (int k = 0; k < 4; ++k) p.alpha[a * 4 + static_cast<std::size_t>(k)] = (k == 3 - static_cast<int>(a)) ? 0.0 : -1e4;
  }
  const Environment env(c, p, 20);
  const Context x(10, -0.2);
  const auto free_fn = [](const Context& y, ActionId a, const EmbeddingVector&) { return y[0] + static_cast<double>(a); };
  const auto qa = marginalize_qhat(env, FunctionRewardModel(free_fn, false));
  const auto point_fn = [](const Context&, ActionId, const EmbeddingVector& e) { return 10.0 * e[0]; };
  const auto qb = marginalize_qhat(env, FunctionRewardModel(point_fn, true));
  for (ActionId a = 0; a < 3; ++a) {
    EXPECT_NEAR(qa(x, a), free_fn(x, a, {0}), 1e-12);
    EXPECT_NEAR(qb(x, a), 10.0 * (3 - static_cast<double>(a)), 1e-9);
  }
}

TEST(Marginalize, NonAdditiveModelAboveCapThrows) {
  const Environment env = init_env(env_config(3, {10, 10, 10}), 21);
  const auto fn = [](const Context&, ActionId, const EmbeddingVector&) { return 0.0; };
  EXPECT_THROW(marginalize_qhat(env, FunctionRewardModel(fn, false), 999), CapacityError);
  EXPECT_NO_THROW(marginalize_qhat(env, FunctionRewardModel(fn, true), 999));
}

TEST(Estimators, InvariantToSampleOrder) {
  const Drawn d = draw(env_config(25, {3, 3}), 22, 400);
  std::vector<std::size_t> order(d.data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), std::mt19937_64(23));
  LoggedDataset shuffled = d.data;
  PolicyMatrix pe(d.data.size(), 25, PolicyKind::evaluation), pb(d.data.size(), 25, PolicyKind::behavior);
  for (std::size_t i = 0; i < order.size(); ++i) {
    shuffled.samples[i] = d.data.samples[order[i]];
    std::copy_n(d.policies.evaluation.row(order[i]).begin(), 25, pe.mutable_row(i).begin());
    std::copy_n(d.policies.behavior.row(order[i]).begin(), 25, pb.mutable_row(i).begin());
  }
  const RewardModel m = fit_qhat(d.data, {}, 1.0);
  const MarginalizedRewardModel qa = marginalize_qhat(d.env, m);
  const WeightVector w1 = compute_marginal_weights(d.env, d.policies.evaluation, d.policies.behavior, d.data);
  const WeightVector w2 = compute_marginal_weights(d.env, pe, pb, shuffled);
  EXPECT_NEAR(estimate_dm(d.data, d.policies.evaluation, qa).value, estimate_dm(shuffled, pe, qa).value, 1e-12);
  EXPECT_NEAR(estimate_ips(d.data, d.policies.evaluation).value, estimate_ips(shuffled, pe).value, 1e-12);
  EXPECT_NEAR(estimate_dr(d.data, d.policies.evaluation, qa).value, estimate_dr(shuffled, pe, qa).value, 1e-12);
  EXPECT_NEAR(estimate_mips(d.data, w1).value, estimate_mips(shuffled, w2).value, 1e-12);
  EXPECT_NEAR(estimate_mdr(d.data, d.policies.evaluation, qa, as_xae(m), w1).value,
              estimate_mdr(shuffled, pe, qa, as_xae(m), w2).value, 1e-12);
}

TEST(Estimators, ImportanceWeightsAverageToOne) {
  const Drawn d = draw(env_config(30, {4, 4}), 24, 100000);
  const WeightVector wa = vanilla_weights(d.data, d.policies.evaluation);
  const WeightVector we = compute_marginal_weights(d.env, d.policies.evaluation, d.policies.behavior, d.data);
  for (const WeightVector* w : {&wa, &we}) {
    double m1 = 0.0, m2 = 0.0;
    for (double v : w->values) {
      m1 += v;
      m2 += v * v;
    }
    const double n = static_cast<double>(w->size());
    m1 /= n;
    const double se = std::sqrt((m2 / n - m1 * m1) / n);
    EXPECT_LE(std::fabs(m1 - 1.0), 4.0 * se);
  }
}

TEST(Estimators, MarginalWeightsHaveSmallerRangeWithManyActions) {
  int contracted = 0;
  const int seeds = 20;
  for (int seed = 0; seed < seeds; ++seed) {
    const Drawn d = draw(env_config(1000, {10, 10, 10}, 1.0), 100 + static_cast<std::uint64_t>(seed), 2000);
    const WeightVector wa = vanilla_weights(d.data, d.policies.evaluation);
    const WeightVector we = compute_marginal_weights(d.env, d.policies.evaluation, d.policies.behavior, d.data);
    const double max_a = *std::max_element(wa.values.begin(), wa.values.end());
    const double max_e = *std::max_element(we.values.begin(), we.values.end());
    if (max_e < max_a) ++contracted;
  }
  EXPECT_GE(contracted, 19);
}
