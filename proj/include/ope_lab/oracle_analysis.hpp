#ifndef OPE_LAB_ORACLE_ANALYSIS_HPP
#define OPE_LAB_ORACLE_ANALYSIS_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "ope_lab/core_model.hpp"
#include "ope_lab/errors.hpp"
#include "ope_lab/summation.hpp"
#include "ope_lab/synthetic_env.hpp"

namespace ope_lab {

// How expectations over p(x) are taken: exactly over the context pool, or by
// drawing contexts.
struct VisitationExpectation {
  enum class Mode { pool_exact, monte_carlo };
  Mode mode = Mode::pool_exact;
  std::size_t samples = 0;
  std::uint64_t seed = 0;

  static VisitationExpectation pool_exact() { return {}; }
  static VisitationExpectation monte_carlo(std::size_t samples, std::uint64_t seed) {
    return {Mode::monte_carlo, samples, seed};
  }
};

struct OracleValue {
  double value = 0.0;
  double standard_error = 0.0;
};

namespace detail {

inline void require_pool(const Environment& env) {
  if (!env.pool_mode()) throw ValidationError("pool-exact expectations need an environment with a context pool");
}

// Contexts with probability weights for the expectation over p(x).
struct ContextDesign {
  std::vector<Context> contexts;
  double weight = 0.0;
};

inline ContextDesign context_design(const Environment& env, const VisitationExpectation& mode,
                                    std::uint64_t budget_per_context, std::uint64_t cap) {
  ContextDesign design;
  if (mode.mode == VisitationExpectation::Mode::pool_exact) {
    require_pool(env);
    design.contexts = env.context_pool();
  } else {
    if (mode.samples == 0) throw ValidationError("monte-carlo expectation needs a positive sample count");
    if (static_cast<double>(mode.samples) * static_cast<double>(budget_per_context) > static_cast<double>(cap)) {
      throw CapacityError("monte-carlo expectation exceeds the enumeration budget");
    }
    std::mt19937_64 rng = make_engine(mode.seed, 7);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    design.contexts.reserve(mode.samples);
    for (std::size_t i = 0; i < mode.samples; ++i) {
      if (env.pool_mode()) {
        const std::size_t m = env.context_pool().size();
        design.contexts.push_back(
            env.context_pool()[std::min(m - 1, static_cast<std::size_t>(unif(rng) * static_cast<double>(m)))]);
      } else {
        Context x(env.d_x());
        for (double& v : x) v = normal(rng);
        design.contexts.push_back(std::move(x));
      }
    }
  }
  if (static_cast<double>(design.contexts.size()) * static_cast<double>(budget_per_context) >
      static_cast<double>(cap)) {
    throw CapacityError("exact expectation exceeds the enumeration cap");
  }
  design.weight = 1.0 / static_cast<double>(design.contexts.size());
  return design;
}

}  // namespace detail

// V(pi_e). Pool-exact sums sum_a pi_e(a|x) q(x, a) over the pool with zero
// standard error; monte-carlo averages the same per-context value over drawn
// contexts, so its standard error reflects only the spread over p(x).
inline OracleValue true_value(const Environment& env, const VisitationExpectation& mode) {
  if (mode.mode == VisitationExpectation::Mode::pool_exact) {
    detail::require_pool(env);
    CompensatedSum acc;
    for (const Context& x : env.context_pool()) {
      const std::vector<double> pi = evaluation_policy(env, x);
      double v = 0.0;
      for (ActionId a = 0; a < env.n_actions(); ++a) v += pi[a] * expected_reward_xa(env, x, a);
      acc.add(v);
    }
    return {acc.mean(), 0.0};
  }
  if (mode.samples < 2) throw ValidationError("monte-carlo true value needs at least 2 samples");
  std::mt19937_64 rng = make_engine(mode.seed, 11);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t n_actions = env.n_actions();
  std::vector<double> q(n_actions);
  std::vector<double> pi(n_actions);
  Context fresh(env.d_x());
  CompensatedSum sum;
  CompensatedSum sum_sq;
  for (std::size_t i = 0; i < mode.samples; ++i) {
    std::span<const double> q_row;
    std::span<const double> pi_row;
    if (env.pool_mode()) {
      const std::size_t m = env.context_pool().size();
      const std::size_t idx = std::min(m - 1, static_cast<std::size_t>(unif(rng) * static_cast<double>(m)));
      q_row = std::span<const double>(env.pool_rewards()).subspan(idx * n_actions, n_actions);
      pi_row = env.pool_evaluation().row(idx);
    } else {
      for (double& v : fresh) v = normal(rng);
      env.expected_rewards_all(fresh, q);
      epsilon_greedy_policy(env.config().epsilon, q, pi);
      q_row = q;
      pi_row = pi;
    }
    double value = 0.0;
    for (ActionId a = 0; a < n_actions; ++a) value += pi_row[a] * q_row[a];
    sum.add(value);
    sum_sq.add(value * value);
  }
  const double n = static_cast<double>(mode.samples);
  const double mean = sum.value() / n;
  const double var = std::max(0.0, (sum_sq.value() - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

// Per-sample variance decomposition n V[V-hat] = noise + context + action.
struct VarianceTerms {
  double noise = 0.0;    // E[w^2 sigma^2]
  double context = 0.0;  // V_x[E_a[w q]]
  double action = 0.0;   // E_x[V_a[w q]] for IPS, E_x[V_a[w Delta]] for DR
  double total() const { return noise + context + action; }
};

namespace detail {

// sigma(x, a)^2 is the reward variance given (x, a): Gaussian noise plus the
// spread of q(x, a, e) over p(e|a).
template <class QhatXa>
VarianceTerms analytic_variance_terms(const Environment& env, const VisitationExpectation& mode,
                                      const QhatXa& qhat_xa, std::uint64_t cap) {
  const std::size_t n_actions = env.n_actions();
  const ContextDesign design = context_design(env, mode, n_actions, cap);
  const double noise_var = env.config().reward_noise_sd * env.config().reward_noise_sd;
  std::vector<double> q(n_actions);
  std::vector<double> pi_b(n_actions);
  std::vector<double> pi_e(n_actions);
  CompensatedSum noise;
  CompensatedSum inner_sum;
  CompensatedSum inner_sq;
  CompensatedSum action;
  for (const Context& x : design.contexts) {
    for (ActionId a = 0; a < n_actions; ++a) q[a] = expected_reward_xa(env, x, a);
    softmax_policy(env.config().beta, q, pi_b);
    epsilon_greedy_policy(env.config().epsilon, q, pi_e);
    double noise_x = 0.0;
    double inner = 0.0;     // E_a[w q] = sum_a pi_e q
    double residual = 0.0;  // E_a[w Delta]
    double second = 0.0;    // E_a[(w Delta)^2]
    for (ActionId a = 0; a < n_actions; ++a) {
      const double w = pi_e[a] / pi_b[a];
      const double sigma2 = noise_var + reward_spread_xa(env, x, a);
      const double delta = q[a] - qhat_xa(x, a);
      noise_x += pi_b[a] * w * w * sigma2;
      inner += pi_e[a] * q[a];
      residual += pi_e[a] * delta;
      second += pi_b[a] * w * w * delta * delta;
    }
    noise.add(design.weight * noise_x);
    inner_sum.add(design.weight * inner);
    inner_sq.add(design.weight * inner * inner);
    action.add(design.weight * (second - residual * residual));
  }
  VarianceTerms terms;
  terms.noise = noise.value();
  terms.context = std::max(0.0, inner_sq.value() - inner_sum.value() * inner_sum.value());
  terms.action = action.value();
  return terms;
}

}  // namespace detail

inline VarianceTerms analytic_variance_ips_terms(const Environment& env, const VisitationExpectation& mode,
                                                 std::uint64_t cap = kDefaultEnumerationCap) {
  return detail::analytic_variance_terms(env, mode, [](const Context&, ActionId) { return 0.0; }, cap);
}

// n V[V-hat_IPS]; divide by n for the variance of one estimate.
inline double analytic_variance_ips(const Environment& env, const VisitationExpectation& mode,
                                    std::uint64_t cap = kDefaultEnumerationCap) {
  return analytic_variance_ips_terms(env, mode, cap).total();
}

template <class QhatXa>
VarianceTerms analytic_variance_dr_terms(const Environment& env, const QhatXa& qhat_xa,
                                         const VisitationExpectation& mode, std::uint64_t cap = kDefaultEnumerationCap) {
  return detail::analytic_variance_terms(env, mode, qhat_xa, cap);
}

template <class QhatXa>
double analytic_variance_dr(const Environment& env, const QhatXa& qhat_xa, const VisitationExpectation& mode,
                            std::uint64_t cap = kDefaultEnumerationCap) {
  return analytic_variance_dr_terms(env, qhat_xa, mode, cap).total();
}

// n (V[DR] - V[MDR]) by exact enumeration of (x, a, e), plus its parts.
// `exact` is the second-moment difference of the two per-sample terms.
// `prediction_error` is E[w(x,a)^2 Delta(x,a)^2 - w(x,e)^2 Delta(x,a,e)^2];
// with no direct effect and an action-free q-hat, exact = prediction_error +
// noise + embedding_spread, where the last two come from the reward noise
// and from q(x,a,e) varying over p(e|a) inside DR's residual.
struct VarianceGap {
  double exact = 0.0;
  double prediction_error = 0.0;
  double noise = 0.0;             // sigma_r^2 E[w(x,a)^2 - w(x,e)^2]
  double embedding_spread = 0.0;  // E[w(x,a)^2 (q(x,a,e) - q(x,a))^2]
};

template <class QhatXa, class QhatXae>
VarianceGap variance_gap_terms(const Environment& env, const QhatXa& qhat_xa, const QhatXae& qhat_xae,
                               const VisitationExpectation& mode, std::uint64_t cap = kDefaultEnumerationCap) {
  if (env.config().direct_effect_strength != 0.0) {
    throw ValidationError("variance gap requires no direct effect of the action on reward");
  }
  const std::size_t n_actions = env.n_actions();
  const std::uint64_t space = embedding_space_size(env.cardinalities(), cap);
  if (space > cap) throw CapacityError("embedding space exceeds enumeration cap");
  const detail::ContextDesign design = detail::context_design(env, mode, n_actions * space, cap);

  const FactoredEmbeddingTable& table = env.embedding_table();
  const double noise_var = env.config().reward_noise_sd * env.config().reward_noise_sd;
  std::vector<double> q(n_actions);
  std::vector<double> qhat(n_actions);
  std::vector<double> pi_b(n_actions);
  std::vector<double> pi_e(n_actions);
  std::vector<EmbeddingVector> space_list;
  for_each_embedding(env.cardinalities(), cap, [&](const EmbeddingVector& e) { space_list.push_back(e); });
  std::vector<double> marg_e(space_list.size());
  std::vector<double> marg_b(space_list.size());
  std::vector<double> q_e(space_list.size());

  CompensatedSum dr_m1, dr_m2, mdr_m1, mdr_m2, pred, noise, spread;
  for (const Context& x : design.contexts) {
    for (ActionId a = 0; a < n_actions; ++a) {
      q[a] = expected_reward_xa(env, x, a);
      qhat[a] = qhat_xa(x, a);
    }
    softmax_policy(env.config().beta, q, pi_b);
    epsilon_greedy_policy(env.config().epsilon, q, pi_e);
    double baseline = 0.0;
    for (ActionId a = 0; a < n_actions; ++a) baseline += pi_e[a] * qhat[a];
    for (std::size_t j = 0; j < space_list.size(); ++j) {
      marg_e[j] = marginal_embedding_dist(pi_e, table, space_list[j]);
      marg_b[j] = marginal_embedding_dist(pi_b, table, space_list[j]);
      q_e[j] = expected_reward_xe(env, x, space_list[j]);
    }
    for (ActionId a = 0; a < n_actions; ++a) {
      const double w_a = pi_e[a] / pi_b[a];
      const double delta_a = q[a] - qhat[a];
      for (std::size_t j = 0; j < space_list.size(); ++j) {
        const double p = design.weight * pi_b[a] * table.joint_prob(a, space_list[j]);
        if (p == 0.0) continue;
        const double w_e = marg_e[j] / marg_b[j];
        const double q_xae = q_e[j];
        const double delta_ae = q_xae - qhat_xae(x, a, space_list[j]);
        const double dr_mean = baseline + w_a * (q_xae - qhat[a]);
        const double mdr_mean = baseline + w_e * delta_ae;
        dr_m1.add(p * dr_mean);
        dr_m2.add(p * (dr_mean * dr_mean + w_a * w_a * noise_var));
        mdr_m1.add(p * mdr_mean);
        mdr_m2.add(p * (mdr_mean * mdr_mean + w_e * w_e * noise_var));
        pred.add(p * (w_a * w_a * delta_a * delta_a - w_e * w_e * delta_ae * delta_ae));
        noise.add(p * noise_var * (w_a * w_a - w_e * w_e));
        spread.add(p * w_a * w_a * (q_xae - q[a]) * (q_xae - q[a]));
      }
    }
  }
  VarianceGap gap;
  const double dr_var = dr_m2.value() - dr_m1.value() * dr_m1.value();
  const double mdr_var = mdr_m2.value() - mdr_m1.value() * mdr_m1.value();
  gap.exact = dr_var - mdr_var;
  gap.prediction_error = pred.value();
  gap.noise = noise.value();
  gap.embedding_spread = spread.value();
  return gap;
}

// n (V[DR] - V[MDR]).
template <class QhatXa, class QhatXae>
double variance_gap_mdr(const Environment& env, const QhatXa& qhat_xa, const QhatXae& qhat_xae,
                        const VisitationExpectation& mode, std::uint64_t cap = kDefaultEnumerationCap) {
  return variance_gap_terms(env, qhat_xa, qhat_xae, mode, cap).exact;
}

// Structural check (lambda == 0) plus a spot check that q(x, a, e) ignores a.
inline bool check_no_direct_effect(const Environment& env) {
  if (env.config().direct_effect_strength != 0.0) return false;
  std::mt19937_64 rng = make_engine(env.seed(), 13);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> action(0, env.n_actions() - 1);
  for (int trial = 0; trial < 10; ++trial) {
    Context x(env.d_x());
    for (double& v : x) v = normal(rng);
    EmbeddingVector e(env.d_e());
    for (std::size_t k = 0; k < env.d_e(); ++k) {
      std::uniform_int_distribution<int> cat(0, env.cardinalities()[k] - 1);
      e[k] = cat(rng);
    }
    for (int pair = 0; pair < 10; ++pair) {
      const double q1 = expected_reward_xae(env, x, action(rng), e);
      const double q2 = expected_reward_xae(env, x, action(rng), e);
      if (std::abs(q1 - q2) > 1e-12) return false;
    }
  }
  return true;
}

}  // namespace ope_lab

#endif  // OPE_LAB_ORACLE_ANALYSIS_HPP
