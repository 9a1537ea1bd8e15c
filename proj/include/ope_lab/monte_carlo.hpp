#ifndef OPE_LAB_MONTE_CARLO_HPP
#define OPE_LAB_MONTE_CARLO_HPP

#include <algorithm>
#include <cctype>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ope_lab/core_model.hpp"
#include "ope_lab/errors.hpp"
#include "ope_lab/estimators.hpp"
#include "ope_lab/oracle_analysis.hpp"
#include "ope_lab/reward_model.hpp"
#include "ope_lab/summation.hpp"
#include "ope_lab/synthetic_env.hpp"

namespace ope_lab {

enum class EstimatorKind { dm, ips, dr, mips, mdr };

inline std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::dm: return "DM";
    case EstimatorKind::ips: return "IPS";
    case EstimatorKind::dr: return "DR";
    case EstimatorKind::mips: return "MIPS";
    case EstimatorKind::mdr: return "MDR";
  }
  return "?";
}

inline EstimatorKind estimator_from_string(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "dm") return EstimatorKind::dm;
  if (s == "ips") return EstimatorKind::ips;
  if (s == "dr") return EstimatorKind::dr;
  if (s == "mips") return EstimatorKind::mips;
  if (s == "mdr") return EstimatorKind::mdr;
  throw ValidationError("unknown estimator '" + s + "'");
}

// Everything the five estimators need from one dataset, computed in a single
// pass over the policies.
struct ReplicationTerms {
  std::vector<double> baselines;  // sum_a pi_e(a|x_i) q-hat(x_i, a)
  WeightVector vanilla{{}, WeightKind::vanilla};
  WeightVector marginal{{}, WeightKind::marginal};
  std::vector<double> qhat_logged_xa;   // q-hat(x_i, a_i)
  std::vector<double> qhat_logged_xae;  // q-hat(x_i, a_i, e_i)
};

struct ReplicationView {
  const Environment& env;
  const LoggedDataset& data;
  const ReplicationTerms& terms;
  std::size_t replication;
};

struct EstimatorSpec {
  std::string name;
  std::function<double(const ReplicationView&)> run;

  static EstimatorSpec standard(EstimatorKind kind) {
    EstimatorSpec spec;
    spec.name = estimator_name(kind);
    switch (kind) {
      case EstimatorKind::dm:
        spec.run = [](const ReplicationView& v) { return estimate_dm_from_terms(v.terms.baselines).value; };
        break;
      case EstimatorKind::ips:
        spec.run = [](const ReplicationView& v) { return estimate_ips_from_terms(v.data, v.terms.vanilla).value; };
        break;
      case EstimatorKind::dr:
        spec.run = [](const ReplicationView& v) {
          return estimate_dr_from_terms(v.data, v.terms.baselines, v.terms.vanilla, v.terms.qhat_logged_xa).value;
        };
        break;
      case EstimatorKind::mips:
        spec.run = [](const ReplicationView& v) { return estimate_mips(v.data, v.terms.marginal).value; };
        break;
      case EstimatorKind::mdr:
        spec.run = [](const ReplicationView& v) {
          return estimate_mdr_from_terms(v.data, v.terms.baselines, v.terms.marginal, v.terms.qhat_logged_xae).value;
        };
        break;
    }
    return spec;
  }
};

inline std::vector<EstimatorSpec> standard_estimators(const std::vector<EstimatorKind>& kinds) {
  std::vector<EstimatorSpec> specs;
  for (EstimatorKind k : kinds) specs.push_back(EstimatorSpec::standard(k));
  return specs;
}

// Where q-hat comes from in each replication: refit on that replication's
// data, or a fixed model independent of the data.
struct QhatSource {
  enum class Kind { refit, fixed };
  Kind kind = Kind::refit;
  FeatureConfig features;
  double ridge_lambda = 1.0;
  std::function<double(const Context&, ActionId)> fixed_xa;
  std::function<double(const Context&, ActionId, const EmbeddingVector&)> fixed_xae;

  static QhatSource refit(FeatureConfig features, double ridge_lambda) {
    QhatSource s;
    s.features = features;
    s.ridge_lambda = ridge_lambda;
    return s;
  }
  static QhatSource fixed(std::function<double(const Context&, ActionId)> xa,
                          std::function<double(const Context&, ActionId, const EmbeddingVector&)> xae) {
    QhatSource s;
    s.kind = Kind::fixed;
    s.fixed_xa = std::move(xa);
    s.fixed_xae = std::move(xae);
    return s;
  }
};

struct MonteCarloOptions {
  QhatSource qhat;
  VisitationExpectation truth = VisitationExpectation::pool_exact();
  // Skips the oracle when the caller already knows V(pi_e).
  std::optional<OracleValue> known_truth;
  unsigned threads = 1;
  bool keep_estimates = true;
};

struct EstimatorSummary {
  std::string name;
  std::size_t replications = 0;  // successful ones
  std::size_t failures = 0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  // Mean squared deviation from mean_estimate over successful replications
  // (divisor R, not R - 1); mse == bias^2 + variance.
  double variance = 0.0;
  double mse = 0.0;
  std::vector<double> estimates;  // NaN marks a failed replication
};

struct EvalReport {
  std::size_t n_actions = 0;
  std::size_t n_samples = 0;
  std::size_t n_replications = 0;
  double true_value = 0.0;
  double true_value_se = 0.0;
  std::vector<EstimatorSummary> estimators;

  const EstimatorSummary& at(const std::string& name) const {
    for (const auto& s : estimators) {
      if (s.name == name) return s;
    }
    throw ValidationError("report has no estimator named '" + name + "'");
  }
};

namespace detail {

// Weight terms gathered while sampling, before q-hat exists. Outside pool
// mode the evaluation rows are kept for the baseline pass.
struct SampledReplication {
  LoggedDataset data;
  ReplicationTerms terms;
  PolicyMatrix evaluation_rows;
};

inline void record_weights(const FactoredEmbeddingTable& table, std::size_t i, const LoggedSample& s,
                           std::span<const double> row_e, std::span<const double> row_b, ReplicationTerms& t) {
  if (!(s.behavior_propensity > 0.0)) throw SupportError("zero behavior propensity");
  t.vanilla.values[i] = row_e[s.action] / s.behavior_propensity;
  const double denominator = marginal_embedding_dist(row_b, table, s.embedding);
  if (!(denominator > 0.0)) throw SupportError("logged embedding outside behavior support");
  t.marginal.values[i] = marginal_embedding_dist(row_e, table, s.embedding) / denominator;
}

inline SampledReplication sample_replication(const Environment& env, std::size_t n, std::uint64_t seed) {
  SampledReplication out;
  const FactoredEmbeddingTable& table = env.embedding_table();
  out.terms.vanilla.values.resize(n);
  out.terms.marginal.values.resize(n);
  if (env.pool_mode()) {
    out.data = sample_logged_data(env, n, seed);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = out.data.context_ids[i];
      record_weights(table, i, out.data.samples[i], env.pool_evaluation().row(j), env.pool_behavior().row(j),
                     out.terms);
    }
    return out;
  }
  out.evaluation_rows = PolicyMatrix(n, env.n_actions(), PolicyKind::evaluation);
  out.data = sample_logged_data(
      env, n, seed,
      [&](std::size_t i, const LoggedSample& s, std::span<const double> q, std::span<const double> row_b) {
        std::span<double> row_e = out.evaluation_rows.mutable_row(i);
        epsilon_greedy_policy(env.config().epsilon, q, row_e);
        record_weights(table, i, s, row_e, row_b, out.terms);
      });
  return out;
}

// Fills the q-hat dependent terms: baselines and predictions at the logged points.
template <class QhatXa, class QhatXae>
void add_model_terms(const Environment& env, SampledReplication& rep, const QhatXa& qhat_xa,
                     const QhatXae& qhat_xae) {
  const LoggedDataset& data = rep.data;
  ReplicationTerms& t = rep.terms;
  const std::size_t n = data.size();
  t.baselines.resize(n);
  t.qhat_logged_xa.resize(n);
  t.qhat_logged_xae.resize(n);
  std::vector<double> pool_baseline;
  if (env.pool_mode()) {
    const std::size_t m = env.context_pool().size();
    pool_baseline.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      pool_baseline[j] = policy_expectation(env.pool_evaluation().row(j), env.context_pool()[j], qhat_xa);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const LoggedSample& s = data.samples[i];
    t.baselines[i] = env.pool_mode() ? pool_baseline[data.context_ids[i]]
                                     : policy_expectation(rep.evaluation_rows.row(i), s.x, qhat_xa);
    t.qhat_logged_xa[i] = qhat_xa(s.x, s.action);
    t.qhat_logged_xae[i] = qhat_xae(s.x, s.action, s.embedding);
  }
}

}  // namespace detail

// Per-replication estimates; NaN where an estimator failed.
inline std::vector<double> run_replication(const Environment& env, const std::vector<EstimatorSpec>& specs,
                                           std::size_t n, std::uint64_t seed, const QhatSource& qhat,
                                           std::size_t replication) {
  std::vector<double> out(specs.size(), std::numeric_limits<double>::quiet_NaN());
  try {
    detail::SampledReplication rep = detail::sample_replication(env, n, seed);
    if (qhat.kind == QhatSource::Kind::fixed) {
      detail::add_model_terms(env, rep, qhat.fixed_xa, qhat.fixed_xae);
    } else {
      const RewardModel model = fit_qhat(rep.data, qhat.features, qhat.ridge_lambda);
      const MarginalizedRewardModel marginal = marginalize_qhat(env, model);
      detail::add_model_terms(env, rep, marginal, [&model](const Context& x, ActionId a, const EmbeddingVector& e) {
        return model.predict_xae(x, a, e);
      });
    }
    rep.evaluation_rows = PolicyMatrix();
    const ReplicationView view{env, rep.data, rep.terms, replication};
    for (std::size_t s = 0; s < specs.size(); ++s) {
      try {
        const double v = specs[s].run(view);
        if (std::isfinite(v)) out[s] = v;
      } catch (const Error&) {
      }
    }
  } catch (const Error&) {
  }
  return out;
}

inline std::uint64_t replication_seed(std::uint64_t base_seed, std::size_t replication) {
  return mix_seed(base_seed, 1000003ULL + replication);
}

inline EstimatorSummary summarize(const std::string& name, const std::vector<double>& estimates, double truth,
                                  bool keep) {
  EstimatorSummary s;
  s.name = name;
  CompensatedSum sum;
  for (double v : estimates) {
    if (std::isnan(v)) {
      ++s.failures;
    } else {
      sum.add(v);
    }
  }
  s.replications = sum.count();
  if (s.replications == 0) {
    s.mean_estimate = s.bias = s.variance = s.mse = std::numeric_limits<double>::quiet_NaN();
  } else {
    s.mean_estimate = sum.mean();
    CompensatedSum spread;
    for (double v : estimates) {
      if (!std::isnan(v)) spread.add((v - s.mean_estimate) * (v - s.mean_estimate));
    }
    s.bias = s.mean_estimate - truth;
    s.variance = spread.mean();
    s.mse = s.bias * s.bias + s.variance;
  }
  if (keep) s.estimates = estimates;
  return s;
}

// Replicates (sample -> fit q-hat -> estimate) R times and scores each
// estimator against the oracle value. Replication r draws from a seed derived
// from (base_seed, r); the report is identical for any thread count.
inline EvalReport monte_carlo_eval(const Environment& env, const std::vector<EstimatorSpec>& specs, std::size_t n,
                                   std::size_t replications, std::uint64_t base_seed,
                                   const MonteCarloOptions& options = {}) {
  if (replications < 2) throw ValidationError("monte-carlo evaluation needs at least 2 replications");
  if (n == 0) throw ValidationError("n must be at least 1");
  if (specs.empty()) throw ValidationError("no estimators requested");

  EvalReport report;
  report.n_actions = env.n_actions();
  report.n_samples = n;
  report.n_replications = replications;
  const OracleValue truth = options.known_truth ? *options.known_truth : true_value(env, options.truth);
  report.true_value = truth.value;
  report.true_value_se = truth.standard_error;

  std::vector<std::vector<double>> results(replications);
  auto work = [&](std::size_t r) {
    results[r] = run_replication(env, specs, n, replication_seed(base_seed, r), options.qhat, r);
  };
  const unsigned threads = std::max(1U, options.threads);
  if (threads == 1) {
    for (std::size_t r = 0; r < replications; ++r) work(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r = next++; r < replications; r = next++) work(r);
      });
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t s = 0; s < specs.size(); ++s) {
    std::vector<double> column(replications);
    for (std::size_t r = 0; r < replications; ++r) column[r] = results[r][s];
    report.estimators.push_back(summarize(specs[s].name, column, truth.value, options.keep_estimates));
  }
  return report;
}

}  // namespace ope_lab

#endif  // OPE_LAB_MONTE_CARLO_HPP
