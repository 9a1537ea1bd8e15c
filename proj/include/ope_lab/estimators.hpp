#ifndef OPE_LAB_ESTIMATORS_HPP
#define OPE_LAB_ESTIMATORS_HPP

#include <cmath>
#include <string>
#include <vector>

#include "ope_lab/core_model.hpp"
#include "ope_lab/errors.hpp"
#include "ope_lab/summation.hpp"

namespace ope_lab {

enum class WeightKind { vanilla, marginal };

// Per-sample importance weights: pi_e(a|x)/pi_b(a|x) or p(e|x,pi_e)/p(e|x,pi_b).
struct WeightVector {
  std::vector<double> values;
  WeightKind kind = WeightKind::vanilla;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

struct Estimate {
  std::string name;
  double value = 0.0;
  std::size_t n = 0;
};

namespace detail {

template <PolicyRows Rows>
void check_alignment(const LoggedDataset& data, const Rows& pi) {
  if (pi.n_rows() != data.size()) {
    throw ShapeError("policy has " + std::to_string(pi.n_rows()) + " rows for " + std::to_string(data.size()) +
                     " samples");
  }
  if (pi.n_actions() != data.meta.n_actions) throw ShapeError("policy and dataset disagree on |A|");
  if (data.samples.empty()) throw ValidationError("cannot estimate from an empty dataset");
}

inline void check_weights(const LoggedDataset& data, const WeightVector& w, WeightKind kind) {
  if (w.size() != data.size()) {
    throw ShapeError("weight vector has " + std::to_string(w.size()) + " entries for " +
                     std::to_string(data.size()) + " samples");
  }
  if (w.kind != kind) throw ValidationError("estimator received the wrong kind of importance weights");
  if (data.samples.empty()) throw ValidationError("cannot estimate from an empty dataset");
}

// sum_a pi_e(a|x) q-hat(x, a)
template <class QhatXa>
double policy_expectation(std::span<const double> pi_row, const Context& x, const QhatXa& qhat_xa) {
  if constexpr (requires { qhat_xa.policy_expectation(pi_row, x); }) {
    return qhat_xa.policy_expectation(pi_row, x);
  }
  double v = 0.0;
  for (ActionId a = 0; a < pi_row.size(); ++a) {
    if (pi_row[a] != 0.0) v += pi_row[a] * qhat_xa(x, a);
  }
  return v;
}

}  // namespace detail

template <PolicyRows Rows>
WeightVector vanilla_weights(const LoggedDataset& data, const Rows& pi_e) {
  detail::check_alignment(data, pi_e);
  WeightVector w{std::vector<double>(data.size()), WeightKind::vanilla};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const LoggedSample& s = data.samples[i];
    if (!(s.behavior_propensity > 0.0)) {
      throw SupportError("sample " + std::to_string(i) + " has zero behavior propensity");
    }
    w.values[i] = pi_e.row(i)[s.action] / s.behavior_propensity;
  }
  return w;
}

// Direct method: mean over samples of sum_a pi_e(a|x_i) q-hat(x_i, a).
template <PolicyRows Rows, class QhatXa>
Estimate estimate_dm(const LoggedDataset& data, const Rows& pi_e, const QhatXa& qhat_xa) {
  detail::check_alignment(data, pi_e);
  CompensatedSum acc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    acc.add(detail::policy_expectation(pi_e.row(i), data.samples[i].x, qhat_xa));
  }
  return {"DM", acc.mean(), data.size()};
}

template <PolicyRows Rows>
Estimate estimate_ips(const LoggedDataset& data, const Rows& pi_e) {
  const WeightVector w = vanilla_weights(data, pi_e);
  CompensatedSum acc;
  for (std::size_t i = 0; i < data.size(); ++i) acc.add(w[i] * data.samples[i].reward);
  return {"IPS", acc.mean(), data.size()};
}

template <PolicyRows Rows, class QhatXa>
Estimate estimate_dr(const LoggedDataset& data, const Rows& pi_e, const QhatXa& qhat_xa) {
  const WeightVector w = vanilla_weights(data, pi_e);
  CompensatedSum acc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const LoggedSample& s = data.samples[i];
    const double baseline = detail::policy_expectation(pi_e.row(i), s.x, qhat_xa);
    acc.add(baseline + w[i] * (s.reward - qhat_xa(s.x, s.action)));
  }
  return {"DR", acc.mean(), data.size()};
}

// w(x_i, e_i) = p(e_i|x_i, pi_e) / p(e_i|x_i, pi_b) from the exact embedding model.
template <EmbeddingModel Model, PolicyRows RowsE, PolicyRows RowsB>
WeightVector compute_marginal_weights(const Model& model, const RowsE& pi_e, const RowsB& pi_b,
                                      const LoggedDataset& data) {
  detail::check_alignment(data, pi_e);
  detail::check_alignment(data, pi_b);
  WeightVector w{std::vector<double>(data.size()), WeightKind::marginal};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const LoggedSample& s = data.samples[i];
    const FactoredEmbeddingTable& table = model.embedding_table(s.x);
    const double numerator = marginal_embedding_dist(pi_e.row(i), table, s.embedding);
    const double denominator = marginal_embedding_dist(pi_b.row(i), table, s.embedding);
    if (!(denominator > 0.0)) {
      throw SupportError("sample " + std::to_string(i) +
                         ": logged embedding has zero probability under the behavior policy");
    }
    w.values[i] = numerator / denominator;
  }
  return w;
}

inline Estimate estimate_mips(const LoggedDataset& data, const WeightVector& weights) {
  detail::check_weights(data, weights, WeightKind::marginal);
  CompensatedSum acc;
  for (std::size_t i = 0; i < data.size(); ++i) acc.add(weights[i] * data.samples[i].reward);
  return {"MIPS", acc.mean(), data.size()};
}

// Marginalized doubly robust: DM baseline plus marginal-weighted residuals of q-hat(x, a, e).
template <PolicyRows Rows, class QhatXa, class QhatXae>
Estimate estimate_mdr(const LoggedDataset& data, const Rows& pi_e, const QhatXa& qhat_xa, const QhatXae& qhat_xae,
                      const WeightVector& weights) {
  detail::check_alignment(data, pi_e);
  detail::check_weights(data, weights, WeightKind::marginal);
  CompensatedSum acc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const LoggedSample& s = data.samples[i];
    const double baseline = detail::policy_expectation(pi_e.row(i), s.x, qhat_xa);
    acc.add(baseline + weights[i] * (s.reward - qhat_xae(s.x, s.action, s.embedding)));
  }
  return {"MDR", acc.mean(), data.size()};
}

// Variants over precomputed per-sample terms. baselines[i] is
// sum_a pi_e(a|x_i) q-hat(x_i, a); qhat_logged[i] is the model's prediction at
// the logged action (and embedding, for MDR). Used when several estimators
// share one pass over the policies.
inline Estimate estimate_dm_from_terms(std::span<const double> baselines) {
  if (baselines.empty()) throw ValidationError("cannot estimate from an empty dataset");
  CompensatedSum acc;
  for (double b : baselines) acc.add(b);
  return {"DM", acc.mean(), baselines.size()};
}

inline Estimate estimate_ips_from_terms(const LoggedDataset& data, const WeightVector& vanilla) {
  detail::check_weights(data, vanilla, WeightKind::vanilla);
  CompensatedSum acc;
  for (std::size_t i = 0; i < data.size(); ++i) acc.add(vanilla[i] * data.samples[i].reward);
  return {"IPS", acc.mean(), data.size()};
}

inline Estimate estimate_dr_from_terms(const LoggedDataset& data, std::span<const double> baselines,
                                       const WeightVector& vanilla, std::span<const double> qhat_logged) {
  detail::check_weights(data, vanilla, WeightKind::vanilla);
  if (baselines.size() != data.size() || qhat_logged.size() != data.size()) {
    throw ShapeError("per-sample terms do not match the dataset");
  }
  CompensatedSum acc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    acc.add(baselines[i] + vanilla[i] * (data.samples[i].reward - qhat_logged[i]));
  }
  return {"DR", acc.mean(), data.size()};
}

inline Estimate estimate_mdr_from_terms(const LoggedDataset& data, std::span<const double> baselines,
                                        const WeightVector& marginal, std::span<const double> qhat_logged) {
  detail::check_weights(data, marginal, WeightKind::marginal);
  if (baselines.size() != data.size() || qhat_logged.size() != data.size()) {
    throw ShapeError("per-sample terms do not match the dataset");
  }
  CompensatedSum acc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    acc.add(baselines[i] + marginal[i] * (data.samples[i].reward - qhat_logged[i]));
  }
  return {"MDR", acc.mean(), data.size()};
}

// Adapts a model with predict_xae into an (x, a, e) callable.
template <class Model>
auto as_xae(const Model& model) {
  return [&model](const Context& x, ActionId a, const EmbeddingVector& e) { return model.predict_xae(x, a, e); };
}

}  // namespace ope_lab

#endif  // OPE_LAB_ESTIMATORS_HPP
