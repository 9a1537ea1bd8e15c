#ifndef OPE_LAB_REWARD_MODEL_HPP
#define OPE_LAB_REWARD_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "ope_lab/core_model.hpp"
#include "ope_lab/errors.hpp"
#include "ope_lab/synthetic_env.hpp"

namespace ope_lab {

struct FeatureConfig {
  // Adds one indicator column per action.
  bool action_onehot = false;

  bool operator==(const FeatureConfig&) const = default;
};

// Linear model over phi(x, a, e) = [1, x, one-hot(e_1), ..., one-hot(e_K), one-hot(a)?].
class RewardModel {
 public:
  RewardModel() = default;

  RewardModel(std::size_t d_x, std::vector<int> cardinalities, std::size_t n_actions, FeatureConfig features,
              double ridge_lambda, std::vector<double> weights)
      : d_x_(d_x),
        cardinalities_(std::move(cardinalities)),
        n_actions_(n_actions),
        features_(features),
        ridge_lambda_(ridge_lambda),
        weights_(std::move(weights)) {
    embedding_offset_ = 1 + d_x_;
    std::size_t total = embedding_offset_;
    dim_offsets_.clear();
    for (int c : cardinalities_) {
      dim_offsets_.push_back(total);
      total += static_cast<std::size_t>(c);
    }
    action_offset_ = total;
    if (features_.action_onehot) total += n_actions_;
    if (weights_.size() != total) {
      throw ShapeError("reward model expects " + std::to_string(total) + " weights, got " +
                       std::to_string(weights_.size()));
    }
  }

  static std::size_t feature_count(std::size_t d_x, const std::vector<int>& cardinalities, std::size_t n_actions,
                                   FeatureConfig features) {
    std::size_t total = 1 + d_x;
    for (int c : cardinalities) total += static_cast<std::size_t>(c);
    if (features.action_onehot) total += n_actions;
    return total;
  }

  std::size_t d_x() const { return d_x_; }
  const std::vector<int>& cardinalities() const { return cardinalities_; }
  std::size_t n_actions() const { return n_actions_; }
  const FeatureConfig& features() const { return features_; }
  double ridge_lambda() const { return ridge_lambda_; }
  const std::vector<double>& weights() const { return weights_; }

  double intercept() const { return weights_[0]; }
  double context_weight(std::size_t j) const { return weights_[1 + j]; }
  double embedding_weight(std::size_t k, int c) const { return weights_[dim_offsets_[k] + c]; }
  double action_weight(ActionId a) const { return features_.action_onehot ? weights_[action_offset_ + a] : 0.0; }

  double context_part(const Context& x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < d_x_; ++j) v += weights_[1 + j] * x[j];
    return v;
  }

  double predict_xae(const Context& x, ActionId a, const EmbeddingVector& e) const {
    double v = intercept() + context_part(x) + action_weight(a);
    for (std::size_t k = 0; k < e.size(); ++k) v += embedding_weight(k, e[k]);
    return v;
  }

  // The feature map never crosses embedding dimensions.
  bool additive_in_embedding() const { return true; }

  // Sparse feature row as (column, value) pairs.
  void feature_row(const Context& x, ActionId a, const EmbeddingVector& e,
                   std::vector<std::pair<std::size_t, double>>& out) const {
    out.clear();
    out.emplace_back(0, 1.0);
    for (std::size_t j = 0; j < d_x_; ++j) out.emplace_back(1 + j, x[j]);
    for (std::size_t k = 0; k < e.size(); ++k) out.emplace_back(dim_offsets_[k] + static_cast<std::size_t>(e[k]), 1.0);
    if (features_.action_onehot) out.emplace_back(action_offset_ + a, 1.0);
  }

 private:
  std::size_t d_x_ = 0;
  std::vector<int> cardinalities_;
  std::size_t n_actions_ = 0;
  FeatureConfig features_;
  double ridge_lambda_ = 0.0;
  std::vector<double> weights_;
  std::size_t embedding_offset_ = 0;
  std::vector<std::size_t> dim_offsets_;
  std::size_t action_offset_ = 0;
};

// Ridge least squares on phi(x, a, e) -> r. The intercept is not penalized.
inline RewardModel fit_qhat(const LoggedDataset& data, FeatureConfig features, double ridge_lambda) {
  if (!(ridge_lambda >= 0.0) || !std::isfinite(ridge_lambda)) {
    throw ValidationError("ridge_lambda must be finite and non-negative");
  }
  if (data.samples.empty()) throw ValidationError("cannot fit a reward model on an empty dataset");
  const DatasetMeta& meta = data.meta;
  const std::size_t n_features = RewardModel::feature_count(meta.d_x, meta.cardinalities, meta.n_actions, features);
  // Layout-only model used to build feature rows.
  const RewardModel layout(meta.d_x, meta.cardinalities, meta.n_actions, features,
                           ridge_lambda, std::vector<double>(n_features, 0.0));

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_features),
                                               static_cast<Eigen::Index>(n_features));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_features));
  std::vector<std::pair<std::size_t, double>> row;
  for (const LoggedSample& s : data.samples) {
    layout.feature_row(s.x, s.action, s.embedding, row);
    for (const auto& [i, vi] : row) {
      rhs[static_cast<Eigen::Index>(i)] += vi * s.reward;
      for (const auto& [j, vj] : row) {
        if (j <= i) gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) += vi * vj;
      }
    }
  }
  for (Eigen::Index i = 1; i < gram.rows(); ++i) gram(i, i) += ridge_lambda;

  // Only the lower triangle was accumulated.
  const Eigen::LLT<Eigen::MatrixXd, Eigen::Lower> llt(gram);
  if (llt.info() != Eigen::Success || (ridge_lambda == 0.0 && llt.rcond() < 1e-13)) {
    throw NumericalError("reward model normal equations are singular; use a positive ridge penalty");
  }
  const Eigen::VectorXd w = llt.solve(rhs);
  if (!w.allFinite()) throw NumericalError("reward model solve produced non-finite weights");
  return RewardModel(meta.d_x, meta.cardinalities, meta.n_actions, features, ridge_lambda,
                     std::vector<double>(w.data(), w.data() + w.size()));
}

// q-hat(x, a) = w0 + w_x . x + w_a + sum_k sum_c p(c|a) w_{k,c}; exact for the linear model.
class MarginalizedRewardModel {
 public:
  MarginalizedRewardModel(const Environment& env, const RewardModel& model) : model_(model) {
    if (model.n_actions() != env.n_actions() || model.cardinalities() != env.cardinalities() ||
        model.d_x() != env.d_x()) {
      throw ShapeError("reward model was fitted for a different environment shape");
    }
    const FactoredEmbeddingTable& table = env.embedding_table();
    action_constant_.assign(env.n_actions(), 0.0);
    for (ActionId a = 0; a < env.n_actions(); ++a) {
      double v = model.intercept() + model.action_weight(a);
      for (std::size_t k = 0; k < env.d_e(); ++k) {
        for (int c = 0; c < env.cardinalities()[k]; ++c) v += table.prob(a, k, c) * model.embedding_weight(k, c);
      }
      action_constant_[a] = v;
    }
  }

  double operator()(const Context& x, ActionId a) const { return model_.context_part(x) + action_constant_[a]; }

  // sum_a pi(a) q-hat(x, a) with the context term hoisted out of the sum.
  double policy_expectation(std::span<const double> pi_row, const Context& x) const {
    double v = 0.0;
    double mass = 0.0;
    for (ActionId a = 0; a < pi_row.size(); ++a) {
      v += pi_row[a] * action_constant_[a];
      mass += pi_row[a];
    }
    return v + mass * model_.context_part(x);
  }

 private:
  RewardModel model_;
  std::vector<double> action_constant_;
};

// A reward predictor backed by any callable (x, a, e) -> real.
template <class Fn>
class FunctionRewardModel {
 public:
  FunctionRewardModel(Fn fn, bool additive) : fn_(std::move(fn)), additive_(additive) {}

  double predict_xae(const Context& x, ActionId a, const EmbeddingVector& e) const { return fn_(x, a, e); }
  bool additive_in_embedding() const { return additive_; }

 private:
  Fn fn_;
  bool additive_;
};

template <class M>
concept RewardPredictor = requires(const M& m, const Context& x, ActionId a, const EmbeddingVector& e) {
  { m.predict_xae(x, a, e) } -> std::convertible_to<double>;
  { m.additive_in_embedding() } -> std::convertible_to<bool>;
};

// Marginalizes an arbitrary predictor over p(e|a). Additive predictors need
// only one evaluation per (dimension, category); others enumerate prod_k E_k.
template <RewardPredictor Model>
class MarginalizedPredictor {
 public:
  MarginalizedPredictor(const Environment& env, Model model, std::uint64_t cap)
      : env_(&env), model_(std::move(model)), additive_(model_.additive_in_embedding()) {
    if (!additive_ && embedding_space_size(env.cardinalities(), cap) > cap) {
      throw CapacityError("non-additive reward model over an embedding space above the enumeration cap");
    }
  }

  double operator()(const Context& x, ActionId a) const {
    const FactoredEmbeddingTable& table = env_->embedding_table(x);
    const std::vector<int>& cards = table.cardinalities();
    if (additive_) {
      EmbeddingVector e(cards.size(), 0);
      const double anchor = model_.predict_xae(x, a, e);
      double v = anchor;
      for (std::size_t k = 0; k < cards.size(); ++k) {
        for (int c = 1; c < cards[k]; ++c) {
          e[k] = c;
          v += table.prob(a, k, c) * (model_.predict_xae(x, a, e) - anchor);
        }
        e[k] = 0;
      }
      return v;
    }
    double v = 0.0;
    for_each_embedding(cards, UINT64_MAX / 4,
                       [&](const EmbeddingVector& e) { v += table.joint_prob(a, e) * model_.predict_xae(x, a, e); });
    return v;
  }

 private:
  const Environment* env_;
  Model model_;
  bool additive_;
};

inline MarginalizedRewardModel marginalize_qhat(const Environment& env, const RewardModel& model) {
  return MarginalizedRewardModel(env, model);
}

template <RewardPredictor Model>
MarginalizedPredictor<Model> marginalize_qhat(const Environment& env, Model model,
                                              std::uint64_t cap = kDefaultEnumerationCap) {
  return MarginalizedPredictor<Model>(env, std::move(model), cap);
}

inline nlohmann::json reward_model_to_json(const RewardModel& m) {
  return {{"d_x", m.d_x()},
          {"cardinalities", m.cardinalities()},
          {"n_actions", m.n_actions()},
          {"action_onehot", m.features().action_onehot},
          {"ridge_lambda", m.ridge_lambda()},
          {"weights", m.weights()}};
}

inline RewardModel reward_model_from_json(const nlohmann::json& j) {
  try {
    return RewardModel(j.at("d_x").get<std::size_t>(), j.at("cardinalities").get<std::vector<int>>(),
                       j.at("n_actions").get<std::size_t>(), FeatureConfig{j.at("action_onehot").get<bool>()},
                       j.at("ridge_lambda").get<double>(), j.at("weights").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("reward model json: ") + e.what());
  }
}

}  // namespace ope_lab

#endif  // OPE_LAB_REWARD_MODEL_HPP
