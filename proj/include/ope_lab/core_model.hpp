#ifndef OPE_LAB_CORE_MODEL_HPP
#define OPE_LAB_CORE_MODEL_HPP

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ope_lab/errors.hpp"

namespace ope_lab {

using Context = std::vector<double>;
using ActionId = std::size_t;
// One category index per embedding dimension.
using EmbeddingVector = std::vector<int>;

inline constexpr double kRowSumTolerance = 1e-12;

enum class PolicyKind { behavior, evaluation };

// Row-major table of pi(a|x): one row per context, one column per action.
class PolicyMatrix {
 public:
  PolicyMatrix() = default;

  PolicyMatrix(std::size_t n_rows, std::size_t n_actions, PolicyKind kind)
      : n_rows_(n_rows), n_actions_(n_actions), kind_(kind), probs_(n_rows * n_actions, 0.0) {}

  PolicyMatrix(std::size_t n_rows, std::size_t n_actions, PolicyKind kind, std::vector<double> probs)
      : n_rows_(n_rows), n_actions_(n_actions), kind_(kind), probs_(std::move(probs)) {
    if (probs_.size() != n_rows_ * n_actions_) {
      throw ShapeError("policy matrix: expected " + std::to_string(n_rows_ * n_actions_) +
                       " probabilities, got " + std::to_string(probs_.size()));
    }
    validate();
  }

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_actions() const { return n_actions_; }
  PolicyKind kind() const { return kind_; }

  std::span<const double> row(std::size_t i) const {
    return {probs_.data() + i * n_actions_, n_actions_};
  }
  std::span<double> mutable_row(std::size_t i) { return {probs_.data() + i * n_actions_, n_actions_}; }

  double operator()(std::size_t i, ActionId a) const { return probs_[i * n_actions_ + a]; }

  // Every row must be a probability vector.
  void validate() const {
    for (std::size_t i = 0; i < n_rows_; ++i) {
      double total = 0.0;
      for (double p : row(i)) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
          throw ValidationError("policy row " + std::to_string(i) + " has a negative or non-finite entry");
        }
        total += p;
      }
      if (std::abs(total - 1.0) > kRowSumTolerance) {
        throw ValidationError("policy row " + std::to_string(i) + " sums to " + std::to_string(total));
      }
    }
  }

 private:
  std::size_t n_rows_ = 0;
  std::size_t n_actions_ = 0;
  PolicyKind kind_ = PolicyKind::behavior;
  std::vector<double> probs_;
};

// Anything that hands out per-sample policy rows.
template <class P>
concept PolicyRows = requires(const P& p, std::size_t i) {
  { p.n_rows() } -> std::convertible_to<std::size_t>;
  { p.n_actions() } -> std::convertible_to<std::size_t>;
  { p.row(i) } -> std::convertible_to<std::span<const double>>;
};

// Per-sample view onto a smaller table of distinct contexts (pool mode).
class IndexedPolicyRows {
 public:
  IndexedPolicyRows(const PolicyMatrix& table, std::span<const std::size_t> index)
      : table_(&table), index_(index) {}

  std::size_t n_rows() const { return index_.size(); }
  std::size_t n_actions() const { return table_->n_actions(); }
  std::span<const double> row(std::size_t i) const { return table_->row(index_[i]); }

 private:
  const PolicyMatrix* table_;
  std::span<const std::size_t> index_;
};

// Factored categorical p(e|x,a) = prod_k p(e_k|x,a) at a fixed context.
// Probabilities are stored per action, dimension-major with offsets.
class FactoredEmbeddingTable {
 public:
  FactoredEmbeddingTable() = default;

  FactoredEmbeddingTable(std::size_t n_actions, std::vector<int> cardinalities)
      : n_actions_(n_actions), cardinalities_(std::move(cardinalities)) {
    offsets_.resize(cardinalities_.size());
    std::size_t offset = 0;
    for (std::size_t k = 0; k < cardinalities_.size(); ++k) {
      if (cardinalities_[k] < 1) throw ValidationError("embedding cardinality must be positive");
      offsets_[k] = offset;
      offset += static_cast<std::size_t>(cardinalities_[k]);
    }
    stride_ = offset;
    probs_.assign(n_actions_ * stride_, 0.0);
  }

  std::size_t n_actions() const { return n_actions_; }
  std::size_t n_dims() const { return cardinalities_.size(); }
  const std::vector<int>& cardinalities() const { return cardinalities_; }
  // Number of (dimension, category) cells per action.
  std::size_t stride() const { return stride_; }
  std::size_t offset(std::size_t k) const { return offsets_[k]; }

  double prob(ActionId a, std::size_t k, int c) const { return probs_[a * stride_ + offsets_[k] + c]; }
  double& prob(ActionId a, std::size_t k, int c) { return probs_[a * stride_ + offsets_[k] + c]; }

  std::span<const double> dim_probs(ActionId a, std::size_t k) const {
    return {probs_.data() + a * stride_ + offsets_[k], static_cast<std::size_t>(cardinalities_[k])};
  }

  // prod_k p(e_k | a)
  double joint_prob(ActionId a, const EmbeddingVector& e) const {
    const double* base = probs_.data() + a * stride_;
    double p = 1.0;
    for (std::size_t k = 0; k < offsets_.size(); ++k) p *= base[offsets_[k] + e[k]];
    return p;
  }

  void check_embedding(const EmbeddingVector& e) const {
    if (e.size() != cardinalities_.size()) {
      throw ShapeError("embedding has " + std::to_string(e.size()) + " dimensions, expected " +
                       std::to_string(cardinalities_.size()));
    }
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (e[k] < 0 || e[k] >= cardinalities_[k]) {
        throw ShapeError("embedding component " + std::to_string(k) + " out of range");
      }
    }
  }

 private:
  std::size_t n_actions_ = 0;
  std::vector<int> cardinalities_;
  std::vector<std::size_t> offsets_;
  std::size_t stride_ = 0;
  std::vector<double> probs_;
};

// Supplies p(e|x,a) as a factored table for any context.
template <class M>
concept EmbeddingModel = requires(const M& m, const Context& x) {
  { m.embedding_table(x) } -> std::convertible_to<const FactoredEmbeddingTable&>;
};

// Size of prod_k E_k, saturating at max+1 so callers can compare against caps.
inline std::uint64_t embedding_space_size(const std::vector<int>& cardinalities,
                                          std::uint64_t saturate_at = UINT64_MAX / 2) {
  std::uint64_t size = 1;
  for (int c : cardinalities) {
    size *= static_cast<std::uint64_t>(c);
    if (size > saturate_at) return saturate_at + 1;
  }
  return size;
}

// Visits every embedding vector of the product space in lexicographic order.
template <class Fn>
void for_each_embedding(const std::vector<int>& cardinalities, std::uint64_t cap, Fn&& fn) {
  const std::uint64_t size = embedding_space_size(cardinalities, cap);
  if (size > cap) {
    throw CapacityError("embedding space exceeds enumeration cap of " + std::to_string(cap));
  }
  EmbeddingVector e(cardinalities.size(), 0);
  for (std::uint64_t idx = 0; idx < size; ++idx) {
    fn(static_cast<const EmbeddingVector&>(e));
    for (std::size_t k = e.size(); k-- > 0;) {
      if (++e[k] < cardinalities[k]) break;
      e[k] = 0;
    }
  }
}

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

// p(e|x,pi) = sum_a pi(a|x) prod_k p(e_k|x,a)
inline double marginal_embedding_dist(std::span<const double> policy_row, const FactoredEmbeddingTable& table,
                                      const EmbeddingVector& e) {
  if (policy_row.size() != table.n_actions()) {
    throw ShapeError("policy row has " + std::to_string(policy_row.size()) + " actions, embedding table has " +
                     std::to_string(table.n_actions()));
  }
  table.check_embedding(e);
  double total = 0.0;
  for (ActionId a = 0; a < policy_row.size(); ++a) {
    if (policy_row[a] == 0.0) continue;
    total += policy_row[a] * table.joint_prob(a, e);
  }
  return total;
}

struct SupportViolation {
  std::size_t context_index;
  std::size_t action;  // an action for common support, a flat embedding index otherwise
  bool operator==(const SupportViolation&) const = default;
};

struct SupportReport {
  bool holds = true;
  std::vector<SupportViolation> violations;
};

// pi_e(a|x) > 0 must imply pi_b(a|x) > 0 for every row and action.
inline SupportReport check_common_support(const PolicyMatrix& pi_e, const PolicyMatrix& pi_b) {
  if (pi_e.n_rows() != pi_b.n_rows() || pi_e.n_actions() != pi_b.n_actions()) {
    throw ShapeError("common support check needs policies over the same contexts and actions");
  }
  SupportReport report;
  for (std::size_t i = 0; i < pi_e.n_rows(); ++i) {
    for (ActionId a = 0; a < pi_e.n_actions(); ++a) {
      if (pi_e(i, a) > 0.0 && !(pi_b(i, a) > 0.0)) report.violations.push_back({i, a});
    }
  }
  report.holds = report.violations.empty();
  return report;
}

// Row i of each policy belongs to context_pool[i]. Violations carry the
// lexicographic index of the offending embedding in the product space.
template <EmbeddingModel Model>
SupportReport check_common_embedding_support(const Model& model, const PolicyMatrix& pi_e, const PolicyMatrix& pi_b,
                                             const std::vector<Context>& context_pool,
                                             std::uint64_t cap = kDefaultEnumerationCap) {
  if (pi_e.n_rows() != context_pool.size() || pi_b.n_rows() != context_pool.size() ||
      pi_e.n_actions() != pi_b.n_actions()) {
    throw ShapeError("embedding support check needs one policy row per pooled context");
  }
  SupportReport report;
  for (std::size_t i = 0; i < context_pool.size(); ++i) {
    const FactoredEmbeddingTable& table = model.embedding_table(context_pool[i]);
    std::size_t flat = 0;
    for_each_embedding(table.cardinalities(), cap, [&](const EmbeddingVector& e) {
      const double pe = marginal_embedding_dist(pi_e.row(i), table, e);
      const double pb = marginal_embedding_dist(pi_b.row(i), table, e);
      if (pe > 0.0 && !(pb > 0.0)) report.violations.push_back({i, flat});
      ++flat;
    });
  }
  report.holds = report.violations.empty();
  return report;
}

struct LoggedSample {
  Context x;
  ActionId action = 0;
  EmbeddingVector embedding;
  double reward = 0.0;
  double behavior_propensity = 0.0;
};

struct DatasetMeta {
  std::size_t n = 0;
  std::size_t n_actions = 0;
  std::size_t d_x = 0;
  std::size_t d_e = 0;
  std::vector<int> cardinalities;
  std::uint64_t seed = 0;

  bool operator==(const DatasetMeta&) const = default;
};

struct LoggedDataset {
  DatasetMeta meta;
  std::vector<LoggedSample> samples;
  // Pool index of each sample's context; empty outside pool mode. Not serialized.
  std::vector<std::size_t> context_ids;

  std::size_t size() const { return samples.size(); }

  void validate() const {
    if (meta.n != samples.size()) {
      throw ShapeError("dataset meta says n=" + std::to_string(meta.n) + " but holds " +
                       std::to_string(samples.size()) + " samples");
    }
    if (meta.cardinalities.size() != meta.d_e) throw ShapeError("dataset meta cardinalities do not match d_e");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const LoggedSample& s = samples[i];
      const std::string where = "sample " + std::to_string(i);
      if (s.x.size() != meta.d_x) throw ShapeError(where + ": context dimension mismatch");
      if (s.action >= meta.n_actions) throw ShapeError(where + ": action out of range");
      if (s.embedding.size() != meta.d_e) throw ShapeError(where + ": embedding dimension mismatch");
      for (std::size_t k = 0; k < meta.d_e; ++k) {
        if (s.embedding[k] < 0 || s.embedding[k] >= meta.cardinalities[k]) {
          throw ShapeError(where + ": embedding category out of range");
        }
      }
      for (double v : s.x) {
        if (!std::isfinite(v)) throw ValidationError(where + ": non-finite context");
      }
      if (!std::isfinite(s.reward)) throw ValidationError(where + ": non-finite reward");
      if (!(s.behavior_propensity > 0.0) || s.behavior_propensity > 1.0) {
        throw SupportError(where + ": behavior propensity must lie in (0, 1]");
      }
    }
    if (!context_ids.empty() && context_ids.size() != samples.size()) {
      throw ShapeError("context_ids must be empty or one per sample");
    }
  }
};

}  // namespace ope_lab

#endif  // OPE_LAB_CORE_MODEL_HPP
