#ifndef OPE_LAB_SYNTHETIC_ENV_HPP
#define OPE_LAB_SYNTHETIC_ENV_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ope_lab/core_model.hpp"
#include "ope_lab/errors.hpp"

namespace ope_lab {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t s = mix_seed(seed, stream);
  std::seed_seq seq{static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(s >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

enum class PoolSampling {
  uniform,  // x drawn uniformly from the pool
  cycle,    // x_i = pool[i mod m]; covers the pool evenly
};

struct EnvConfig {
  std::size_t n_actions = 10;
  std::size_t d_x = 10;
  std::size_t d_e = 3;
  // Per-dimension cardinalities; empty means 10 for every dimension.
  std::vector<int> cardinalities;
  // Inverse temperature of the logging softmax.
  double beta = 1.0;
  double epsilon = 0.05;
  double reward_noise_sd = 1.0;
  // Strength of the action's direct effect on reward; 0 keeps the embedding a full mediator.
  double direct_effect_strength = 0.0;
  // 0 draws contexts from N(0, I); m > 0 fixes a pool of m contexts.
  std::size_t pool_size = 0;
  PoolSampling pool_sampling = PoolSampling::uniform;

  std::vector<int> resolved_cardinalities() const {
    return cardinalities.empty() ? std::vector<int>(d_e, 10) : cardinalities;
  }

  void validate() const {
    if (n_actions < 2) throw ValidationError("n_actions must be at least 2");
    if (d_x < 1) throw ValidationError("d_x must be at least 1");
    if (d_e < 1) throw ValidationError("d_e must be at least 1");
    if (!cardinalities.empty() && cardinalities.size() != d_e) {
      throw ValidationError("cardinalities must list one value per embedding dimension");
    }
    for (int c : resolved_cardinalities()) {
      if (c < 2) throw ValidationError("embedding cardinalities must be at least 2");
    }
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ValidationError("epsilon must lie in [0, 1]");
    if (!std::isfinite(beta)) throw ValidationError("beta must be finite");
    if (!(reward_noise_sd >= 0.0) || !std::isfinite(reward_noise_sd)) {
      throw ValidationError("reward_noise_sd must be finite and non-negative");
    }
    if (!(direct_effect_strength >= 0.0) || !std::isfinite(direct_effect_strength)) {
      throw ValidationError("direct_effect_strength must be finite and non-negative");
    }
  }

  bool operator==(const EnvConfig&) const = default;
};

// Raw random parameters of the data-generating process.
struct EnvParameters {
  std::vector<double> alpha;  // [a][k][c], FactoredEmbeddingTable layout
  std::vector<double> M;      // d_x * d_x, row-major
  std::vector<double> theta_x;
  std::vector<double> theta_e;
  std::vector<double> eta;               // simplex over embedding dimensions
  std::vector<double> category_vectors;  // [k][c][d_x], offsets as in the embedding table
  std::vector<Context> context_pool;

  bool operator==(const EnvParameters&) const = default;
};

class Environment {
 public:
  Environment(EnvConfig config, EnvParameters params, std::uint64_t seed)
      : config_(std::move(config)), params_(std::move(params)), seed_(seed) {
    config_.validate();
    config_.cardinalities = config_.resolved_cardinalities();
    check_shapes();
    build_caches();
  }

  const EnvConfig& config() const { return config_; }
  const EnvParameters& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t n_actions() const { return config_.n_actions; }
  std::size_t d_x() const { return config_.d_x; }
  std::size_t d_e() const { return config_.d_e; }
  const std::vector<int>& cardinalities() const { return config_.cardinalities; }
  bool pool_mode() const { return !params_.context_pool.empty(); }
  const std::vector<Context>& context_pool() const { return params_.context_pool; }

  // p(e|x,a) does not depend on x in this process.
  const FactoredEmbeddingTable& embedding_table(const Context& /*x*/) const { return embed_; }
  const FactoredEmbeddingTable& embedding_table() const { return embed_; }

  // Column offset of (dimension k, category c) within an action's stride.
  std::size_t cell(std::size_t k, int c) const { return embed_.offset(k) + static_cast<std::size_t>(c); }

  // M x_{k,c}, the bilinear term's projection of a category vector.
  std::span<const double> projected_category(std::size_t k, int c) const {
    return {projected_.data() + cell(k, c) * config_.d_x, config_.d_x};
  }
  std::span<const double> category_vector(std::size_t k, int c) const {
    return {params_.category_vectors.data() + cell(k, c) * config_.d_x, config_.d_x};
  }
  double theta_e_dot_category(std::size_t k, int c) const { return theta_e_dot_[cell(k, c)]; }

  // Unit-variance, zero-mean action profile used by the direct effect.
  double direct_effect_profile(ActionId a) const { return direct_profile_[a]; }

  // q(x, a) for every action through the cached affine form slope_a . x + intercept_a.
  void expected_rewards_all(const Context& x, std::span<double> out) const {
    const std::size_t dx = config_.d_x;
    for (ActionId a = 0; a < config_.n_actions; ++a) {
      const double* s = slopes_.data() + a * dx;
      double v = intercepts_[a];
      for (std::size_t j = 0; j < dx; ++j) v += s[j] * x[j];
      out[a] = v;
    }
  }

  // Pool mode caches, one row per pooled context.
  const std::vector<double>& pool_rewards() const { return pool_q_; }
  const PolicyMatrix& pool_behavior() const { return pool_pi_b_; }
  const PolicyMatrix& pool_evaluation() const { return pool_pi_e_; }

 private:
  void check_shapes() const {
    const std::size_t dx = config_.d_x;
    FactoredEmbeddingTable layout(config_.n_actions, config_.cardinalities);
    const std::size_t stride = layout.stride();
    auto expect = [](std::size_t got, std::size_t want, const char* what) {
      if (got != want) {
        throw ShapeError(std::string("environment parameter ") + what + " has " + std::to_string(got) +
                         " entries, expected " + std::to_string(want));
      }
    };
    expect(params_.alpha.size(), config_.n_actions * stride, "alpha");
    expect(params_.M.size(), dx * dx, "M");
    expect(params_.theta_x.size(), dx, "theta_x");
    expect(params_.theta_e.size(), dx, "theta_e");
    expect(params_.eta.size(), config_.d_e, "eta");
    expect(params_.category_vectors.size(), stride * dx, "category_vectors");
    if (config_.pool_size != 0) expect(params_.context_pool.size(), config_.pool_size, "context_pool");
    for (const Context& x : params_.context_pool) expect(x.size(), dx, "pooled context");
    double eta_sum = 0.0;
    for (double e : params_.eta) {
      if (!(e >= 0.0)) throw ValidationError("eta must be non-negative");
      eta_sum += e;
    }
    if (std::abs(eta_sum - 1.0) > 1e-12) throw ValidationError("eta must sum to 1");
  }

  void build_caches() {
    const std::size_t dx = config_.d_x;
    const std::size_t n_actions = config_.n_actions;
    embed_ = FactoredEmbeddingTable(n_actions, config_.cardinalities);
    const std::size_t stride = embed_.stride();

    // Per-dimension softmax over alpha with max subtraction.
    for (ActionId a = 0; a < n_actions; ++a) {
      for (std::size_t k = 0; k < config_.d_e; ++k) {
        const int card = config_.cardinalities[k];
        const double* row = params_.alpha.data() + a * stride + embed_.offset(k);
        const double peak = *std::max_element(row, row + card);
        double total = 0.0;
        for (int c = 0; c < card; ++c) total += std::exp(row[c] - peak);
        for (int c = 0; c < card; ++c) embed_.prob(a, k, c) = std::exp(row[c] - peak) / total;
      }
    }

    projected_.assign(stride * dx, 0.0);
    theta_e_dot_.assign(stride, 0.0);
    for (std::size_t cell_idx = 0; cell_idx < stride; ++cell_idx) {
      const double* xe = params_.category_vectors.data() + cell_idx * dx;
      for (std::size_t i = 0; i < dx; ++i) {
        double v = 0.0;
        for (std::size_t j = 0; j < dx; ++j) v += params_.M[i * dx + j] * xe[j];
        projected_[cell_idx * dx + i] = v;
        theta_e_dot_[cell_idx] += params_.theta_e[i] * xe[i];
      }
    }

    direct_profile_.assign(n_actions, 0.0);
    double mean = 0.0;
    for (ActionId a = 0; a < n_actions; ++a) {
      direct_profile_[a] = std::sin(static_cast<double>(a) + 1.0);
      mean += direct_profile_[a];
    }
    mean /= static_cast<double>(n_actions);
    double var = 0.0;
    for (double& v : direct_profile_) {
      v -= mean;
      var += v * v;
    }
    const double sd = std::sqrt(var / static_cast<double>(n_actions));
    for (double& v : direct_profile_) v /= sd;

    slopes_.assign(n_actions * dx, 0.0);
    intercepts_.assign(n_actions, 0.0);
    const double lambda = config_.direct_effect_strength;
    for (ActionId a = 0; a < n_actions; ++a) {
      double* s = slopes_.data() + a * dx;
      for (std::size_t k = 0; k < config_.d_e; ++k) {
        const double eta = params_.eta[k];
        for (std::size_t j = 0; j < dx; ++j) s[j] += eta * params_.theta_x[j];
        for (int c = 0; c < config_.cardinalities[k]; ++c) {
          const double w = eta * embed_.prob(a, k, c);
          const double* proj = projected_.data() + cell(k, c) * dx;
          for (std::size_t j = 0; j < dx; ++j) s[j] += w * proj[j];
          intercepts_[a] += w * theta_e_dot_[cell(k, c)];
        }
      }
      if (lambda > 0.0) {
        for (std::size_t j = 0; j < dx; ++j) s[j] += lambda * direct_profile_[a] * params_.theta_x[j];
      }
    }

    if (pool_mode()) build_pool_caches();
  }

  void build_pool_caches();

  EnvConfig config_;
  EnvParameters params_;
  std::uint64_t seed_ = 0;

  FactoredEmbeddingTable embed_;
  std::vector<double> projected_;
  std::vector<double> theta_e_dot_;
  std::vector<double> direct_profile_;
  std::vector<double> slopes_;
  std::vector<double> intercepts_;

  std::vector<double> pool_q_;
  PolicyMatrix pool_pi_b_;
  PolicyMatrix pool_pi_e_;
};

// softmax(beta * q) with max subtraction.
inline void softmax_policy(double beta, std::span<const double> q, std::span<double> out) {
  double peak = -INFINITY;
  for (double v : q) peak = std::max(peak, beta * v);
  double total = 0.0;
  for (std::size_t a = 0; a < q.size(); ++a) {
    out[a] = std::exp(beta * q[a] - peak);
    total += out[a];
  }
  for (double& p : out) p /= total;
}

// (1 - eps) on the first argmax plus eps / |A| everywhere.
inline void epsilon_greedy_policy(double epsilon, std::span<const double> q, std::span<double> out) {
  const auto best = static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
  const double floor = epsilon / static_cast<double>(q.size());
  std::fill(out.begin(), out.end(), floor);
  out[best] += 1.0 - epsilon;
}

inline void Environment::build_pool_caches() {
  const std::size_t m = params_.context_pool.size();
  const std::size_t n_actions = config_.n_actions;
  pool_q_.assign(m * n_actions, 0.0);
  pool_pi_b_ = PolicyMatrix(m, n_actions, PolicyKind::behavior);
  pool_pi_e_ = PolicyMatrix(m, n_actions, PolicyKind::evaluation);
  for (std::size_t i = 0; i < m; ++i) {
    std::span<double> q(pool_q_.data() + i * n_actions, n_actions);
    expected_rewards_all(params_.context_pool[i], q);
    softmax_policy(config_.beta, q, pool_pi_b_.mutable_row(i));
    epsilon_greedy_policy(config_.epsilon, q, pool_pi_e_.mutable_row(i));
  }
}

inline Environment init_env(const EnvConfig& config, std::uint64_t seed) {
  config.validate();
  const std::vector<int> cards = config.resolved_cardinalities();
  const std::size_t dx = config.d_x;
  std::size_t stride = 0;
  for (int c : cards) stride += static_cast<std::size_t>(c);

  std::mt19937_64 rng = make_engine(seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::exponential_distribution<double> unit_exp(1.0);

  EnvParameters p;
  p.alpha.resize(config.n_actions * stride);
  for (double& v : p.alpha) v = normal(rng);
  p.M.resize(dx * dx);
  for (double& v : p.M) v = unif(rng);
  p.theta_x.resize(dx);
  for (double& v : p.theta_x) v = unif(rng);
  p.theta_e.resize(dx);
  for (double& v : p.theta_e) v = unif(rng);
  // Dirichlet(1, ..., 1) through normalized unit exponentials.
  p.eta.resize(config.d_e);
  double eta_total = 0.0;
  for (double& v : p.eta) {
    v = unit_exp(rng);
    eta_total += v;
  }
  for (double& v : p.eta) v /= eta_total;
  p.category_vectors.resize(stride * dx);
  for (double& v : p.category_vectors) v = normal(rng);
  p.context_pool.assign(config.pool_size, Context(dx));
  for (Context& x : p.context_pool) {
    for (double& v : x) v = normal(rng);
  }
  return Environment(config, std::move(p), seed);
}

inline FactoredEmbeddingTable embed_dist(const Environment& env, ActionId a) {
  if (a >= env.n_actions()) throw ValidationError("action out of range");
  FactoredEmbeddingTable single(1, env.cardinalities());
  for (std::size_t k = 0; k < env.d_e(); ++k) {
    for (int c = 0; c < env.cardinalities()[k]; ++c) single.prob(0, k, c) = env.embedding_table().prob(a, k, c);
  }
  return single;
}

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double v = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) v += a[i] * b[i];
  return v;
}

// x' M x_{k,c} + theta_e' x_{k,c}: the category-dependent part of dimension k's term.
inline double category_term(const Environment& env, const Context& x, std::size_t k, int c) {
  return dot(x, env.projected_category(k, c)) + env.theta_e_dot_category(k, c);
}

inline void check_context(const Environment& env, const Context& x) {
  if (x.size() != env.d_x()) throw ShapeError("context dimension mismatch");
}

}  // namespace detail

// q(x, e) = sum_k eta_k (x' M x_{e_k} + theta_x' x + theta_e' x_{e_k})
inline double expected_reward_xe(const Environment& env, const Context& x, const EmbeddingVector& e) {
  detail::check_context(env, x);
  env.embedding_table().check_embedding(e);
  const double base = detail::dot(x, env.params().theta_x);
  double q = 0.0;
  for (std::size_t k = 0; k < env.d_e(); ++k) {
    q += env.params().eta[k] * (detail::category_term(env, x, k, e[k]) + base);
  }
  return q;
}

// lambda * (theta_x' x) * s(a), with s the standardized sin(a + 1) profile.
inline double direct_effect(const Environment& env, const Context& x, ActionId a) {
  const double lambda = env.config().direct_effect_strength;
  if (lambda == 0.0) return 0.0;
  return lambda * detail::dot(x, env.params().theta_x) * env.direct_effect_profile(a);
}

inline double expected_reward_xae(const Environment& env, const Context& x, ActionId a, const EmbeddingVector& e) {
  if (a >= env.n_actions()) throw ValidationError("action out of range");
  return expected_reward_xe(env, x, e) + direct_effect(env, x, a);
}

// E_{p(e|a)}[q(x, a, e)], summed per dimension since q is additive over dimensions.
inline double expected_reward_xa(const Environment& env, const Context& x, ActionId a) {
  detail::check_context(env, x);
  if (a >= env.n_actions()) throw ValidationError("action out of range");
  const FactoredEmbeddingTable& table = env.embedding_table();
  const double base = detail::dot(x, env.params().theta_x);
  double q = 0.0;
  for (std::size_t k = 0; k < env.d_e(); ++k) {
    double inner = 0.0;
    for (int c = 0; c < env.cardinalities()[k]; ++c) {
      inner += table.prob(a, k, c) * detail::category_term(env, x, k, c);
    }
    q += env.params().eta[k] * (inner + base);
  }
  return q + direct_effect(env, x, a);
}

// Var_{p(e|a)}[q(x, a, e)]; embedding dimensions are independent given a.
inline double reward_spread_xa(const Environment& env, const Context& x, ActionId a) {
  const FactoredEmbeddingTable& table = env.embedding_table();
  double var = 0.0;
  for (std::size_t k = 0; k < env.d_e(); ++k) {
    double m1 = 0.0;
    double m2 = 0.0;
    for (int c = 0; c < env.cardinalities()[k]; ++c) {
      const double t = detail::category_term(env, x, k, c);
      m1 += table.prob(a, k, c) * t;
      m2 += table.prob(a, k, c) * t * t;
    }
    const double eta = env.params().eta[k];
    var += eta * eta * std::max(0.0, m2 - m1 * m1);
  }
  return var;
}

inline std::vector<double> behavior_policy(const Environment& env, const Context& x) {
  detail::check_context(env, x);
  std::vector<double> q(env.n_actions());
  env.expected_rewards_all(x, q);
  std::vector<double> pi(env.n_actions());
  softmax_policy(env.config().beta, q, pi);
  return pi;
}

inline std::vector<double> evaluation_policy(const Environment& env, const Context& x) {
  detail::check_context(env, x);
  std::vector<double> q(env.n_actions());
  env.expected_rewards_all(x, q);
  std::vector<double> pi(env.n_actions());
  epsilon_greedy_policy(env.config().epsilon, q, pi);
  return pi;
}

namespace detail {

// Inverse-CDF draw; falls back to the last positive entry under rounding.
inline std::size_t sample_categorical(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] > 0.0) last_positive = i;
    cumulative += probs[i];
    if (u < cumulative && probs[i] > 0.0) return i;
  }
  return last_positive;
}

}  // namespace detail

// Observer receives (i, sample, q(x_i, .), pi_b(.|x_i)) for every drawn
// sample outside pool mode, so callers can reuse the rows.
struct NoSampleObserver {
  void operator()(std::size_t, const LoggedSample&, std::span<const double>, std::span<const double>) const {}
};

template <class Observer = NoSampleObserver>
LoggedDataset sample_logged_data(const Environment& env, std::size_t n, std::uint64_t seed,
                                 Observer&& observer = {}) {
  if (n == 0) throw ValidationError("n must be at least 1");
  std::mt19937_64 rng = make_engine(seed, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const std::size_t n_actions = env.n_actions();
  const std::size_t m = env.context_pool().size();
  const FactoredEmbeddingTable& table = env.embedding_table();

  LoggedDataset data;
  data.meta = {n, n_actions, env.d_x(), env.d_e(), env.cardinalities(), seed};
  data.samples.resize(n);
  if (env.pool_mode()) data.context_ids.resize(n);

  std::vector<double> q(n_actions);
  std::vector<double> pi_b(n_actions);
  for (std::size_t i = 0; i < n; ++i) {
    LoggedSample& s = data.samples[i];
    std::span<const double> behavior;
    if (env.pool_mode()) {
      std::size_t idx = 0;
      if (env.config().pool_sampling == PoolSampling::cycle) {
        idx = i % m;
      } else {
        idx = std::min(m - 1, static_cast<std::size_t>(unif(rng) * static_cast<double>(m)));
      }
      data.context_ids[i] = idx;
      s.x = env.context_pool()[idx];
      behavior = env.pool_behavior().row(idx);
    } else {
      s.x.resize(env.d_x());
      for (double& v : s.x) v = normal(rng);
      env.expected_rewards_all(s.x, q);
      softmax_policy(env.config().beta, q, pi_b);
      behavior = pi_b;
    }
    s.action = detail::sample_categorical(behavior, unif(rng));
    s.behavior_propensity = behavior[s.action];
    s.embedding.resize(env.d_e());
    for (std::size_t k = 0; k < env.d_e(); ++k) {
      s.embedding[k] = static_cast<int>(detail::sample_categorical(table.dim_probs(s.action, k), unif(rng)));
    }
    const double noise = normal(rng);
    s.reward = expected_reward_xae(env, s.x, s.action, s.embedding) + env.config().reward_noise_sd * noise;
    if (!env.pool_mode()) observer(i, static_cast<const LoggedSample&>(s), std::span<const double>(q), behavior);
  }
  return data;
}

// Per-sample policy rows for a dataset drawn from env.
struct DatasetPolicies {
  PolicyMatrix evaluation;
  PolicyMatrix behavior;
};

inline DatasetPolicies dataset_policies(const Environment& env, const LoggedDataset& data) {
  const std::size_t n = data.size();
  const std::size_t n_actions = env.n_actions();
  DatasetPolicies out{PolicyMatrix(n, n_actions, PolicyKind::evaluation),
                      PolicyMatrix(n, n_actions, PolicyKind::behavior)};
  std::vector<double> q(n_actions);
  for (std::size_t i = 0; i < n; ++i) {
    detail::check_context(env, data.samples[i].x);
    env.expected_rewards_all(data.samples[i].x, q);
    softmax_policy(env.config().beta, q, out.behavior.mutable_row(i));
    epsilon_greedy_policy(env.config().epsilon, q, out.evaluation.mutable_row(i));
  }
  return out;
}

inline const char* to_string(PoolSampling mode) { return mode == PoolSampling::cycle ? "cycle" : "uniform"; }

inline PoolSampling pool_sampling_from_string(const std::string& s) {
  if (s == "uniform") return PoolSampling::uniform;
  if (s == "cycle") return PoolSampling::cycle;
  throw ValidationError("unknown pool sampling mode '" + s + "'");
}

inline nlohmann::json env_to_json(const Environment& env) {
  const EnvConfig& c = env.config();
  const EnvParameters& p = env.params();
  std::vector<double> pool_flat;
  for (const Context& x : p.context_pool) pool_flat.insert(pool_flat.end(), x.begin(), x.end());
  return {{"seed", env.seed()},
          {"n_actions", c.n_actions},
          {"d_x", c.d_x},
          {"d_e", c.d_e},
          {"cardinalities", c.cardinalities},
          {"beta", c.beta},
          {"epsilon", c.epsilon},
          {"reward_noise_sd", c.reward_noise_sd},
          {"direct_effect_strength", c.direct_effect_strength},
          {"pool_size", c.pool_size},
          {"pool_sampling", to_string(c.pool_sampling)},
          {"alpha", p.alpha},
          {"M", p.M},
          {"theta_x", p.theta_x},
          {"theta_e", p.theta_e},
          {"eta", p.eta},
          {"category_vectors", p.category_vectors},
          {"context_pool", pool_flat}};
}

inline Environment env_from_json(const nlohmann::json& j) {
  try {
    EnvConfig c;
    c.n_actions = j.at("n_actions").get<std::size_t>();
    c.d_x = j.at("d_x").get<std::size_t>();
    c.d_e = j.at("d_e").get<std::size_t>();
    c.cardinalities = j.at("cardinalities").get<std::vector<int>>();
    c.beta = j.at("beta").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.reward_noise_sd = j.at("reward_noise_sd").get<double>();
    c.direct_effect_strength = j.at("direct_effect_strength").get<double>();
    c.pool_size = j.at("pool_size").get<std::size_t>();
    c.pool_sampling = pool_sampling_from_string(j.at("pool_sampling").get<std::string>());
    EnvParameters p;
    p.alpha = j.at("alpha").get<std::vector<double>>();
    p.M = j.at("M").get<std::vector<double>>();
    p.theta_x = j.at("theta_x").get<std::vector<double>>();
    p.theta_e = j.at("theta_e").get<std::vector<double>>();
    p.eta = j.at("eta").get<std::vector<double>>();
    p.category_vectors = j.at("category_vectors").get<std::vector<double>>();
    const auto pool_flat = j.at("context_pool").get<std::vector<double>>();
    if (c.d_x == 0 || pool_flat.size() != c.pool_size * c.d_x) throw ShapeError("context_pool size mismatch");
    for (std::size_t i = 0; i < c.pool_size; ++i) {
      p.context_pool.emplace_back(pool_flat.begin() + static_cast<std::ptrdiff_t>(i * c.d_x),
                                  pool_flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * c.d_x));
    }
    return Environment(c, std::move(p), j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("environment json: ") + e.what());
  }
}

}  // namespace ope_lab

#endif  // OPE_LAB_SYNTHETIC_ENV_HPP
