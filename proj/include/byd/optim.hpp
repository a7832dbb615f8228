#pragma once

// Gaussian-policy PPO with a hand-rolled MLP, analytic backprop, GAE, and
// Adam. Everything is double precision and deterministic for a fixed seed.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "byd/core.hpp"

namespace byd {

// ---------------------------------------------------------------------------
// MLP: tanh hidden layers, linear output. Parameters live in one contiguous
// vector (checkpoints and Adam work on the flat view).

class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    require(sizes_.size() >= 2, ErrorCategory::config,
            "mlp needs at least input and output sizes");
    for (int s : sizes_)
      require(s > 0, ErrorCategory::config, "mlp layer sizes must be positive");
    int n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l)
      n += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    params_.resize(n);
    grads_.assign(n, 0.0);
    int k = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      for (int i = 0; i < sizes_[l] * sizes_[l + 1]; ++i)
        params_[k++] = rng.uniform(-bound, bound);
      for (int i = 0; i < sizes_[l + 1]; ++i) params_[k++] = 0.0;
    }
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::vector<double>& grads() { return grads_; }
  const std::vector<double>& grads() const { return grads_; }
  void zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

  // per-layer activations, kept for the backward pass
  struct Cache {
    std::vector<std::vector<double>> acts;  // acts[0] = input
  };

  std::vector<double> forward(const std::vector<double>& x, Cache& cache) const {
    require(static_cast<int>(x.size()) == sizes_.front(),
            ErrorCategory::contract, "mlp input size mismatch");
    cache.acts.assign(1, x);
    int k = 0;
    std::vector<double> cur = x;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      std::vector<double> next(out);
      const double* w = params_.data() + k;
      const double* b = params_.data() + k + in * out;
      for (int o = 0; o < out; ++o) {
        double acc = b[o];
        const double* row = w + o * in;
        for (int i = 0; i < in; ++i) acc += row[i] * cur[i];
        next[o] = (l + 2 < sizes_.size()) ? std::tanh(acc) : acc;
      }
      k += in * out + out;
      cur = std::move(next);
      cache.acts.push_back(cur);
    }
    return cur;
  }

  std::vector<double> forward(const std::vector<double>& x) const {
    Cache c;
    return forward(x, c);
  }

  // Accumulates parameter gradients for one sample; returns dL/dinput.
  std::vector<double> backward(const std::vector<double>& dout,
                               const Cache& cache) {
    require(dout.size() == static_cast<std::size_t>(sizes_.back()),
            ErrorCategory::contract, "mlp output gradient size mismatch");
    // offsets of each layer's weight block
    std::vector<int> offs(sizes_.size() - 1);
    int k = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offs[l] = k;
      k += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
    }
    std::vector<double> delta = dout;
    for (int l = static_cast<int>(sizes_.size()) - 2; l >= 0; --l) {
      const int in = sizes_[l], out = sizes_[l + 1];
      const auto& a_in = cache.acts[l];
      const auto& a_out = cache.acts[l + 1];
      // output layer is linear; hidden activations pass through tanh'
      if (l + 2 < static_cast<int>(sizes_.size()))
        for (int o = 0; o < out; ++o) delta[o] *= 1.0 - a_out[o] * a_out[o];
      double* gw = grads_.data() + offs[l];
      double* gb = grads_.data() + offs[l] + in * out;
      const double* w = params_.data() + offs[l];
      std::vector<double> dprev(in, 0.0);
      for (int o = 0; o < out; ++o) {
        gb[o] += delta[o];
        double* grow = gw + o * in;
        const double* wrow = w + o * in;
        for (int i = 0; i < in; ++i) {
          grow[i] += delta[o] * a_in[i];
          dprev[i] += delta[o] * wrow[i];
        }
      }
      delta = std::move(dprev);
    }
    return delta;
  }

 private:
  std::vector<int> sizes_;
  std::vector<double> params_;
  std::vector<double> grads_;
};

// ---------------------------------------------------------------------------
// Adam

struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long t = 0;
  std::vector<double> m, v;

  void init(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
    t = 0;
  }

  void step(std::vector<double>& params, const std::vector<double>& grads,
            double lr) {
    require(params.size() == grads.size(), ErrorCategory::contract,
            "adam parameter/gradient size mismatch");
    if (m.size() != params.size()) init(params.size());
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
      params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  }
};

// ---------------------------------------------------------------------------
// Diagonal-Gaussian policy: MLP mean plus a state-independent log-std vector
// appended to the parameter view.

class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  GaussianPolicy(int obs_size, int act_size, Rng& rng,
                 std::vector<int> hidden = {256, 128},
                 double log_std_init = -0.5) {
    std::vector<int> sizes;
    sizes.push_back(obs_size);
    for (int h : hidden) sizes.push_back(h);
    sizes.push_back(act_size);
    mean_net_ = Mlp(sizes, rng);
    log_std_.assign(act_size, log_std_init);
    log_std_grad_.assign(act_size, 0.0);
  }

  int act_size() const { return mean_net_.output_size(); }
  int obs_size() const { return mean_net_.input_size(); }
  Mlp& mean_net() { return mean_net_; }
  const Mlp& mean_net() const { return mean_net_; }
  std::vector<double>& log_std() { return log_std_; }
  const std::vector<double>& log_std() const { return log_std_; }
  std::vector<double>& log_std_grad() { return log_std_grad_; }

  void zero_grads() {
    mean_net_.zero_grads();
    std::fill(log_std_grad_.begin(), log_std_grad_.end(), 0.0);
  }

  std::vector<double> mean(const std::vector<double>& obs) const {
    return mean_net_.forward(obs);
  }

  std::vector<double> sample(const std::vector<double>& obs, Rng& rng) const {
    auto mu = mean(obs);
    for (std::size_t i = 0; i < mu.size(); ++i)
      mu[i] += std::exp(log_std_[i]) * rng.normal();
    return mu;
  }

  double log_prob(const std::vector<double>& mu,
                  const std::vector<double>& action) const {
    require(mu.size() == action.size() && mu.size() == log_std_.size(),
            ErrorCategory::contract, "log_prob dimension mismatch");
    double lp = 0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double s = std::exp(log_std_[i]);
      const double z = (action[i] - mu[i]) / s;
      lp += -0.5 * z * z - log_std_[i] - 0.5 * std::log(2.0 * M_PI);
    }
    return lp;
  }

  double entropy() const {
    double h = 0;
    for (double ls : log_std_) h += ls + 0.5 * std::log(2.0 * M_PI * M_E);
    return h;
  }

  // flat parameter/gradient views (mean net followed by log-std)
  std::vector<double> flat_params() const {
    std::vector<double> out = mean_net_.params();
    out.insert(out.end(), log_std_.begin(), log_std_.end());
    return out;
  }
  std::vector<double> flat_grads() const {
    std::vector<double> out = mean_net_.params();  // sized copy
    out.assign(mean_net_.params().size(), 0.0);
    std::copy(mean_net_.grads().begin(), mean_net_.grads().end(), out.begin());
    out.insert(out.end(), log_std_grad_.begin(), log_std_grad_.end());
    return out;
  }
  void set_flat_params(const std::vector<double>& v) {
    require(v.size() == mean_net_.params().size() + log_std_.size(),
            ErrorCategory::contract, "flat parameter size mismatch");
    std::copy(v.begin(), v.begin() + mean_net_.params().size(),
              mean_net_.params().begin());
    std::copy(v.begin() + mean_net_.params().size(), v.end(),
              log_std_.begin());
  }

 private:
  Mlp mean_net_;
  std::vector<double> log_std_;
  std::vector<double> log_std_grad_;
};

// ---------------------------------------------------------------------------
// Generalized advantage estimation. A terminated episode contributes no
// bootstrap value; a truncated one keeps it but still cuts the recursion.

struct GaeStep {
  double reward = 0.0;
  double value = 0.0;
  bool terminated = false;  // curriculum failure / natural end
  bool truncated = false;   // rollout horizon cut
  double next_value = 0.0;  // V(s') where the episode boundary needs it
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

inline GaeResult compute_gae(const std::vector<GaeStep>& steps, double gamma,
                             double lam) {
  GaeResult out;
  const int n = static_cast<int>(steps.size());
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double adv = 0.0;
  for (int t = n - 1; t >= 0; --t) {
    const auto& s = steps[t];
    const bool boundary = s.terminated || s.truncated;
    const double v_next = s.terminated ? 0.0 : s.next_value;
    const double delta = s.reward + gamma * v_next - s.value;
    adv = delta + (boundary ? 0.0 : gamma * lam * adv);
    out.advantages[t] = adv;
    out.returns[t] = adv + s.value;
  }
  return out;
}

inline void normalize_advantages(std::vector<double>& adv) {
  require(!adv.empty(), ErrorCategory::contract,
          "cannot normalize an empty advantage batch");
  const double mean =
      std::accumulate(adv.begin(), adv.end(), 0.0) / adv.size();
  double var = 0;
  for (double a : adv) var += (a - mean) * (a - mean);
  var /= adv.size();
  const double denom = std::sqrt(var) + 1e-8;
  for (double& a : adv) a = (a - mean) / denom;
}

// ---------------------------------------------------------------------------
// PPO

struct PpoConfig {
  double lr = 5e-4;
  int minibatch = 1024;
  int horizon = 32;
  int opt_epochs = 5;
  double gamma = 0.99;
  double lam = 0.95;
  double clip = 0.2;
  double entropy_start = 5e-4;
  int entropy_decay = 500;  // epochs to reach zero
  double c_vf = 4.0;
  double c_bound = 0.1;
  double bound = 1.0;  // |mean| soft limit
  double max_grad_norm = 1.0;
  double log_std_init = -2.0;  // exploration std ~0.14 of the action range

  void validate() const {
    require(lr > 0, ErrorCategory::config, "lr must be positive");
    require(minibatch >= 1, ErrorCategory::config, "minibatch must be >= 1");
    require(horizon >= 1, ErrorCategory::config, "horizon must be >= 1");
    require(opt_epochs >= 1, ErrorCategory::config, "opt_epochs must be >= 1");
    require(gamma > 0 && gamma <= 1, ErrorCategory::config,
            "gamma must be in (0,1]");
    require(lam >= 0 && lam <= 1, ErrorCategory::config,
            "lambda must be in [0,1]");
    require(clip > 0, ErrorCategory::config, "clip must be positive");
    require(entropy_decay >= 1, ErrorCategory::config,
            "entropy_decay must be >= 1");
    require(max_grad_norm > 0, ErrorCategory::config,
            "max_grad_norm must be positive");
  }
};

inline double entropy_coef(int epoch, const PpoConfig& cfg) {
  return cfg.entropy_start *
         std::max(0.0, 1.0 - static_cast<double>(epoch) / cfg.entropy_decay);
}

struct PpoSample {
  std::vector<double> obs;
  std::vector<double> action;  // raw policy action as sampled
  double log_prob_old = 0.0;
  double advantage = 0.0;
  double ret = 0.0;
};

struct PpoStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double bound_loss = 0;
  double total_loss = 0;
};

// Minibatch loss and gradients. Gradients accumulate into the nets, so the
// caller zeroes them. Loss = -L_clip + c_vf*L_vf - c_e*H + c_bound*L_bound,
// each term averaged over the minibatch.
inline double ppo_loss(GaussianPolicy& policy, Mlp& value,
                       const std::vector<PpoSample>& batch, double c_entropy,
                       const PpoConfig& cfg, PpoStats* stats = nullptr) {
  require(!batch.empty(), ErrorCategory::contract, "ppo batch is empty");
  const int n = static_cast<int>(batch.size());
  const int da = policy.act_size();
  const double inv_n = 1.0 / n;
  double l_clip = 0, l_vf = 0, l_bound = 0;

  for (const auto& s : batch) {
    Mlp::Cache pc, vc;
    const auto mu = policy.mean_net().forward(s.obs, pc);
    const auto v_out = value.forward(s.obs, vc);
    const double v = v_out[0];

    const double lp = policy.log_prob(mu, s.action);
    const double ratio = std::exp(lp - s.log_prob_old);
    const double clipped =
        std::clamp(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip);
    const double a = s.advantage;
    const double surr1 = ratio * a;
    const double surr2 = clipped * a;
    const bool use_unclipped = surr1 <= surr2;
    l_clip += std::min(surr1, surr2);

    // d(-L_clip)/dratio: only when the unclipped branch is active
    const double dratio = use_unclipped ? -a * inv_n : 0.0;

    std::vector<double> dmu(da, 0.0);
    for (int i = 0; i < da; ++i) {
      const double sd = std::exp(policy.log_std()[i]);
      const double z = (s.action[i] - mu[i]) / sd;
      // dlogp/dmu_i = z/sd ; dlogp/dlogstd_i = z^2 - 1
      dmu[i] += dratio * ratio * (z / sd);
      policy.log_std_grad()[i] += dratio * ratio * (z * z - 1.0);
    }

    // bound loss on the mean
    for (int i = 0; i < da; ++i) {
      const double over = std::max(0.0, mu[i] - cfg.bound);
      const double under = std::max(0.0, -mu[i] - cfg.bound);
      l_bound += over * over + under * under;
      dmu[i] += cfg.c_bound * (2.0 * over - 2.0 * under) * inv_n;
    }
    policy.mean_net().backward(dmu, pc);

    const double verr = v - s.ret;
    l_vf += verr * verr;
    value.backward({cfg.c_vf * 2.0 * verr * inv_n}, vc);
  }

  l_clip *= inv_n;
  l_vf *= inv_n;
  l_bound *= inv_n;
  const double h = policy.entropy();
  // entropy is state independent: dH/dlogstd_i = 1
  for (int i = 0; i < da; ++i) policy.log_std_grad()[i] += -c_entropy;

  const double total =
      -l_clip + cfg.c_vf * l_vf - c_entropy * h + cfg.c_bound * l_bound;
  if (stats) {
    stats->policy_loss = -l_clip;
    stats->value_loss = l_vf;
    stats->entropy = h;
    stats->bound_loss = l_bound;
    stats->total_loss = total;
  }
  return total;
}

// Global gradient norm across both nets, clipped in place.
inline double clip_grad_norm(GaussianPolicy& policy, Mlp& value,
                             double max_norm) {
  double sq = 0;
  for (double g : policy.mean_net().grads()) sq += g * g;
  for (double g : policy.log_std_grad()) sq += g * g;
  for (double g : value.grads()) sq += g * g;
  const double nrm = std::sqrt(sq);
  if (nrm > max_norm) {
    const double s = max_norm / nrm;
    for (double& g : policy.mean_net().grads()) g *= s;
    for (double& g : policy.log_std_grad()) g *= s;
    for (double& g : value.grads()) g *= s;
  }
  return nrm;
}

struct PpoOptimizerState {
  Adam policy_adam;
  Adam log_std_adam;
  Adam value_adam;
};

// One PPO update over the collected rollout: opt_epochs passes of shuffled
// minibatches. Throws a numeric error on a non-finite loss so the caller can
// abort while the last checkpoint is still good.
inline PpoStats ppo_update(GaussianPolicy& policy, Mlp& value,
                           PpoOptimizerState& opt,
                           std::vector<PpoSample>& samples, int epoch,
                           Rng& rng, const PpoConfig& cfg) {
  require(!samples.empty(), ErrorCategory::contract, "ppo rollout is empty");
  const double c_e = entropy_coef(epoch, cfg);
  PpoStats last{};
  std::vector<int> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int pass = 0; pass < cfg.opt_epochs; ++pass) {
    // Fisher-Yates on the index order
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform_int(0, i));
      std::swap(order[i], order[j]);
    }
    for (std::size_t start = 0; start < order.size();
         start += cfg.minibatch) {
      const std::size_t end =
          std::min(order.size(), start + cfg.minibatch);
      std::vector<PpoSample> batch;
      batch.reserve(end - start);
      for (std::size_t i = start; i < end; ++i)
        batch.push_back(samples[order[i]]);
      policy.zero_grads();
      value.zero_grads();
      PpoStats stats;
      const double loss = ppo_loss(policy, value, batch, c_e, cfg, &stats);
      require(std::isfinite(loss), ErrorCategory::numeric,
              "optimization diverged: non-finite loss");
      clip_grad_norm(policy, value, cfg.max_grad_norm);
      opt.policy_adam.step(policy.mean_net().params(),
                           policy.mean_net().grads(), cfg.lr);
      opt.log_std_adam.step(policy.log_std(), policy.log_std_grad(), cfg.lr);
      opt.value_adam.step(value.params(), value.grads(), cfg.lr);
      last = stats;
    }
  }
  return last;
}

}  // namespace byd
