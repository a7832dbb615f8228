#pragma once

// Training orchestration: per-epoch schedules, rollout collection with
// hybrid execution, PPO updates, metrics logging, full-state checkpoints,
// and the pure-policy evaluation runner.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "byd/config.hpp"
#include "byd/curriculum.hpp"
#include "byd/demo.hpp"
#include "byd/earlystop.hpp"
#include "byd/evalmetrics.hpp"
#include "byd/optim.hpp"
#include "byd/reward.hpp"
#include "byd/shadow.hpp"
#include "byd/simenv.hpp"

namespace byd {

// Observation: one UMR hand block, the full object state, and the expert
// object pose one step ahead as the tracking target.
inline int observation_size(int d_max) { return umr_block_size(d_max) + 13 + 7; }

inline std::vector<double> build_observation(const SimState& state,
                                             const HandMorphology& morph,
                                             int d_max,
                                             const DemoTrajectory& demo,
                                             int current_step) {
  auto obs = encode_umr(state.hands[0].wrist, state.hands[0].joints, morph,
                        d_max).values;
  const auto& o = state.object;
  obs.insert(obs.end(), o.position.begin(), o.position.end());
  obs.push_back(o.orientation.w);
  obs.push_back(o.orientation.x);
  obs.push_back(o.orientation.y);
  obs.push_back(o.orientation.z);
  obs.insert(obs.end(), o.linear_velocity.begin(), o.linear_velocity.end());
  obs.insert(obs.end(), o.angular_velocity.begin(), o.angular_velocity.end());
  const int next = std::min(current_step + 1, demo.t_max - 1);
  const auto& g = demo.steps[next].object;
  obs.insert(obs.end(), g.position.begin(), g.position.end());
  obs.push_back(g.orientation.w);
  obs.push_back(g.orientation.x);
  obs.push_back(g.orientation.y);
  obs.push_back(g.orientation.z);
  return obs;
}

// c_target: the expert's own fingertip is on (or nearly on) the object at
// this step, so a matching policy contact is intended. The margin is the
// collision threshold dilated 2x to absorb tracking error.
inline std::vector<bool> expert_near_contact_flags(const DemoStep& expert,
                                                   double tip_radius,
                                                   double eps_coll) {
  std::vector<bool> out(expert.fingertips.size());
  for (std::size_t f = 0; f < out.size(); ++f) {
    const double sep =
        detail::probe_object(expert.object, expert.fingertips[f], tip_radius)
            .separation;
    out[f] = expert.contact_flags[f] || sep < 2.0 * eps_coll;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-epoch bookkeeping surfaced to the metrics log.

struct EpochStats {
  int epoch = 0;
  long env_steps = 0;        // cumulative, after the epoch
  double beta = 0, w_imi = 1, w_goal = 0;
  double kp = 0, kd = 0;
  double c_entropy = 0;
  double scale = 1;
  double phase_sr = 0;       // snapshot the verdicts used
  double mean_reward = 0;    // per-step total reward, the early-stop signal
  double mean_imitation = 0;
  int episodes = 0;          // episodes finished this epoch
  int successes = 0;
  double sr_window = 0, q_e = 0;  // after the epoch's window updates
  PpoStats ppo;
  std::array<int, 5> failures = {0, 0, 0, 0, 0};  // by FailureReason - 1
  std::array<std::optional<double>, 3> slopes;
  bool stop = false;
};

struct TrainResult {
  int epochs_run = 0;
  bool early_stopped = false;
  std::string checkpoint_path;
  std::string metrics_path;
};

class Trainer {
 public:
  Trainer(const RunConfig& cfg, std::vector<DemoTrajectory> demos)
      : cfg_(cfg),
        demos_(std::move(demos)),
        morph_(load_morphology(cfg.morphology)),
        env_(morph_, cfg.sim) {
    cfg_.validate();
    require(!demos_.empty(), ErrorCategory::config,
            "training needs at least one demo");
    require(morph_.dof <= cfg_.d_max, ErrorCategory::config,
            "morphology dof exceeds d_max");
    for (const auto& d : demos_)
      require(d.morphology_id == morph_.id, ErrorCategory::config,
              "demo '" + d.task + "' was recorded on morphology '" +
                  d.morphology_id + "', not '" + morph_.id + "'");
    ppo_cfg_ = cfg_.ppo;
    if (cfg_.imitation_only) {
      ppo_cfg_.entropy_start = 0.0;
      ppo_cfg_.c_bound = 0.0;
    }
    Rng init = rng_stream(cfg_.seed, 1);
    policy_ = GaussianPolicy(observation_size(cfg_.d_max),
                             env_.action_size(), init, {256, 128},
                             ppo_cfg_.log_std_init);
    value_ = Mlp({observation_size(cfg_.d_max), 256, 128, 1}, init);
    roll_rng_ = rng_stream(cfg_.seed, 2);
    shuffle_rng_ = rng_stream(cfg_.seed, 3);
    envs_.resize(cfg_.num_envs);
    for (auto& slot : envs_) reset_slot(slot);
  }

  static Trainer from_config(const RunConfig& cfg) {
    std::vector<DemoTrajectory> demos;
    for (const auto& p : cfg.demos) demos.push_back(load_demo(p));
    return Trainer(cfg, std::move(demos));
  }

  const RunConfig& config() const { return cfg_; }
  const GaussianPolicy& policy() const { return policy_; }
  const HandMorphology& morphology() const { return morph_; }
  const std::vector<DemoTrajectory>& demos() const { return demos_; }
  int epoch() const { return epoch_; }
  long env_steps() const { return env_steps_; }
  const RewardHistory& history() const { return history_; }
  const AnnealState& anneal() const { return anneal_; }

  EpochStats run_epoch() {
    EpochStats st;
    st.epoch = epoch_;

    // (1) execution schedules for this epoch
    const BlendWeights bw = beta_schedule(epoch_, cfg_.shadow);
    const double decay = gain_decay(epoch_, cfg_.shadow);
    st.beta = bw.beta;
    st.kp = cfg_.shadow.kp_start * decay;
    st.kd = cfg_.shadow.kd_start * decay;
    st.c_entropy = entropy_coef(epoch_, ppo_cfg_);

    // (2) anneal weights from the window state at epoch start
    imitation_weight(epoch_, anneal_, cfg_.anneal);
    const double w_imi = cfg_.imitation_only ? 1.0 : anneal_.w_imi;
    st.w_imi = w_imi;
    st.w_goal = cfg_.imitation_only ? 0.0 : anneal_.w_goal;

    // curriculum snapshot for every verdict this epoch
    const double scale =
        scale_factor(static_cast<double>(env_steps_), cfg_.curriculum);
    const double phase_sr = anneal_.sr_bar;
    st.scale = scale;
    st.phase_sr = phase_sr;

    // (3) rollout collection
    const int horizon = ppo_cfg_.horizon;
    std::vector<PpoSample> samples;
    samples.reserve(static_cast<std::size_t>(cfg_.num_envs) * horizon);
    std::vector<GaeStep> gae_steps;
    gae_steps.reserve(samples.capacity());
    double reward_sum = 0, imi_sum = 0;

    for (auto& slot : envs_) {
      for (int h = 0; h < horizon; ++h) {
        const DemoTrajectory& demo = demos_[slot.demo_index];
        const int idx = slot.start_step + slot.t;

        PpoSample sample;
        sample.obs =
            build_observation(slot.state, morph_, cfg_.d_max, demo, idx);
        const double v = value_.forward(sample.obs)[0];
        auto mu = policy_.mean(sample.obs);
        sample.action = mu;
        for (std::size_t i = 0; i < mu.size(); ++i)
          sample.action[i] += std::exp(policy_.log_std()[i]) *
                              roll_rng_.normal();
        sample.log_prob_old = policy_.log_prob(mu, sample.action);

        const auto& exp_now = demo.steps[idx];
        const auto& exp_next = demo.steps[idx + 1];
        const ActionDelta exec = blend_action(
            ActionDelta::from_flat(sample.action, {morph_.dof}),
            ActionDelta::from_flat(exp_now.expert_action, {morph_.dof}), bw);
        const auto wrench = support_wrench(
            slot.state.object, exp_now.object.position,
            exp_now.object.orientation, exp_now.object.linear_velocity,
            exp_now.object.angular_velocity, epoch_, cfg_.shadow);

        auto [next, readings] = env_.step(slot.state, exec, wrench);
        ++env_steps_;
        ++slot.t;

        const auto poses = forward_kinematics(
            morph_.chain, next.hands[0].wrist, next.hands[0].joints);
        const auto tips = fingertip_positions(morph_.chain, poses);
        const auto rb =
            imitation_reward(next, tips, exp_next,
                             env_.last_applied_torques(), cfg_.reward,
                             morph_.chain.finger_roles);

        std::vector<double> seps;
        seps.reserve(next.contacts.size());
        for (const auto& c : next.contacts) seps.push_back(c.separation);
        const auto near = expert_near_contact_flags(
            exp_next, cfg_.sim.tip_radius, cfg_.curriculum.eps_coll);
        const auto verdict = check_step(
            next, tips, seps, exp_next, near, morph_.chain.finger_roles,
            slot.t, demo.t_max - slot.start_step, scale, phase_sr,
            /*bimanual=*/false, cfg_.curriculum);

        const bool terminated = verdict.failed || verdict.success;
        double r_total = w_imi * rb.total;
        if (terminated && !cfg_.imitation_only)
          r_total += (1.0 - w_imi) * goal_reward(verdict.success, cfg_.anneal);
        reward_sum += r_total;
        imi_sum += rb.total;
        slot.imi_sum += rb.total;

        // the demo runs out one record before t_max; cut the episode there
        const bool demo_end = idx + 2 >= demo.t_max;
        const bool truncated =
            !terminated && (demo_end || h + 1 == horizon);

        GaeStep g;
        g.reward = r_total;
        g.value = v;
        g.terminated = terminated;
        g.truncated = truncated;
        if (!terminated) {
          const auto next_obs = build_observation(next, morph_, cfg_.d_max,
                                                  demo, idx + 1);
          g.next_value = value_.forward(next_obs)[0];
        }
        gae_steps.push_back(g);
        samples.push_back(std::move(sample));

        if (terminated || demo_end) {
          ++st.episodes;
          if (verdict.success) ++st.successes;
          if (verdict.failed)
            ++st.failures[static_cast<int>(verdict.failure_reason) - 1];
          update_windows(anneal_, slot.imi_sum / slot.t, verdict.success,
                         cfg_.anneal);
          reset_slot(slot);
        } else {
          slot.state = std::move(next);
        }
      }
    }

    // (4) PPO update on the collected batch
    {
      GaeResult all;
      for (int e = 0; e < cfg_.num_envs; ++e) {
        std::vector<GaeStep> stream(
            gae_steps.begin() + static_cast<std::size_t>(e) * horizon,
            gae_steps.begin() + static_cast<std::size_t>(e + 1) * horizon);
        const auto r = compute_gae(stream, ppo_cfg_.gamma, ppo_cfg_.lam);
        all.advantages.insert(all.advantages.end(), r.advantages.begin(),
                              r.advantages.end());
        all.returns.insert(all.returns.end(), r.returns.begin(),
                           r.returns.end());
      }
      normalize_advantages(all.advantages);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        samples[i].advantage = all.advantages[i];
        samples[i].ret = all.returns[i];
      }
      st.ppo = ppo_update(policy_, value_, opt_, samples, epoch_,
                          shuffle_rng_, ppo_cfg_);
    }

    // (5) reward history and convergence test
    const double n_steps = static_cast<double>(samples.size());
    st.mean_reward = reward_sum / n_steps;
    st.mean_imitation = imi_sum / n_steps;
    history_.push_back(st.mean_reward);
    st.sr_window = anneal_.sr_bar;
    st.q_e = anneal_.q_e;
    for (std::size_t i = 0; i < cfg_.earlystop.windows.size() && i < 3; ++i)
      st.slopes[i] = slope(history_, cfg_.earlystop.windows[i]);
    st.stop = cfg_.early_stop_enabled &&
              should_stop(history_, epoch_, cfg_.earlystop);

    ++epoch_;
    st.env_steps = env_steps_;
    return st;
  }

  // Full loop: metrics rows, periodic checkpoints, early stop, and a final
  // checkpoint at exit. Any error leaves the last checkpoint intact and a
  // machine-readable failure record next to it.
  TrainResult run() {
    namespace fs = std::filesystem;
    fs::create_directories(cfg_.output_dir);
    const std::string metrics_path = cfg_.output_dir + "/metrics.csv";
    const bool fresh =
        !fs::exists(metrics_path) || fs::file_size(metrics_path) == 0;
    std::ofstream metrics(metrics_path, std::ios::binary | std::ios::app);
    require(metrics.good(), ErrorCategory::io,
            "cannot open metrics log: " + metrics_path);
    if (fresh) metrics << metrics_header() << "\n";

    TrainResult res;
    res.metrics_path = metrics_path;
    try {
      while (epoch_ < cfg_.total_epochs) {
        const EpochStats st = run_epoch();
        ++res.epochs_run;
        metrics << metrics_row(st) << "\n";
        metrics.flush();
        if (epoch_ % cfg_.checkpoint_every == 0)
          save_checkpoint(checkpoint_name(epoch_));
        if (st.stop) {
          res.early_stopped = true;
          break;
        }
      }
    } catch (const Error& e) {
      write_failure(e);
      throw;
    }
    res.checkpoint_path = cfg_.output_dir + "/checkpoint.json";
    save_checkpoint(res.checkpoint_path);
    return res;
  }

  std::string checkpoint_name(int epoch) const {
    std::ostringstream os;
    os << cfg_.output_dir << "/ckpt_" << std::setw(6) << std::setfill('0')
       << epoch << ".json";
    return os.str();
  }

  // -------------------------------------------------------------------------
  // Checkpointing: the full mutable state, so a resumed run is bit-identical
  // to an uninterrupted one.

  nlohmann::json checkpoint_json() const {
    nlohmann::json j;
    j["format"] = "byd-checkpoint";
    j["version"] = 1;
    j["config_hash"] = config_hash(cfg_);
    j["epoch"] = epoch_;
    j["env_steps"] = env_steps_;
    j["policy"] = {{"sizes", policy_.mean_net().sizes()},
                   {"params", policy_.mean_net().params()},
                   {"log_std", policy_.log_std()}};
    j["value"] = {{"sizes", value_.sizes()}, {"params", value_.params()}};
    j["adam"] = {{"policy", adam_json(opt_.policy_adam)},
                 {"log_std", adam_json(opt_.log_std_adam)},
                 {"value", adam_json(opt_.value_adam)}};
    j["anneal"] = {
        {"imi_window", std::vector<double>(anneal_.imi_window.begin(),
                                           anneal_.imi_window.end())},
        {"suc_window", std::vector<double>(anneal_.suc_window.begin(),
                                           anneal_.suc_window.end())},
        {"r_bar_imi", anneal_.r_bar_imi},
        {"sr_bar", anneal_.sr_bar},
        {"q_e", anneal_.q_e},
        {"w_imi", anneal_.w_imi},
        {"w_goal", anneal_.w_goal}};
    j["history"] = history_;
    j["rng"] = {{"rollout", roll_rng_.state}, {"shuffle", shuffle_rng_.state}};
    j["envs"] = nlohmann::json::array();
    for (const auto& s : envs_) {
      j["envs"].push_back({{"demo_index", s.demo_index},
                           {"start_step", s.start_step},
                           {"t", s.t},
                           {"imi_sum", s.imi_sum},
                           {"state", sim_state_json(s.state)}});
    }
    return j;
  }

  void save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorCategory::io,
            "cannot write checkpoint: " + path);
    out << checkpoint_json().dump() << "\n";
    require(out.good(), ErrorCategory::io, "checkpoint write failed: " + path);
  }

  void restore(const nlohmann::json& j) {
    require(j.value("format", "") == "byd-checkpoint", ErrorCategory::io,
            "not a checkpoint file");
    require(j.at("config_hash").get<std::uint64_t>() == config_hash(cfg_),
            ErrorCategory::config,
            "checkpoint was produced by a different config; refusing resume");
    epoch_ = j.at("epoch").get<int>();
    env_steps_ = j.at("env_steps").get<long>();
    require(j.at("policy").at("params").size() ==
                    policy_.mean_net().params().size() &&
                j.at("value").at("params").size() == value_.params().size(),
            ErrorCategory::config,
            "checkpoint network shape does not match this config");
    policy_.mean_net().params() =
        j.at("policy").at("params").get<std::vector<double>>();
    policy_.log_std() =
        j.at("policy").at("log_std").get<std::vector<double>>();
    value_.params() = j.at("value").at("params").get<std::vector<double>>();
    adam_from_json(j.at("adam").at("policy"), opt_.policy_adam);
    adam_from_json(j.at("adam").at("log_std"), opt_.log_std_adam);
    adam_from_json(j.at("adam").at("value"), opt_.value_adam);
    const auto& a = j.at("anneal");
    const auto imi = a.at("imi_window").get<std::vector<double>>();
    const auto suc = a.at("suc_window").get<std::vector<double>>();
    anneal_.imi_window.assign(imi.begin(), imi.end());
    anneal_.suc_window.assign(suc.begin(), suc.end());
    anneal_.r_bar_imi = a.at("r_bar_imi").get<double>();
    anneal_.sr_bar = a.at("sr_bar").get<double>();
    anneal_.q_e = a.at("q_e").get<double>();
    anneal_.w_imi = a.at("w_imi").get<double>();
    anneal_.w_goal = a.at("w_goal").get<double>();
    history_ = j.at("history").get<std::vector<double>>();
    roll_rng_.state = j.at("rng").at("rollout").get<std::uint64_t>();
    shuffle_rng_.state = j.at("rng").at("shuffle").get<std::uint64_t>();
    const auto& envs = j.at("envs");
    require(static_cast<int>(envs.size()) == cfg_.num_envs,
            ErrorCategory::config,
            "checkpoint env count does not match num_envs");
    for (int i = 0; i < cfg_.num_envs; ++i) {
      auto& s = envs_[i];
      const auto& je = envs[i];
      s.demo_index = je.at("demo_index").get<int>();
      require(s.demo_index >= 0 &&
                  s.demo_index < static_cast<int>(demos_.size()),
              ErrorCategory::config, "checkpoint demo index out of range");
      s.start_step = je.at("start_step").get<int>();
      s.t = je.at("t").get<int>();
      s.imi_sum = je.at("imi_sum").get<double>();
      s.state = sim_state_from_json(je.at("state"),
                                    demos_[s.demo_index].object_template);
    }
  }

  void load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCategory::io,
            "cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCategory::io,
                  "bad checkpoint file: " + std::string(e.what()));
    }
    restore(j);
  }

  static std::string metrics_header() {
    return "epoch,env_steps,beta,w_imi,w_goal,kp,kd,c_entropy,scale,"
           "phase_sr,mean_reward,mean_imitation,episodes,successes,"
           "sr_window,q_e,policy_loss,value_loss,entropy,bound_loss,"
           "fail_obj_pos,fail_obj_rot,fail_fingertip,"
           "fail_unintended_contact,fail_contact_count,"
           "slope_w0,slope_w1,slope_w2,stop";
  }

  static std::string metrics_row(const EpochStats& st) {
    std::ostringstream os;
    auto d = [](double v) { return format_double(v); };
    os << st.epoch << ',' << st.env_steps << ',' << d(st.beta) << ','
       << d(st.w_imi) << ',' << d(st.w_goal) << ',' << d(st.kp) << ','
       << d(st.kd) << ',' << d(st.c_entropy) << ',' << d(st.scale) << ','
       << d(st.phase_sr) << ',' << d(st.mean_reward) << ','
       << d(st.mean_imitation) << ',' << st.episodes << ',' << st.successes
       << ',' << d(st.sr_window) << ',' << d(st.q_e) << ','
       << d(st.ppo.policy_loss) << ',' << d(st.ppo.value_loss) << ','
       << d(st.ppo.entropy) << ',' << d(st.ppo.bound_loss);
    for (int f : st.failures) os << ',' << f;
    for (const auto& s : st.slopes) os << ',' << (s ? format_double(*s) : "");
    os << ',' << (st.stop ? 1 : 0);
    return os.str();
  }

 private:
  struct EnvSlot {
    int demo_index = 0;
    int start_step = 0;
    int t = 0;            // steps taken since reset
    double imi_sum = 0;   // summed imitation reward this episode
    SimState state;
  };

  void reset_slot(EnvSlot& slot) {
    slot.demo_index =
        demos_.size() == 1
            ? 0
            : static_cast<int>(roll_rng_.uniform_int(
                  0, static_cast<std::int64_t>(demos_.size()) - 1));
    slot.start_step =
        sample_start_step(roll_rng_, demos_[slot.demo_index], cfg_.l_min);
    slot.t = 0;
    slot.imi_sum = 0;
    slot.state = reset_from_demo(demos_[slot.demo_index], slot.start_step);
  }

  static nlohmann::json adam_json(const Adam& a) {
    return {{"t", a.t}, {"m", a.m}, {"v", a.v}};
  }
  static void adam_from_json(const nlohmann::json& j, Adam& a) {
    a.t = j.at("t").get<long>();
    a.m = j.at("m").get<std::vector<double>>();
    a.v = j.at("v").get<std::vector<double>>();
  }

  static nlohmann::json sim_state_json(const SimState& s) {
    nlohmann::json j;
    j["time_step"] = s.time_step;
    j["wrist"] = detail::wrist_json(s.hands[0].wrist);
    j["q"] = s.hands[0].joints.positions;
    j["qd"] = s.hands[0].joints.velocities;
    j["targets"] = s.hands[0].joint_targets;
    j["object"] = detail::object_pose_json(s.object);
    j["contacts"] = nlohmann::json::array();
    for (const auto& c : s.contacts)
      j["contacts"].push_back({{"finger", c.finger_index},
                               {"force", detail::vec3_json(c.force)},
                               {"in_contact", c.in_contact},
                               {"separation", c.separation}});
    return j;
  }

  static SimState sim_state_from_json(const nlohmann::json& j,
                                      const RigidObjectState& object_template) {
    SimState s;
    s.time_step = j.at("time_step").get<long>();
    HandSimState hand;
    hand.wrist = detail::wrist_from_json(j.at("wrist"));
    hand.joints.positions = j.at("q").get<std::vector<double>>();
    hand.joints.velocities = j.at("qd").get<std::vector<double>>();
    hand.joint_targets = j.at("targets").get<std::vector<double>>();
    s.hands.push_back(std::move(hand));
    s.object = object_template;
    const auto& o = j.at("object");
    s.object.position = vec3_from_json(o.at("position"));
    s.object.orientation = quat_from_json(o.at("orientation"));
    s.object.linear_velocity = vec3_from_json(o.at("linear_velocity"));
    s.object.angular_velocity = vec3_from_json(o.at("angular_velocity"));
    for (const auto& jc : j.at("contacts")) {
      ContactReading c;
      c.finger_index = jc.at("finger").get<int>();
      c.force = vec3_from_json(jc.at("force"));
      c.in_contact = jc.at("in_contact").get<bool>();
      c.separation = jc.at("separation").get<double>();
      s.contacts.push_back(c);
    }
    return s;
  }

  void write_failure(const Error& e) const {
    std::ofstream out(cfg_.output_dir + "/failure.json", std::ios::binary);
    if (!out.good()) return;  // best effort; the original error wins
    nlohmann::json j = {{"epoch", epoch_},
                        {"exit_code", e.exit_code()},
                        {"message", e.what()}};
    out << j.dump() << "\n";
  }

  RunConfig cfg_;
  std::vector<DemoTrajectory> demos_;
  HandMorphology morph_;
  SimEnv env_;
  PpoConfig ppo_cfg_;
  GaussianPolicy policy_;
  Mlp value_;
  PpoOptimizerState opt_;
  AnnealState anneal_;
  RewardHistory history_;
  Rng roll_rng_{0};
  Rng shuffle_rng_{0};
  std::vector<EnvSlot> envs_;
  int epoch_ = 0;
  long env_steps_ = 0;
};

// ---------------------------------------------------------------------------
// Evaluation: pure rollouts from step 0, no shadow blending, no support
// wrench. The action source is pluggable so replay oracles can reuse the
// same loop; actions are clamped to the normalized range at the boundary.

using EvalActionFn = std::function<std::vector<double>(
    const std::vector<double>& obs, const DemoTrajectory& demo, int step,
    Rng& rng)>;

inline EvalReport run_eval(const EvalActionFn& act,
                           const HandMorphology& morph, const SimParams& sim,
                           const std::vector<DemoTrajectory>& demos,
                           int episodes_per_task, std::uint64_t seed,
                           int d_max, const CurriculumConfig& ccfg = {}) {
  require(!demos.empty(), ErrorCategory::contract,
          "evaluation needs at least one demo");
  require(episodes_per_task >= 1, ErrorCategory::contract,
          "episodes_per_task must be >= 1");
  SimEnv env(morph, sim);
  const std::array<double, 6> zero_wrench = {0, 0, 0, 0, 0, 0};
  std::vector<EpisodeTrace> traces;
  for (std::size_t d = 0; d < demos.size(); ++d) {
    const auto& demo = demos[d];
    for (int ep = 0; ep < episodes_per_task; ++ep) {
      Rng rng = rng_stream(seed, (d << 32) + static_cast<std::uint64_t>(ep));
      EpisodeTrace tr;
      tr.task = demo.task;
      SimState s = reset_from_demo(demo, 0);
      bool diverged = false;
      for (int t = 0; t + 1 < demo.t_max; ++t) {
        auto obs = build_observation(s, morph, d_max, demo, t);
        auto a = act(obs, demo, t, rng);
        for (double& v : a) v = std::clamp(v, -1.0, 1.0);
        try {
          auto [next, readings] =
              env.step(s, ActionDelta::from_flat(a, {morph.dof}), zero_wrench);
          s = std::move(next);
        } catch (const Error&) {
          diverged = true;  // divergence is an episode failure, not a crash
          break;
        }
        const auto& expert = demo.steps[t + 1];
        tr.errors.emplace_back(
            norm(s.object.position - expert.object.position),
            quat_angle(s.object.orientation, expert.object.orientation));
      }
      tr.success =
          !diverged && !tr.errors.empty() && inference_success(tr.errors, ccfg);
      traces.push_back(std::move(tr));
    }
  }
  return make_eval_report(traces);
}

inline EvalReport run_policy_eval(const GaussianPolicy& policy,
                                  const HandMorphology& morph,
                                  const SimParams& sim,
                                  const std::vector<DemoTrajectory>& demos,
                                  int episodes_per_task, std::uint64_t seed,
                                  int d_max,
                                  const CurriculumConfig& ccfg = {}) {
  // Inference uses the policy mean: the Gaussian is an exploration device,
  // not part of the learned controller.
  EvalActionFn act = [&policy](const std::vector<double>& obs,
                               const DemoTrajectory&, int, Rng&) {
    return policy.mean(obs);
  };
  return run_eval(act, morph, sim, demos, episodes_per_task, seed, d_max,
                  ccfg);
}

}  // namespace byd
