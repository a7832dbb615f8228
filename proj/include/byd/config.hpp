#pragma once

// Run configuration: one JSON file aggregating every module's knobs, with
// BYD_<SECTION>_<KEY> environment overrides and a stable content hash used
// to guard checkpoint resumes.

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "byd/core.hpp"
#include "byd/curriculum.hpp"
#include "byd/morphology.hpp"
#include "byd/earlystop.hpp"
#include "byd/optim.hpp"
#include "byd/retarget.hpp"
#include "byd/reward.hpp"
#include "byd/shadow.hpp"
#include "byd/simenv.hpp"

namespace byd {

struct RunConfig {
  // run section
  int num_envs = 16;
  int total_epochs = 300;
  std::uint64_t seed = 0;
  std::vector<std::string> demos;
  std::string morphology = "two_finger";  // preset name or a chain .json path
  std::string output_dir = "run";
  int checkpoint_every = 25;  // epochs
  int d_max = 22;
  int l_min = 32;            // minimum remaining horizon for sampled starts
  int eval_episodes = 100;
  bool imitation_only = false;  // ablation: w_goal forced 0, entropy/bound off
  bool early_stop_enabled = true;

  SimParams sim;
  RewardConfig reward;
  AnnealConfig anneal;
  ShadowConfig shadow;
  CurriculumConfig curriculum;
  EarlyStopConfig earlystop;
  PpoConfig ppo;
  RetargetConfig retarget;

  void validate() const {
    require(num_envs >= 1, ErrorCategory::config, "num_envs must be >= 1");
    require(total_epochs >= 0, ErrorCategory::config,
            "total_epochs must be >= 0");
    require(checkpoint_every >= 1, ErrorCategory::config,
            "checkpoint_every must be >= 1");
    require(d_max >= 1, ErrorCategory::config, "d_max must be >= 1");
    require(l_min >= 1, ErrorCategory::config, "l_min must be >= 1");
    require(eval_episodes >= 1, ErrorCategory::config,
            "eval_episodes must be >= 1");
    require(!morphology.empty(), ErrorCategory::config,
            "morphology must be set");
    reward.validate();
    anneal.validate();
    shadow.validate();
    curriculum.validate();
    earlystop.validate();
    ppo.validate();
    retarget.validate();
  }
};

namespace detail {

inline nlohmann::json term_json(const RewardTerm& t) {
  return {{"weight", t.weight}, {"sensitivity", t.sensitivity}};
}
inline RewardTerm term_from_json(const nlohmann::json& j) {
  return {j.at("weight").get<double>(), j.at("sensitivity").get<double>()};
}

}  // namespace detail

inline nlohmann::json run_config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["run"] = {{"num_envs", c.num_envs},
              {"total_epochs", c.total_epochs},
              {"seed", c.seed},
              {"demos", c.demos},
              {"morphology", c.morphology},
              {"output_dir", c.output_dir},
              {"checkpoint_every", c.checkpoint_every},
              {"d_max", c.d_max},
              {"l_min", c.l_min},
              {"eval_episodes", c.eval_episodes},
              {"imitation_only", c.imitation_only},
              {"early_stop_enabled", c.early_stop_enabled}};
  const auto& s = c.sim;
  j["sim"] = {{"dt", s.dt},
              {"gravity", s.gravity},
              {"wrist_translation_scale", s.wrist_translation_scale},
              {"wrist_rotation_scale", s.wrist_rotation_scale},
              {"joint_delta_scale", s.joint_delta_scale},
              {"contact_stiffness", s.contact_stiffness},
              {"contact_damping", s.contact_damping},
              {"friction_coef", s.friction_coef},
              {"torsion_coef", s.torsion_coef},
              {"tip_radius", s.tip_radius},
              {"palm_radius", s.palm_radius},
              {"joint_kp", s.joint_kp},
              {"joint_kd", s.joint_kd},
              {"joint_inertia", s.joint_inertia},
              {"joint_torque_limit", s.joint_torque_limit}};
  const auto& r = c.reward;
  j["reward"] = {{"eef_pos", detail::term_json(r.eef_pos)},
                 {"eef_rot", detail::term_json(r.eef_rot)},
                 {"eef_vel", detail::term_json(r.eef_vel)},
                 {"eef_ang_vel", detail::term_json(r.eef_ang_vel)},
                 {"joints_vel", detail::term_json(r.joints_vel)},
                 {"tip_thumb", detail::term_json(r.tip_thumb)},
                 {"tip_index", detail::term_json(r.tip_index)},
                 {"tip_middle", detail::term_json(r.tip_middle)},
                 {"tip_ring", detail::term_json(r.tip_ring)},
                 {"tip_little", detail::term_json(r.tip_little)},
                 {"contact_force", detail::term_json(r.contact_force)},
                 {"obj_pos", detail::term_json(r.obj_pos)},
                 {"obj_rot", detail::term_json(r.obj_rot)},
                 {"obj_vel", detail::term_json(r.obj_vel)},
                 {"obj_ang_vel", detail::term_json(r.obj_ang_vel)},
                 {"power_penalty_weight", r.power_penalty_weight},
                 {"epsilon", r.epsilon}};
  const auto& a = c.anneal;
  j["anneal"] = {{"x", a.x},
                 {"y", a.y},
                 {"window", a.window},
                 {"t_decay", a.t_decay},
                 {"delta_m", a.delta_m},
                 {"delta_sr", a.delta_sr},
                 {"z", a.z},
                 {"s_bonus", a.s_bonus}};
  const auto& sh = c.shadow;
  j["shadow"] = {{"t_decay", sh.t_decay},
                 {"kp_start", sh.kp_start},
                 {"kd_start", sh.kd_start},
                 {"max_force", sh.max_force},
                 {"max_torque", sh.max_torque}};
  const auto& cu = c.curriculum;
  j["curriculum"] = {{"delta_pos", cu.delta_pos},
                     {"delta_rot", cu.delta_rot},
                     {"delta_finger", cu.delta_finger},
                     {"eps_coll", cu.eps_coll},
                     {"t_min", cu.t_min},
                     {"t_stable", cu.t_stable},
                     {"t_tighten", cu.t_tighten},
                     {"s_final", cu.s_final},
                     {"n_min_unimanual", cu.n_min_unimanual},
                     {"n_min_bimanual", cu.n_min_bimanual},
                     {"sr_phase_threshold", cu.sr_phase_threshold},
                     {"inference_pos_limit", cu.inference_pos_limit},
                     {"inference_rot_limit", cu.inference_rot_limit}};
  const auto& e = c.earlystop;
  j["earlystop"] = {{"windows", e.windows},
                    {"delta_early", e.delta_early},
                    {"delta_slope", e.delta_slope}};
  const auto& p = c.ppo;
  j["ppo"] = {{"lr", p.lr},
              {"minibatch", p.minibatch},
              {"horizon", p.horizon},
              {"opt_epochs", p.opt_epochs},
              {"gamma", p.gamma},
              {"lam", p.lam},
              {"clip", p.clip},
              {"entropy_start", p.entropy_start},
              {"entropy_decay", p.entropy_decay},
              {"c_vf", p.c_vf},
              {"c_bound", p.c_bound},
              {"bound", p.bound},
              {"max_grad_norm", p.max_grad_norm},
              {"log_std_init", p.log_std_init}};
  const auto& rt = c.retarget;
  j["retarget"] = {{"lr_wrist", rt.lr_wrist},
                   {"lr_joints", rt.lr_joints},
                   {"max_iters", rt.max_iters},
                   {"early_stop_eps", rt.early_stop_eps},
                   {"fd_step", rt.fd_step},
                   {"max_restarts", rt.max_restarts},
                   {"accept_objective", rt.accept_objective},
                   {"lm_attempts", rt.lm_attempts}};
  return j;
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    const auto& r = j.at("run");
    c.num_envs = r.at("num_envs").get<int>();
    c.total_epochs = r.at("total_epochs").get<int>();
    c.seed = r.at("seed").get<std::uint64_t>();
    c.demos = r.at("demos").get<std::vector<std::string>>();
    c.morphology = r.at("morphology").get<std::string>();
    c.output_dir = r.at("output_dir").get<std::string>();
    c.checkpoint_every = r.at("checkpoint_every").get<int>();
    c.d_max = r.at("d_max").get<int>();
    c.l_min = r.at("l_min").get<int>();
    c.eval_episodes = r.at("eval_episodes").get<int>();
    c.imitation_only = r.at("imitation_only").get<bool>();
    c.early_stop_enabled = r.at("early_stop_enabled").get<bool>();

    const auto& s = j.at("sim");
    c.sim.dt = s.at("dt").get<double>();
    c.sim.gravity = s.at("gravity").get<double>();
    c.sim.wrist_translation_scale = s.at("wrist_translation_scale").get<double>();
    c.sim.wrist_rotation_scale = s.at("wrist_rotation_scale").get<double>();
    c.sim.joint_delta_scale = s.at("joint_delta_scale").get<double>();
    c.sim.contact_stiffness = s.at("contact_stiffness").get<double>();
    c.sim.contact_damping = s.at("contact_damping").get<double>();
    c.sim.friction_coef = s.at("friction_coef").get<double>();
    c.sim.torsion_coef = s.at("torsion_coef").get<double>();
    c.sim.tip_radius = s.at("tip_radius").get<double>();
    c.sim.palm_radius = s.at("palm_radius").get<double>();
    c.sim.joint_kp = s.at("joint_kp").get<double>();
    c.sim.joint_kd = s.at("joint_kd").get<double>();
    c.sim.joint_inertia = s.at("joint_inertia").get<double>();
    c.sim.joint_torque_limit = s.at("joint_torque_limit").get<double>();

    const auto& rw = j.at("reward");
    c.reward.eef_pos = detail::term_from_json(rw.at("eef_pos"));
    c.reward.eef_rot = detail::term_from_json(rw.at("eef_rot"));
    c.reward.eef_vel = detail::term_from_json(rw.at("eef_vel"));
    c.reward.eef_ang_vel = detail::term_from_json(rw.at("eef_ang_vel"));
    c.reward.joints_vel = detail::term_from_json(rw.at("joints_vel"));
    c.reward.tip_thumb = detail::term_from_json(rw.at("tip_thumb"));
    c.reward.tip_index = detail::term_from_json(rw.at("tip_index"));
    c.reward.tip_middle = detail::term_from_json(rw.at("tip_middle"));
    c.reward.tip_ring = detail::term_from_json(rw.at("tip_ring"));
    c.reward.tip_little = detail::term_from_json(rw.at("tip_little"));
    c.reward.contact_force = detail::term_from_json(rw.at("contact_force"));
    c.reward.obj_pos = detail::term_from_json(rw.at("obj_pos"));
    c.reward.obj_rot = detail::term_from_json(rw.at("obj_rot"));
    c.reward.obj_vel = detail::term_from_json(rw.at("obj_vel"));
    c.reward.obj_ang_vel = detail::term_from_json(rw.at("obj_ang_vel"));
    c.reward.power_penalty_weight = rw.at("power_penalty_weight").get<double>();
    c.reward.epsilon = rw.at("epsilon").get<double>();

    const auto& a = j.at("anneal");
    c.anneal.x = a.at("x").get<double>();
    c.anneal.y = a.at("y").get<double>();
    c.anneal.window = a.at("window").get<int>();
    c.anneal.t_decay = a.at("t_decay").get<int>();
    c.anneal.delta_m = a.at("delta_m").get<double>();
    c.anneal.delta_sr = a.at("delta_sr").get<double>();
    c.anneal.z = a.at("z").get<double>();
    c.anneal.s_bonus = a.at("s_bonus").get<double>();

    const auto& sh = j.at("shadow");
    c.shadow.t_decay = sh.at("t_decay").get<int>();
    c.shadow.kp_start = sh.at("kp_start").get<double>();
    c.shadow.kd_start = sh.at("kd_start").get<double>();
    c.shadow.max_force = sh.at("max_force").get<double>();
    c.shadow.max_torque = sh.at("max_torque").get<double>();

    const auto& cu = j.at("curriculum");
    c.curriculum.delta_pos = cu.at("delta_pos").get<double>();
    c.curriculum.delta_rot = cu.at("delta_rot").get<double>();
    c.curriculum.delta_finger = cu.at("delta_finger").get<double>();
    c.curriculum.eps_coll = cu.at("eps_coll").get<double>();
    c.curriculum.t_min = cu.at("t_min").get<int>();
    c.curriculum.t_stable = cu.at("t_stable").get<int>();
    c.curriculum.t_tighten = cu.at("t_tighten").get<double>();
    c.curriculum.s_final = cu.at("s_final").get<double>();
    c.curriculum.n_min_unimanual = cu.at("n_min_unimanual").get<int>();
    c.curriculum.n_min_bimanual = cu.at("n_min_bimanual").get<int>();
    c.curriculum.sr_phase_threshold = cu.at("sr_phase_threshold").get<double>();
    c.curriculum.inference_pos_limit = cu.at("inference_pos_limit").get<double>();
    c.curriculum.inference_rot_limit = cu.at("inference_rot_limit").get<double>();

    const auto& e = j.at("earlystop");
    c.earlystop.windows = e.at("windows").get<std::vector<int>>();
    c.earlystop.delta_early = e.at("delta_early").get<int>();
    c.earlystop.delta_slope = e.at("delta_slope").get<double>();

    const auto& p = j.at("ppo");
    c.ppo.lr = p.at("lr").get<double>();
    c.ppo.minibatch = p.at("minibatch").get<int>();
    c.ppo.horizon = p.at("horizon").get<int>();
    c.ppo.opt_epochs = p.at("opt_epochs").get<int>();
    c.ppo.gamma = p.at("gamma").get<double>();
    c.ppo.lam = p.at("lam").get<double>();
    c.ppo.clip = p.at("clip").get<double>();
    c.ppo.entropy_start = p.at("entropy_start").get<double>();
    c.ppo.entropy_decay = p.at("entropy_decay").get<int>();
    c.ppo.c_vf = p.at("c_vf").get<double>();
    c.ppo.c_bound = p.at("c_bound").get<double>();
    c.ppo.bound = p.at("bound").get<double>();
    c.ppo.max_grad_norm = p.at("max_grad_norm").get<double>();
    c.ppo.log_std_init = p.at("log_std_init").get<double>();

    const auto& rt = j.at("retarget");
    c.retarget.lr_wrist = rt.at("lr_wrist").get<double>();
    c.retarget.lr_joints = rt.at("lr_joints").get<double>();
    c.retarget.max_iters = rt.at("max_iters").get<int>();
    c.retarget.early_stop_eps = rt.at("early_stop_eps").get<double>();
    c.retarget.fd_step = rt.at("fd_step").get<double>();
    c.retarget.max_restarts = rt.at("max_restarts").get<int>();
    c.retarget.accept_objective = rt.at("accept_objective").get<double>();
    c.retarget.lm_attempts = rt.at("lm_attempts").get<int>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCategory::config,
                "bad run config: " + std::string(ex.what()));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Environment overrides: BYD_<SECTION>_<KEY>, value parsed as JSON when
// possible, taken verbatim as a string otherwise. Keys are enumerated from
// the config itself, so unknown variables are simply ignored.

inline void apply_env_overrides(nlohmann::json& j) {
  for (auto& [section, body] : j.items()) {
    for (auto& [key, value] : body.items()) {
      std::string name = "BYD_" + section + "_" + key;
      for (auto& ch : name) ch = static_cast<char>(std::toupper(ch));
      const char* env = std::getenv(name.c_str());
      if (!env) continue;
      nlohmann::json parsed = nlohmann::json::parse(env, nullptr, false);
      if (parsed.is_discarded())
        value = std::string(env);
      else
        value = parsed;
    }
  }
}

// Partial config files are allowed: defaults fill anything not mentioned.
inline nlohmann::json merge_over_defaults(const nlohmann::json& user) {
  nlohmann::json full = run_config_to_json(RunConfig{});
  require(user.is_object(), ErrorCategory::config,
          "run config must be a JSON object");
  for (const auto& [section, body] : user.items()) {
    require(full.contains(section), ErrorCategory::config,
            "unknown config section: " + section);
    require(body.is_object(), ErrorCategory::config,
            "config section must be an object: " + section);
    for (const auto& [key, value] : body.items()) {
      require(full[section].contains(key), ErrorCategory::config,
              "unknown config key: " + section + "." + key);
      full[section][key] = value;
    }
  }
  return full;
}

inline RunConfig load_run_config(const std::string& path,
                                 bool check_files = true) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCategory::io, "cannot open config file: " + path);
  nlohmann::json user;
  try {
    user = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCategory::config,
                "config is not valid JSON: " + std::string(ex.what()));
  }
  nlohmann::json full = merge_over_defaults(user);
  apply_env_overrides(full);
  RunConfig cfg = run_config_from_json(full);
  cfg.validate();
  if (check_files) {
    for (const auto& d : cfg.demos)
      require(std::filesystem::exists(d), ErrorCategory::io,
              "demo file does not exist: " + d);
    const bool preset =
        std::find(preset_names().begin(), preset_names().end(),
                  cfg.morphology) != preset_names().end();
    require(preset || std::filesystem::exists(cfg.morphology),
            ErrorCategory::io,
            "morphology is neither a preset nor an existing file: " +
                cfg.morphology);
  }
  return cfg;
}

inline HandMorphology load_morphology(const std::string& name_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    return preset_morphology(name_or_path);
  std::ifstream in(name_or_path, std::ios::binary);
  require(in.good(), ErrorCategory::io,
          "cannot open morphology file: " + name_or_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCategory::io,
                "morphology is not valid JSON: " + std::string(ex.what()));
  }
  return morphology_from_json(j);
}

// FNV-1a over the canonical dump; stable across platforms and runs. Keys
// that do not influence the training trajectory (where to write, how long
// to run, how often to snapshot) are excluded so a checkpoint can be
// resumed with a longer epoch budget or a different output directory.
inline std::uint64_t config_hash(const RunConfig& cfg) {
  nlohmann::json j = run_config_to_json(cfg);
  j["run"].erase("total_epochs");
  j["run"].erase("output_dir");
  j["run"].erase("checkpoint_every");
  j["run"].erase("eval_episodes");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace byd
