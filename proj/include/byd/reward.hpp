#pragma once

// Dense imitation reward, sparse goal reward, and the annealed combination
// driven by sliding-window statistics.

#include <cmath>
#include <deque>
#include <vector>

#include "byd/core.hpp"
#include "byd/demo.hpp"
#include "byd/simenv.hpp"

namespace byd {

struct RewardTerm {
  double weight = 0.0;
  double sensitivity = 1.0;
};

struct RewardConfig {
  RewardTerm eef_pos{0.1, 40.0};
  RewardTerm eef_rot{0.6, 1.0};
  RewardTerm eef_vel{0.1, 1.0};
  RewardTerm eef_ang_vel{0.05, 1.0};
  RewardTerm joints_vel{0.1, 0.1};
  RewardTerm tip_thumb{0.9, 100.0};
  RewardTerm tip_index{0.8, 90.0};
  RewardTerm tip_middle{0.75, 80.0};
  RewardTerm tip_ring{0.6, 60.0};
  RewardTerm tip_little{0.6, 60.0};
  RewardTerm contact_force{1.0, 1.0};
  RewardTerm obj_pos{5.0, 80.0};
  RewardTerm obj_rot{1.0, 3.0};
  RewardTerm obj_vel{0.1, 1.0};
  RewardTerm obj_ang_vel{0.1, 1.0};
  double power_penalty_weight = 0.5;
  double epsilon = 1e-6;

  void validate() const {
    const RewardTerm* terms[] = {&eef_pos,   &eef_rot,    &eef_vel,
                                 &eef_ang_vel, &joints_vel, &tip_thumb,
                                 &tip_index, &tip_middle, &tip_ring,
                                 &tip_little, &contact_force, &obj_pos,
                                 &obj_rot,   &obj_vel,    &obj_ang_vel};
    for (const auto* t : terms) {
      require(t->weight >= 0, ErrorCategory::config,
              "reward weights must be nonnegative");
      require(t->sensitivity > 0, ErrorCategory::config,
              "reward sensitivities must be positive");
    }
    require(epsilon > 0, ErrorCategory::config, "epsilon must be positive");
  }

  // Fingertip term by role. Hands with fewer fingers inherit the priority
  // ordering: thumb, index, middle, ring, little.
  const RewardTerm& tip_term(FingerRole role, int finger_index) const {
    switch (role) {
      case FingerRole::thumb: return tip_thumb;
      case FingerRole::index: return tip_index;
      case FingerRole::middle: return tip_middle;
      case FingerRole::ring: return tip_ring;
      case FingerRole::little: return tip_little;
      case FingerRole::generic: {
        const RewardTerm* order[] = {&tip_thumb, &tip_index, &tip_middle,
                                     &tip_ring, &tip_little};
        return *order[std::min(finger_index, 4)];
      }
    }
    return tip_thumb;
  }
};

struct RewardBreakdown {
  double eef_pos = 0, eef_rot = 0, eef_vel = 0, eef_ang_vel = 0;
  double joints_vel = 0;
  std::vector<double> fingertips;
  double contact_force = 0;
  double obj_pos = 0, obj_rot = 0, obj_vel = 0, obj_ang_vel = 0;
  double power_penalty = 0;
  double total = 0;
};

namespace detail {
inline double mean_abs_err(const Vec3& a, const Vec3& b) {
  return (std::abs(a[0] - b[0]) + std::abs(a[1] - b[1]) +
          std::abs(a[2] - b[2])) /
         3.0;
}
}  // namespace detail

// Per-step dense imitation reward against the aligned expert record.
// `tips` are the current fingertip world positions; `applied_torques` the
// servo torques from the step that produced `state`.
inline RewardBreakdown imitation_reward(const SimState& state,
                                        const std::vector<Vec3>& tips,
                                        const DemoStep& expert,
                                        const std::vector<double>& applied_torques,
                                        const RewardConfig& cfg,
                                        const std::vector<FingerRole>& roles) {
  require(tips.size() == expert.fingertips.size(), ErrorCategory::contract,
          "fingertip count mismatch between state and expert record");
  const auto& hand = state.hands[0];
  RewardBreakdown out;
  auto kernel = [](const RewardTerm& t, double err) {
    return std::exp(-t.sensitivity * err);
  };

  out.eef_pos = kernel(cfg.eef_pos, norm(hand.wrist.position - expert.wrist.position));
  out.eef_rot = kernel(cfg.eef_rot,
                       quat_angle(hand.wrist.orientation, expert.wrist.orientation));
  out.eef_vel = kernel(cfg.eef_vel,
                       detail::mean_abs_err(hand.wrist.linear_velocity,
                                            expert.wrist.linear_velocity));
  out.eef_ang_vel = kernel(cfg.eef_ang_vel,
                           detail::mean_abs_err(hand.wrist.angular_velocity,
                                                expert.wrist.angular_velocity));
  {
    double acc = 0;
    const std::size_t n = hand.joints.velocities.size();
    for (std::size_t j = 0; j < n; ++j)
      acc += std::abs(hand.joints.velocities[j] - expert.joints.velocities[j]);
    out.joints_vel = kernel(cfg.joints_vel, n > 0 ? acc / n : 0.0);
  }
  out.fingertips.resize(tips.size());
  double tip_weighted = 0;
  for (std::size_t f = 0; f < tips.size(); ++f) {
    const auto& term = cfg.tip_term(roles[f], static_cast<int>(f));
    out.fingertips[f] = kernel(term, norm(tips[f] - expert.fingertips[f]));
    tip_weighted += term.weight * out.fingertips[f];
  }
  {
    Vec3 f_tips = {0, 0, 0};
    for (const auto& c : state.contacts) f_tips += c.force;
    out.contact_force = std::exp(-cfg.contact_force.sensitivity /
                                 (norm(f_tips) + cfg.epsilon));
  }
  out.obj_pos = kernel(cfg.obj_pos,
                       norm(state.object.position - expert.object.position));
  out.obj_rot = kernel(cfg.obj_rot,
                       quat_angle(state.object.orientation,
                                  expert.object.orientation));
  out.obj_vel = kernel(cfg.obj_vel,
                       detail::mean_abs_err(state.object.linear_velocity,
                                            expert.object.linear_velocity));
  out.obj_ang_vel = kernel(cfg.obj_ang_vel,
                           detail::mean_abs_err(state.object.angular_velocity,
                                                expert.object.angular_velocity));
  {
    double p = 0;
    for (std::size_t j = 0; j < applied_torques.size(); ++j)
      p += std::abs(applied_torques[j] * hand.joints.velocities[j]);
    out.power_penalty = p;
  }

  out.total = cfg.eef_pos.weight * out.eef_pos +
              cfg.eef_rot.weight * out.eef_rot +
              cfg.eef_vel.weight * out.eef_vel +
              cfg.eef_ang_vel.weight * out.eef_ang_vel +
              cfg.joints_vel.weight * out.joints_vel + tip_weighted +
              cfg.contact_force.weight * out.contact_force +
              cfg.obj_pos.weight * out.obj_pos +
              cfg.obj_rot.weight * out.obj_rot +
              cfg.obj_vel.weight * out.obj_vel +
              cfg.obj_ang_vel.weight * out.obj_ang_vel -
              cfg.power_penalty_weight * out.power_penalty;
  return out;
}

// ---------------------------------------------------------------------------
// Annealing

struct AnnealConfig {
  double x = 0.05;
  double y = 1.0;
  int window = 100;          // M
  int t_decay = 150;         // epochs
  double delta_m = 0.55;
  double delta_sr = 0.7;
  double z = 0.2;
  double s_bonus = 20.0;

  void validate() const {
    require(z > 0 && z < 1, ErrorCategory::config, "z must be in (0,1)");
    require(delta_sr > 0 && delta_sr <= 1, ErrorCategory::config,
            "delta_sr must be in (0,1]");
    require(window >= 1, ErrorCategory::config, "window must be >= 1");
  }
};

struct AnnealState {
  std::deque<double> imi_window;
  std::deque<double> suc_window;
  double r_bar_imi = 0.0;
  double sr_bar = 0.0;
  double q_e = 0.0;
  double w_imi = 1.0;
  double w_goal = 0.0;
};

inline double goal_reward(bool success, const AnnealConfig& cfg) {
  return success ? cfg.s_bonus : 0.0;
}

inline void update_windows(AnnealState& s, double episode_mean_imitation,
                           bool success, const AnnealConfig& cfg) {
  s.imi_window.push_back(episode_mean_imitation);
  s.suc_window.push_back(success ? 1.0 : 0.0);
  while (static_cast<int>(s.imi_window.size()) > cfg.window)
    s.imi_window.pop_front();
  while (static_cast<int>(s.suc_window.size()) > cfg.window)
    s.suc_window.pop_front();
  double imi = 0, suc = 0;
  for (double v : s.imi_window) imi += v;
  for (double v : s.suc_window) suc += v;
  s.r_bar_imi = s.imi_window.empty() ? 0.0 : imi / s.imi_window.size();
  s.sr_bar = s.suc_window.empty() ? 0.0 : suc / s.suc_window.size();
  s.q_e = cfg.x * s.r_bar_imi + cfg.y * s.sr_bar;
}

// Phase-1 guard holds while e <= T_decay or the composite metric has not
// cleared delta_m; afterwards the weight decays with the success rate down
// to the floor z.
inline double imitation_weight(int epoch, AnnealState& s,
                               const AnnealConfig& cfg) {
  double w;
  if (epoch <= cfg.t_decay || s.q_e <= cfg.delta_m) {
    w = 1.0;
  } else {
    w = std::max(cfg.z, 1.0 - s.sr_bar / cfg.delta_sr);
  }
  s.w_imi = w;
  s.w_goal = 1.0 - w;
  return w;
}

// Total per-step reward; the goal bonus only lands on the terminal step.
inline double total_reward(long t, long horizon_end, double r_imi, bool success,
                           double w_imi, const AnnealConfig& cfg) {
  const double w_goal = (t == horizon_end) ? 1.0 - w_imi : 0.0;
  return w_imi * r_imi + w_goal * goal_reward(success, cfg);
}

}  // namespace byd
