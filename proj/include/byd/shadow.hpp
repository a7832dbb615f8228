#pragma once

// Hybrid execution: epoch-scheduled blending of policy and expert actions,
// plus the decaying PD support wrench on the object.

#include <algorithm>
#include <cmath>

#include "byd/core.hpp"
#include "byd/simenv.hpp"

namespace byd {

struct ShadowConfig {
  int t_decay = 150;       // epochs
  double kp_start = 10.0;
  double kd_start = 3.0;
  double max_force = 50.0;   // N, cap on the support force magnitude
  double max_torque = 5.0;   // N m

  void validate() const {
    require(t_decay > 0, ErrorCategory::config, "t_decay must be positive");
    require(kp_start >= 0 && kd_start >= 0, ErrorCategory::config,
            "gains must be nonnegative");
  }
};

struct BlendWeights {
  double alpha = 0.0;
  double beta = 1.0;
};

inline BlendWeights beta_schedule(int epoch, const ShadowConfig& cfg) {
  require(epoch >= 0, ErrorCategory::contract, "epoch must be nonnegative");
  const double beta =
      std::max(0.0, 1.0 - static_cast<double>(epoch) / cfg.t_decay);
  return {1.0 - beta, beta};
}

inline ActionDelta blend_action(const ActionDelta& policy_action,
                                const ActionDelta& expert_action,
                                const BlendWeights& w) {
  require(policy_action.hands.size() == expert_action.hands.size(),
          ErrorCategory::contract, "blend: hand count mismatch");
  ActionDelta out = policy_action;
  for (std::size_t h = 0; h < out.hands.size(); ++h) {
    const auto& pe = expert_action.hands[h];
    auto& po = out.hands[h];
    require(po.joint_delta.size() == pe.joint_delta.size(),
            ErrorCategory::contract, "blend: joint dimension mismatch");
    for (int i = 0; i < 6; ++i)
      po.wrist_delta[i] = std::clamp(
          w.alpha * po.wrist_delta[i] + w.beta * pe.wrist_delta[i], -1.0, 1.0);
    for (std::size_t i = 0; i < po.joint_delta.size(); ++i)
      po.joint_delta[i] = std::clamp(
          w.alpha * po.joint_delta[i] + w.beta * pe.joint_delta[i], -1.0, 1.0);
  }
  return out;
}

inline double gain_decay(int epoch, const ShadowConfig& cfg) {
  return std::max(0.0, 1.0 - static_cast<double>(epoch) / cfg.t_decay);
}

// PD wrench toward the expert object trajectory. Orientation error enters
// as a rotation vector with the same gains. Gains are accelerations
// (1/s^2 and 1/s), scaled here by the object's mass and inertia: a raw
// force/torque PD with useful gains is violently unstable for a light
// object at this dt (kd * dt / inertia must stay well under 1).
inline std::array<double, 6> support_wrench(const RigidObjectState& object,
                                            const Vec3& expert_position,
                                            const Quat& expert_orientation,
                                            const Vec3& expert_linear_velocity,
                                            const Vec3& expert_angular_velocity,
                                            int epoch, const ShadowConfig& cfg) {
  const double decay = gain_decay(epoch, cfg);
  const double kp = cfg.kp_start * decay;
  const double kd = cfg.kd_start * decay;
  Vec3 force =
      object.mass * (kp * (expert_position - object.position) +
                     kd * (expert_linear_velocity - object.linear_velocity));
  // exact-match short circuit: the quaternion product below leaves rounding
  // residue in its vector part even for identical inputs, and any nonzero
  // torque breaks bit-exact expert replay
  Vec3 rv = {0, 0, 0};
  const Quat &a = expert_orientation, &b = object.orientation;
  if (!((a.w == b.w && a.x == b.x && a.y == b.y && a.z == b.z) ||
        (a.w == -b.w && a.x == -b.x && a.y == -b.y && a.z == -b.z)))
    rv = rotvec_from_quat(a * conj(b));
  Vec3 torque;
  for (int i = 0; i < 3; ++i)
    torque[i] =
        object.inertia_diag[i] *
        (kp * rv[i] +
         kd * (expert_angular_velocity[i] - object.angular_velocity[i]));
  const double fmag = norm(force);
  if (fmag > cfg.max_force) force = (cfg.max_force / fmag) * force;
  const double tmag = norm(torque);
  if (tmag > cfg.max_torque) torque = (cfg.max_torque / tmag) * torque;
  return {force[0], force[1], force[2], torque[0], torque[1], torque[2]};
}

}  // namespace byd
