#pragma once

// Phase-dependent success / failure determination with the tightening
// scale factor, plus the fixed inference-time criteria.

#include <cmath>
#include <vector>

#include "byd/core.hpp"
#include "byd/demo.hpp"
#include "byd/simenv.hpp"

namespace byd {

struct CurriculumConfig {
  double delta_pos = 0.05;      // m
  double delta_rot = 0.6;       // rad
  double delta_finger = 0.05;   // m
  double eps_coll = 0.005;      // m
  int t_min = 5;                // steps
  int t_stable = 3;             // steps
  double t_tighten = 1.0e5;     // env-steps
  double s_final = 0.7;
  int n_min_unimanual = 2;
  int n_min_bimanual = 3;
  double sr_phase_threshold = 0.7;
  double inference_pos_limit = 0.03;                  // m
  double inference_rot_limit = 30.0 * M_PI / 180.0;   // rad

  void validate() const {
    require(s_final > 0 && s_final <= 1, ErrorCategory::config,
            "s_final must be in (0,1]");
    require(t_stable >= 0, ErrorCategory::config, "t_stable must be >= 0");
    require(n_min_unimanual >= 1 && n_min_bimanual >= 1, ErrorCategory::config,
            "n_min must be >= 1");
    require(t_tighten > 0, ErrorCategory::config, "t_tighten must be positive");
  }
};

enum class FailureReason {
  none,
  obj_pos,
  obj_rot,
  fingertip,
  unintended_contact,
  contact_count
};

inline const char* failure_reason_name(FailureReason r) {
  switch (r) {
    case FailureReason::none: return "none";
    case FailureReason::obj_pos: return "obj_pos";
    case FailureReason::obj_rot: return "obj_rot";
    case FailureReason::fingertip: return "fingertip";
    case FailureReason::unintended_contact: return "unintended_contact";
    case FailureReason::contact_count: return "contact_count";
  }
  return "none";
}

struct PhaseVerdict {
  bool failed = false;
  FailureReason failure_reason = FailureReason::none;
  bool success = false;
};

// Exponential tightening: S(0)=1, S(inf)=s_final, base 2e.
inline double scale_factor(double env_steps, const CurriculumConfig& cfg) {
  require(env_steps >= 0, ErrorCategory::contract,
          "env_steps must be nonnegative");
  const double base = 2.0 * M_E;
  return std::pow(base, -env_steps / cfg.t_tighten) * (1.0 - cfg.s_final) +
         cfg.s_final;
}

// One-step verdict against the aligned expert record. `tips` are current
// fingertip positions; `tip_separations` the signed tip/object separations.
// Key fingers (thumb/index/middle) are tracked in the early phase; whichever
// of those roles exist on the hand.
// `expert_near_contact[f]` is the c_target flag: the expert tip touches the
// object at this step or sits inside the proximity margin itself, so a
// nearby policy tip is an intended contact.
inline PhaseVerdict check_step(const SimState& state,
                               const std::vector<Vec3>& tips,
                               const std::vector<double>& tip_separations,
                               const DemoStep& expert,
                               const std::vector<bool>& expert_near_contact,
                               const std::vector<FingerRole>& roles,
                               long t, long t_max, double scale,
                               double phase_sr, bool bimanual,
                               const CurriculumConfig& cfg) {
  PhaseVerdict v;
  const double s3 = scale * scale * scale;
  const bool early = phase_sr < cfg.sr_phase_threshold;

  if (t >= cfg.t_min) {
    const double pos_err = norm(state.object.position - expert.object.position);
    const double rot_err =
        quat_angle(state.object.orientation, expert.object.orientation);
    if (pos_err > cfg.delta_pos * s3) {
      v.failed = true;
      v.failure_reason = FailureReason::obj_pos;
    } else if (rot_err > cfg.delta_rot * s3) {
      v.failed = true;
      v.failure_reason = FailureReason::obj_rot;
    } else if (early) {
      for (std::size_t f = 0; f < tips.size() && !v.failed; ++f) {
        const bool key = roles[f] == FingerRole::thumb ||
                         roles[f] == FingerRole::index ||
                         roles[f] == FingerRole::middle;
        if (key &&
            norm(tips[f] - expert.fingertips[f]) > cfg.delta_finger * scale) {
          v.failed = true;
          v.failure_reason = FailureReason::fingertip;
        }
      }
      if (!v.failed) {
        for (std::size_t f = 0; f < tip_separations.size(); ++f) {
          if (tip_separations[f] < cfg.eps_coll && !expert_near_contact[f]) {
            v.failed = true;
            v.failure_reason = FailureReason::unintended_contact;
            break;
          }
        }
      }
    } else {
      int n_contact = 0;
      for (const auto& c : state.contacts)
        if (c.in_contact) ++n_contact;
      const int n_min = bimanual ? cfg.n_min_bimanual : cfg.n_min_unimanual;
      if (n_contact < n_min) {
        v.failed = true;
        v.failure_reason = FailureReason::contact_count;
      }
    }
  }

  v.success = !v.failed && (t + 1 + cfg.t_stable >= t_max);
  return v;
}

// Inference-time episode success: every step within the fixed limits.
inline bool inference_success(const std::vector<std::pair<double, double>>& trace,
                              const CurriculumConfig& cfg = {}) {
  require(!trace.empty(), ErrorCategory::contract,
          "inference trace must be nonempty");
  for (const auto& [pos_err, rot_err] : trace) {
    if (pos_err > cfg.inference_pos_limit) return false;
    if (rot_err >= cfg.inference_rot_limit) return false;
  }
  return true;
}

}  // namespace byd
