#pragma once

// Keypoint retargeting: per-frame weighted IK from source keypoint
// trajectories to wrist pose + joint angles, solved with Adam over
// finite-difference gradients.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "byd/core.hpp"
#include "byd/morphology.hpp"

namespace byd {

// ---------------------------------------------------------------------------
// Continuous 6D rotation representation: two raw 3-vectors, orthonormalized
// by Gram-Schmidt. Scale invariant; degenerate (parallel/zero) input errors.

inline Mat3 rotation6_to_matrix(const std::array<double, 6>& r6) {
  const Vec3 a1 = {r6[0], r6[1], r6[2]};
  const Vec3 a2 = {r6[3], r6[4], r6[5]};
  const double n1 = norm(a1);
  require(n1 > 1e-9, ErrorCategory::numeric,
          "degenerate 6d rotation: first axis is near zero");
  const Vec3 b1 = (1.0 / n1) * a1;
  Vec3 u2 = a2 - dot(a2, b1) * b1;
  const double n2 = norm(u2);
  require(n2 > 1e-9, ErrorCategory::numeric,
          "degenerate 6d rotation: axes are near parallel");
  const Vec3 b2 = (1.0 / n2) * u2;
  const Vec3 b3 = cross(b1, b2);
  // columns are b1 b2 b3
  return {{{b1[0], b2[0], b3[0]}, {b1[1], b2[1], b3[1]}, {b1[2], b2[2], b3[2]}}};
}

inline Quat quat_from_rotation6(const std::array<double, 6>& r6) {
  return quat_from_mat(rotation6_to_matrix(r6));
}

inline std::array<double, 6> rotation6_from_quat(const Quat& q) {
  const Vec3 c0 = rotate(q, {1, 0, 0});
  const Vec3 c1 = rotate(q, {0, 1, 0});
  return {c0[0], c0[1], c0[2], c1[0], c1[1], c1[2]};
}

// ---------------------------------------------------------------------------
// Problem definition

struct KeypointEntry {
  int link = 0;        // robot link whose tip realizes the keypoint
  std::string source;  // keypoint id in the source data
  double weight = 1.0;
};

struct KeypointMapping {
  std::vector<KeypointEntry> entries;

  void validate(const KinematicChain& chain) const {
    require(!entries.empty(), ErrorCategory::config,
            "keypoint mapping is empty");
    for (const auto& e : entries) {
      require(e.link >= 0 && e.link < static_cast<int>(chain.links.size()),
              ErrorCategory::config,
              "keypoint mapping link index out of range");
      require(std::isfinite(e.weight) && e.weight >= 0, ErrorCategory::config,
              "keypoint weights must be finite and non-negative");
    }
  }
};

// Default hierarchy: wrist 1, intermediate finger links 3, fingertips 25.
inline KeypointMapping default_mapping(const KinematicChain& chain,
                                       double w_wrist = 1.0,
                                       double w_intermediate = 3.0,
                                       double w_fingertip = 25.0) {
  KeypointMapping m;
  m.entries.push_back({0, "wrist", w_wrist});
  for (std::size_t f = 0; f < chain.fingertip_links.size(); ++f) {
    const auto& group = chain.fingertip_links[f];
    for (std::size_t k = 0; k < group.size(); ++k) {
      const bool tip = k + 1 == group.size();
      m.entries.push_back({group[k],
                           "f" + std::to_string(f) + "_k" + std::to_string(k),
                           tip ? w_fingertip : w_intermediate});
    }
  }
  return m;
}

struct RetargetProblem {
  KinematicChain chain;
  KeypointMapping mapping;
  std::vector<std::vector<Vec3>> targets;  // per frame, aligned with mapping

  int frame_count() const { return static_cast<int>(targets.size()); }

  void validate() const {
    chain.validate();
    mapping.validate(chain);
    require(!targets.empty(), ErrorCategory::contract,
            "retarget problem has no frames");
    for (const auto& f : targets)
      require(f.size() == mapping.entries.size(), ErrorCategory::contract,
              "frame target count does not match the keypoint mapping");
  }
};

struct RetargetVars {
  Vec3 wrist_position = {0, 0, 0};
  std::array<double, 6> wrist_rotation6 = {1, 0, 0, 0, 1, 0};
  std::vector<double> q;  // active joints only; mimics follow their masters
};

struct RetargetConfig {
  // step-size references for the two parameter blocks; the solver turns the
  // ratio into extra damping on the slower block
  double lr_wrist = 8e-4;
  double lr_joints = 4e-4;
  int max_iters = 4000;  // total iteration budget per frame, shared by restarts
  double early_stop_eps = 1e-5;  // stop an attempt when improvement falls below
  double fd_step = 1e-6;
  int max_restarts = 40;          // additional random inits after the caller's
  double accept_objective = 1e-6;  // stop restarting once J is this small
  int lm_attempts = 8;            // damping retries per iteration

  void validate() const {
    require(lr_wrist > 0 && lr_joints > 0, ErrorCategory::config,
            "retarget learning rates must be positive");
    require(max_iters >= 1, ErrorCategory::config,
            "retarget max_iters must be >= 1");
    require(early_stop_eps > 0, ErrorCategory::config,
            "retarget early_stop_eps must be positive");
    require(fd_step > 0, ErrorCategory::config,
            "retarget fd_step must be positive");
    require(max_restarts >= 0, ErrorCategory::config,
            "retarget max_restarts must be >= 0");
    require(accept_objective > 0, ErrorCategory::config,
            "retarget accept_objective must be positive");
    require(lm_attempts >= 1, ErrorCategory::config,
            "retarget lm_attempts must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// FK keypoints and the objective

inline std::vector<Vec3> realized_keypoints(const KinematicChain& chain,
                                            const KeypointMapping& mapping,
                                            const RetargetVars& vars) {
  WristState wrist;
  wrist.position = vars.wrist_position;
  wrist.orientation = quat_from_rotation6(vars.wrist_rotation6);
  JointState js;
  js.positions = vars.q;
  js.velocities.assign(vars.q.size(), 0.0);
  const auto poses = forward_kinematics(chain, wrist, js);
  std::vector<Vec3> out;
  out.reserve(mapping.entries.size());
  for (const auto& e : mapping.entries)
    out.push_back(link_tip(chain, poses, e.link));
  return out;
}

// J = (1/N_kp) * sum_i w_i * ||phi_i - x_i||  (unsquared distances)
inline double retarget_objective(const RetargetVars& vars,
                                 const std::vector<Vec3>& frame_targets,
                                 const RetargetProblem& problem) {
  require(frame_targets.size() == problem.mapping.entries.size(),
          ErrorCategory::contract, "target count mismatch in objective");
  const auto phi = realized_keypoints(problem.chain, problem.mapping, vars);
  double j = 0;
  for (std::size_t i = 0; i < phi.size(); ++i)
    j += problem.mapping.entries[i].weight * norm(phi[i] - frame_targets[i]);
  return j / static_cast<double>(phi.size());
}

inline void clamp_joints(const KinematicChain& chain, std::vector<double>& q) {
  const auto active = chain.active_joints();
  for (std::size_t k = 0; k < q.size(); ++k) {
    const auto& j = chain.joints[active[k]];
    q[k] = std::clamp(q[k], j.lower_limit, j.upper_limit);
  }
}

// Mid-range joints, identity rotation, wrist at the wrist keypoint target if
// the mapping has one (falling back to the target centroid).
inline RetargetVars neutral_init(const RetargetProblem& problem,
                                 const std::vector<Vec3>& frame_targets) {
  RetargetVars v;
  const auto active = problem.chain.active_joints();
  for (int idx : active) {
    const auto& j = problem.chain.joints[idx];
    v.q.push_back(0.5 * (j.lower_limit + j.upper_limit));
  }
  Vec3 centroid = {0, 0, 0};
  for (const auto& t : frame_targets) centroid += (1.0 / frame_targets.size()) * t;
  v.wrist_position = centroid;
  for (std::size_t i = 0; i < problem.mapping.entries.size(); ++i)
    if (problem.mapping.entries[i].link == 0)
      v.wrist_position = frame_targets[i];
  return v;
}

struct RetargetResult {
  RetargetVars vars;
  double objective = 0.0;
  int iterations = 0;
};

namespace detail {

// Cholesky solve of a symmetric positive-definite system; A holds the full
// matrix row-major and is destroyed, b is replaced by the solution.
inline bool cholesky_solve(std::vector<double>& A, std::vector<double>& b,
                           int n) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = A[i * n + j];
      for (int k = 0; k < j; ++k) s -= A[i * n + k] * A[j * n + k];
      if (i == j) {
        if (s <= 0) return false;
        A[i * n + i] = std::sqrt(s);
      } else {
        A[i * n + j] = s / A[j * n + j];
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    double s = b[i];
    for (int k = 0; k < i; ++k) s -= A[i * n + k] * b[k];
    b[i] = s / A[i * n + i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= A[k * n + i] * b[k];
    b[i] = s / A[i * n + i];
  }
  return true;
}

}  // namespace detail

// Damped Gauss-Newton on the reweighted residuals (u_i = w_i / ||r_i||, the
// IRLS form of the unsquared objective), with a finite-difference keypoint
// Jacobian and hard joint clamping after every accepted step. The first
// attempt runs from the caller's init; if the objective stays above
// accept_objective (the landscape has rotation local minima because the
// wrist keypoint is rotation-invariant), deterministic random restarts spend
// the remaining iteration budget.
inline RetargetResult solve_frame(const RetargetProblem& problem, int frame,
                                  const RetargetVars& init,
                                  const RetargetConfig& cfg) {
  problem.validate();
  cfg.validate();
  require(frame >= 0 && frame < problem.frame_count(), ErrorCategory::contract,
          "retarget frame index out of range");
  const auto& targets = problem.targets[frame];
  const auto active = problem.chain.active_joints();
  const int dq = static_cast<int>(init.q.size());
  require(dq == static_cast<int>(active.size()), ErrorCategory::contract,
          "init joint vector length mismatch");
  const int np = 9 + dq;
  const int nk = static_cast<int>(problem.mapping.entries.size());

  auto pack = [&](const RetargetVars& v) {
    std::vector<double> p(np);
    std::copy(v.wrist_position.begin(), v.wrist_position.end(), p.begin());
    std::copy(v.wrist_rotation6.begin(), v.wrist_rotation6.end(),
              p.begin() + 3);
    std::copy(v.q.begin(), v.q.end(), p.begin() + 9);
    return p;
  };
  auto unpack = [&](const std::vector<double>& p) {
    RetargetVars v;
    std::copy(p.begin(), p.begin() + 3, v.wrist_position.begin());
    std::copy(p.begin() + 3, p.begin() + 9, v.wrist_rotation6.begin());
    v.q.assign(p.begin() + 9, p.end());
    return v;
  };
  auto clamp_params = [&](std::vector<double>& p) {
    std::vector<double> q(p.begin() + 9, p.end());
    clamp_joints(problem.chain, q);
    std::copy(q.begin(), q.end(), p.begin() + 9);
  };
  auto keypoints = [&](const std::vector<double>& p) {
    return realized_keypoints(problem.chain, problem.mapping, unpack(p));
  };
  auto eval = [&](const std::vector<double>& p, int iter) {
    const double j = retarget_objective(unpack(p), targets, problem);
    require(std::isfinite(j), ErrorCategory::numeric,
            "retarget objective non-finite at frame " + std::to_string(frame) +
                ", iteration " + std::to_string(iter));
    return j;
  };

  // one local solve; returns (objective, params), consuming at most `budget`
  // iterations and reporting the count used
  auto local_solve = [&](std::vector<double> p, int budget, int& used) {
    clamp_params(p);
    double obj = eval(p, 0);
    double lambda = 1e-3;
    used = 0;
    std::vector<double> jac(static_cast<std::size_t>(3 * nk) * np);
    for (int it = 1; it <= budget; ++it) {
      used = it;
      if (obj < 1e-12) break;
      const auto phi = keypoints(p);
      std::vector<double> u(nk);
      for (int i = 0; i < nk; ++i)
        u[i] = problem.mapping.entries[i].weight /
               std::max(norm(phi[i] - targets[i]), 1e-9);
      for (int c = 0; c < np; ++c) {
        auto hi = p, lo = p;
        hi[c] += cfg.fd_step;
        lo[c] -= cfg.fd_step;
        const auto ph = keypoints(hi), pl = keypoints(lo);
        for (int i = 0; i < nk; ++i)
          for (int d = 0; d < 3; ++d)
            jac[static_cast<std::size_t>(3 * i + d) * np + c] =
                (ph[i][d] - pl[i][d]) / (2.0 * cfg.fd_step);
      }
      std::vector<double> A(static_cast<std::size_t>(np) * np, 0.0), b(np, 0.0);
      for (int i = 0; i < nk; ++i) {
        const Vec3 r = phi[i] - targets[i];
        for (int d = 0; d < 3; ++d) {
          const double* row = &jac[static_cast<std::size_t>(3 * i + d) * np];
          for (int a = 0; a < np; ++a) {
            b[a] -= u[i] * row[a] * r[d];
            for (int c = 0; c <= a; ++c) A[a * np + c] += u[i] * row[a] * row[c];
          }
        }
      }
      for (int a = 0; a < np; ++a)
        for (int c = a + 1; c < np; ++c) A[a * np + c] = A[c * np + a];
      // per-block damping scale from the learning-rate ratio
      std::vector<double> damp_scale(np);
      for (int i = 0; i < np; ++i)
        damp_scale[i] = cfg.lr_wrist / (i < 9 ? cfg.lr_wrist : cfg.lr_joints);
      bool improved = false;
      double new_obj = obj;
      for (int attempt = 0; attempt < cfg.lm_attempts; ++attempt) {
        auto Ad = A;
        auto bd = b;
        for (int i = 0; i < np; ++i)
          Ad[i * np + i] += lambda * damp_scale[i] * (A[i * np + i] + 1e-12);
        if (!detail::cholesky_solve(Ad, bd, np)) {
          lambda *= 10;
          continue;
        }
        auto cand = p;
        for (int i = 0; i < np; ++i) cand[i] += bd[i];
        clamp_params(cand);
        const double jc = eval(cand, it);
        if (jc < obj) {
          p = std::move(cand);
          new_obj = jc;
          lambda = std::max(lambda * 0.3, 1e-12);
          improved = true;
          break;
        }
        lambda *= 10;
      }
      if (!improved) break;  // no damped step helps: local optimum
      const double gain = obj - new_obj;
      obj = new_obj;
      if (gain < cfg.early_stop_eps) break;
    }
    return std::make_pair(obj, p);
  };

  int budget = cfg.max_iters;
  int used = 0;
  auto [best, best_p] = local_solve(pack(init), budget, used);
  int iters = used;
  budget -= used;

  Rng restart_rng = rng_stream(0x5e7a9e7ull, static_cast<std::uint64_t>(frame));
  for (int attempt = 0;
       attempt < cfg.max_restarts && budget > 0 && best > cfg.accept_objective;
       ++attempt) {
    RetargetVars cand;
    for (int idx : active) {
      const auto& j = problem.chain.joints[idx];
      cand.q.push_back(restart_rng.uniform(j.lower_limit, j.upper_limit));
    }
    Vec3 axis = {restart_rng.normal(), restart_rng.normal(),
                 restart_rng.normal()};
    const double an = norm(axis);
    axis = an < 1e-9 ? Vec3{0, 0, 1} : (1.0 / an) * axis;
    cand.wrist_rotation6 = rotation6_from_quat(
        quat_from_axis_angle(axis, restart_rng.uniform(-M_PI, M_PI)));
    Vec3 centroid = {0, 0, 0};
    for (const auto& t : targets) centroid += (1.0 / nk) * t;
    cand.wrist_position = centroid;
    auto [obj, p] = local_solve(pack(cand), budget, used);
    iters += used;
    budget -= used;
    if (obj < best) {
      best = obj;
      best_p = std::move(p);
    }
  }
  return {unpack(best_p), best, iters};
}

inline std::vector<RetargetResult> retarget_trajectory(
    const RetargetProblem& problem, const RetargetConfig& cfg) {
  problem.validate();
  std::vector<RetargetResult> out;
  out.reserve(problem.frame_count());
  for (int f = 0; f < problem.frame_count(); ++f) {
    const RetargetVars init = f == 0
                                  ? neutral_init(problem, problem.targets[0])
                                  : out.back().vars;
    out.push_back(solve_frame(problem, f, init, cfg));
  }
  return out;
}

}  // namespace byd
