#pragma once

// Deterministic toy rigid-body manipulation environment: one floating
// servo-driven hand plus one free object, penalty contacts, fixed-step
// semi-implicit integration. Identical inputs produce bit-identical outputs.

#include <cmath>
#include <string>
#include <vector>

#include "byd/core.hpp"
#include "byd/morphology.hpp"

namespace byd {

enum class ShapeKind { sphere, box };

struct ObjectShape {
  ShapeKind kind = ShapeKind::sphere;
  double radius = 0.03;              // sphere
  Vec3 half_extents = {0.03, 0.03, 0.03};  // box
};

struct RigidObjectState {
  Vec3 position = {0, 0, 0};
  Quat orientation;
  Vec3 linear_velocity = {0, 0, 0};
  Vec3 angular_velocity = {0, 0, 0};
  double mass = 0.5;
  Vec3 inertia_diag = {1.8e-4, 1.8e-4, 1.8e-4};
  ObjectShape shape;
};

struct ContactReading {
  int finger_index = -1;
  Vec3 force = {0, 0, 0};  // on the object
  bool in_contact = false;
  double separation = 0.0;  // signed, negative = penetration
};

struct HandSimState {
  WristState wrist;
  JointState joints;
  std::vector<double> joint_targets;
};

struct SimState {
  long time_step = 0;
  std::vector<HandSimState> hands;
  RigidObjectState object;
  std::vector<ContactReading> contacts;
};

struct HandAction {
  std::array<double, 6> wrist_delta = {0, 0, 0, 0, 0, 0};  // normalized
  std::vector<double> joint_delta;                         // normalized, D_h
};

struct ActionDelta {
  std::vector<HandAction> hands;

  std::size_t flat_size() const {
    std::size_t n = 0;
    for (const auto& h : hands) n += 6 + h.joint_delta.size();
    return n;
  }
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(flat_size());
    for (const auto& h : hands) {
      out.insert(out.end(), h.wrist_delta.begin(), h.wrist_delta.end());
      out.insert(out.end(), h.joint_delta.begin(), h.joint_delta.end());
    }
    return out;
  }
  static ActionDelta from_flat(const std::vector<double>& v,
                               const std::vector<int>& dofs) {
    ActionDelta a;
    std::size_t k = 0;
    for (int dof : dofs) {
      require(k + 6 + dof <= v.size(), ErrorCategory::contract,
              "action vector too short");
      HandAction h;
      for (int i = 0; i < 6; ++i) h.wrist_delta[i] = v[k++];
      h.joint_delta.assign(v.begin() + k, v.begin() + k + dof);
      k += dof;
      a.hands.push_back(std::move(h));
    }
    require(k == v.size(), ErrorCategory::contract,
            "action vector length mismatch");
    return a;
  }
};

struct SimParams {
  double dt = 1.0 / 60.0;
  double gravity = -9.81;

  // normalized action -> physical deltas per step
  // Per-step command range for a full-scale (|a|=1) action. Kept small so
  // the action unit matches the precision the tasks demand: expert commands
  // land around 0.1-0.4 of the range instead of vanishing near zero, and
  // exploration noise cannot fling the hand across the workspace in a step.
  double wrist_translation_scale = 0.005;  // m
  double wrist_rotation_scale = 0.02;      // rad
  double joint_delta_scale = 0.02;         // rad

  // penalty contact model
  double contact_stiffness = 5000.0;  // N/m
  double contact_damping = 50.0;      // N s/m
  double friction_coef = 1.0;
  double torsion_coef = 0.005;  // m, Coulomb cap arm for spin about the normal
  double tip_radius = 0.012;    // m
  double palm_radius = 0.02;    // m

  // joint servo dynamics
  double joint_kp = 5.0;            // N m/rad
  double joint_kd = 0.5;            // N m s/rad
  double joint_inertia = 0.01;      // kg m^2
  double joint_torque_limit = 0.5;  // N m, servo saturation
};

namespace detail {

struct SurfacePoint {
  double separation = 0.0;
  Vec3 normal = {0, 0, 1};       // from the other body into the object
  Vec3 contact_point = {0, 0, 0};
};

// Sphere probe (center c, radius r) against the object.
inline SurfacePoint probe_object(const RigidObjectState& obj, const Vec3& c,
                                 double r) {
  SurfacePoint sp;
  if (obj.shape.kind == ShapeKind::sphere) {
    const Vec3 d = obj.position - c;
    const double dist = norm(d);
    sp.separation = dist - (obj.shape.radius + r);
    sp.normal = dist > 1e-12 ? (1.0 / dist) * d : Vec3{0, 0, 1};
    sp.contact_point = c + r * sp.normal;
  } else {
    // closest point on the box to the probe center, in the box frame
    const Quat inv = conj(obj.orientation);
    const Vec3 local = rotate(inv, c - obj.position);
    Vec3 clamped = local;
    for (int i = 0; i < 3; ++i)
      clamped[i] = std::clamp(local[i], -obj.shape.half_extents[i],
                              obj.shape.half_extents[i]);
    const Vec3 diff = local - clamped;
    const double dist = norm(diff);
    Vec3 n_local;
    if (dist > 1e-12) {
      n_local = (-1.0 / dist) * diff;  // from probe into the box
      sp.separation = dist - r;
    } else {
      // center inside the box: push out along the closest face
      int axis = 0;
      double best = obj.shape.half_extents[0] - std::abs(local[0]);
      for (int i = 1; i < 3; ++i) {
        const double m = obj.shape.half_extents[i] - std::abs(local[i]);
        if (m < best) { best = m; axis = i; }
      }
      n_local = {0, 0, 0};
      n_local[axis] = local[axis] >= 0 ? -1.0 : 1.0;
      sp.separation = -(best + r);
    }
    sp.normal = rotate(obj.orientation, n_local);
    sp.contact_point = rotate(obj.orientation, clamped) + obj.position;
  }
  return sp;
}

// Lowest point(s) of the object against the ground plane z = 0.
// Returns the worst separation and its contact point.
inline SurfacePoint probe_ground(const RigidObjectState& obj) {
  SurfacePoint sp;
  sp.normal = {0, 0, 1};
  if (obj.shape.kind == ShapeKind::sphere) {
    sp.separation = obj.position[2] - obj.shape.radius;
    sp.contact_point = {obj.position[0], obj.position[1],
                        obj.position[2] - obj.shape.radius};
  } else {
    double lowest = 1e30;
    Vec3 best = obj.position;
    for (int sx : {-1, 1})
      for (int sy : {-1, 1})
        for (int sz : {-1, 1}) {
          const Vec3 corner_local = {sx * obj.shape.half_extents[0],
                                     sy * obj.shape.half_extents[1],
                                     sz * obj.shape.half_extents[2]};
          const Vec3 corner =
              obj.position + rotate(obj.orientation, corner_local);
          if (corner[2] < lowest) { lowest = corner[2]; best = corner; }
        }
    sp.separation = lowest;
    sp.contact_point = best;
  }
  return sp;
}

inline Vec3 point_velocity(const RigidObjectState& obj, const Vec3& p) {
  return obj.linear_velocity + cross(obj.angular_velocity, p - obj.position);
}

}  // namespace detail

class SimEnv {
 public:
  SimEnv(HandMorphology morph, SimParams params = {})
      : morph_(std::move(morph)), params_(params) {}

  const HandMorphology& morphology() const { return morph_; }
  const SimParams& params() const { return params_; }
  int dof() const { return morph_.dof; }
  int action_size() const { return 6 + morph_.dof; }

  // Per-joint servo torques applied during the most recent step; feeds the
  // power penalty in the reward.
  const std::vector<double>& last_applied_torques() const {
    return last_torques_;
  }

  SimState make_initial_state(const WristState& wrist,
                              const std::vector<double>& q,
                              const RigidObjectState& obj) const {
    SimState s;
    s.hands.push_back(
        {wrist, {q, std::vector<double>(q.size(), 0.0)}, q});
    s.object = obj;
    s.contacts.assign(morph_.n_finger, ContactReading{});
    for (int f = 0; f < morph_.n_finger; ++f) s.contacts[f].finger_index = f;
    return s;
  }

  std::pair<SimState, std::vector<ContactReading>> step(
      const SimState& state, const ActionDelta& exec_action,
      const std::array<double, 6>& support_force_torque) {
    check_finite(state, exec_action, support_force_torque);
    require(exec_action.hands.size() == state.hands.size(),
            ErrorCategory::contract, "action hand count mismatch");
    SimState next = state;
    auto& hand = next.hands[0];
    const auto& act = exec_action.hands[0];
    require(static_cast<int>(act.joint_delta.size()) == morph_.dof,
            ErrorCategory::contract, "joint delta length mismatch");
    const double dt = params_.dt;

    // --- wrist: kinematic, velocity derived from the commanded delta
    Vec3 dp, drot;
    for (int i = 0; i < 3; ++i) {
      dp[i] = params_.wrist_translation_scale * clamp1(act.wrist_delta[i]);
      drot[i] = params_.wrist_rotation_scale * clamp1(act.wrist_delta[3 + i]);
    }
    hand.wrist.position += dp;
    hand.wrist.orientation =
        normalized(quat_from_rotvec(drot) * hand.wrist.orientation);
    hand.wrist.linear_velocity = (1.0 / dt) * dp;
    hand.wrist.angular_velocity = (1.0 / dt) * drot;

    // --- joint targets track the commanded deltas, clamped to limits
    const auto active = morph_.chain.active_joints();
    for (int i = 0; i < morph_.dof; ++i) {
      const auto& js = morph_.chain.joints[active[i]];
      hand.joint_targets[i] = std::clamp(
          hand.joint_targets[i] +
              params_.joint_delta_scale * clamp1(act.joint_delta[i]),
          js.lower_limit, js.upper_limit);
    }

    // --- contact detection at the post-wrist-update configuration
    const auto poses = forward_kinematics(morph_.chain, hand.wrist, hand.joints);
    const auto tips = fingertip_positions(morph_.chain, poses);
    const auto tip_vels = fingertip_velocities(hand);

    struct Contact {
      detail::SurfacePoint sp;
      Vec3 other_velocity;  // velocity of the non-object body at the point
      int finger = -1;      // -1: palm or ground
    };
    std::vector<Contact> contacts;
    std::vector<ContactReading> readings(morph_.n_finger);
    for (int f = 0; f < morph_.n_finger; ++f) {
      const auto sp = detail::probe_object(next.object, tips[f],
                                           params_.tip_radius);
      readings[f].finger_index = f;
      readings[f].separation = sp.separation;
      readings[f].in_contact = sp.separation < 0;
      if (sp.separation < 0)
        contacts.push_back({sp, tip_vels[f], f});
    }
    {
      const auto sp = detail::probe_object(next.object, hand.wrist.position,
                                           params_.palm_radius);
      if (sp.separation < 0)
        contacts.push_back({sp, hand.wrist.linear_velocity, -1});
    }
    const auto ground = detail::probe_ground(next.object);

    // --- gravity and the external support wrench first, so the contact
    // pass below sees the velocity it has to absorb
    auto& obj = next.object;
    for (int i = 0; i < 3; ++i) {
      obj.linear_velocity[i] +=
          (support_force_torque[i] / obj.mass) * dt;
      obj.angular_velocity[i] +=
          support_force_torque[3 + i] / obj.inertia_diag[i] * dt;
    }
    obj.linear_velocity[2] += params_.gravity * dt;

    // --- contacts as sequential velocity impulses. The spring term is
    // explicit; the damping term is implicit in the post-impulse normal
    // velocity, which keeps stacked/opposing contacts stable at this dt.
    const auto apply_impulse = [&](const Vec3& p, const Vec3& imp) {
      for (int i = 0; i < 3; ++i) obj.linear_velocity[i] += imp[i] / obj.mass;
      const Vec3 ang = cross(p - obj.position, imp);
      for (int i = 0; i < 3; ++i)
        obj.angular_velocity[i] += ang[i] / obj.inertia_diag[i];
    };
    // inverse effective mass of the contact point along `dir`
    const auto inv_eff_mass = [&](const Vec3& p, const Vec3& dir) {
      const Vec3 r = p - obj.position;
      const Vec3 rxd = cross(r, dir);
      double k = 1.0 / obj.mass;
      for (int i = 0; i < 3; ++i) k += rxd[i] * rxd[i] / obj.inertia_diag[i];
      return k;
    };
    struct Resolved {
      detail::SurfacePoint sp;
      Vec3 other_velocity;
      int finger = -1;
      double jn = 0.0;       // normal impulse
      Vec3 jf = {0, 0, 0};   // accumulated friction impulse
    };
    std::vector<Resolved> resolved;
    for (const auto& c : contacts)
      resolved.push_back({c.sp, c.other_velocity, c.finger, 0.0, {0, 0, 0}});
    if (ground.separation < 0) resolved.push_back({ground, {0, 0, 0}, -1});
    for (auto& c : resolved) {
      const Vec3 v_rel =
          detail::point_velocity(obj, c.sp.contact_point) - c.other_velocity;
      const double vn = dot(v_rel, c.sp.normal);  // positive = separating
      const double fs =
          std::max(0.0, -params_.contact_stiffness * c.sp.separation);
      const double gamma = params_.contact_damping * dt *
                           inv_eff_mass(c.sp.contact_point, c.sp.normal);
      c.jn = std::max(
          0.0, dt * (fs - params_.contact_damping * vn) / (1.0 + gamma));
      if (c.jn > 0) apply_impulse(c.sp.contact_point, c.jn * c.sp.normal);
    }
    // Coulomb friction: projected Gauss-Seidel over the contact set, with
    // the accumulated impulse clamped to the cone. One pass per contact is
    // not enough for a two-finger pinch (the slip correction at one tip
    // mostly goes into spin and reappears at the other), so iterate.
    for (int it = 0; it < 8; ++it) {
      for (auto& c : resolved) {
        if (c.jn <= 0) continue;
        const Vec3 v_rel =
            detail::point_velocity(obj, c.sp.contact_point) - c.other_velocity;
        const Vec3 vt = v_rel - dot(v_rel, c.sp.normal) * c.sp.normal;
        const double vt_mag = norm(vt);
        if (vt_mag < 1e-12) continue;
        const Vec3 t_dir = (1.0 / vt_mag) * vt;
        const Vec3 dj =
            (-vt_mag / inv_eff_mass(c.sp.contact_point, t_dir)) * t_dir;
        Vec3 total = c.jf + dj;
        const double cap = params_.friction_coef * c.jn;
        const double tmag = norm(total);
        if (tmag > cap) total = (cap / tmag) * total;
        const Vec3 applied = total - c.jf;
        c.jf = total;
        apply_impulse(c.sp.contact_point, applied);
      }
    }
    // Torsional friction: point friction cannot see spin about the contact
    // normal (for a pinched sphere that spin is otherwise undamped and
    // swallows every perturbation), so clamp an angular impulse against it.
    // The Coulomb cap uses a patch arm: |L| <= torsion_coef * jn.
    for (const auto& c : resolved) {
      if (c.jn <= 0) continue;
      const Vec3& n = c.sp.normal;
      const double spin = dot(obj.angular_velocity, n);
      if (spin == 0.0) continue;
      double kw = 0;
      for (int i = 0; i < 3; ++i) kw += n[i] * n[i] / obj.inertia_diag[i];
      const double cap = params_.torsion_coef * c.jn;
      const double L = std::clamp(-spin / kw, -cap, cap);
      for (int i = 0; i < 3; ++i)
        obj.angular_velocity[i] += L * n[i] / obj.inertia_diag[i];
    }
    std::vector<double> normal_mags(contacts.size(), 0.0);
    for (const auto& c : resolved) {
      if (c.finger >= 0) {
        normal_mags[&c - resolved.data()] = c.jn / dt;
        readings[c.finger].force = (1.0 / dt) * (c.jn * c.sp.normal + c.jf);
      }
    }

    // --- object position / orientation update
    obj.position += dt * obj.linear_velocity;
    const Quat wq{0, obj.angular_velocity[0], obj.angular_velocity[1],
                  obj.angular_velocity[2]};
    const Quat qdot = wq * obj.orientation;
    obj.orientation.w += 0.5 * dt * qdot.w;
    obj.orientation.x += 0.5 * dt * qdot.x;
    obj.orientation.y += 0.5 * dt * qdot.y;
    obj.orientation.z += 0.5 * dt * qdot.z;
    obj.orientation = normalized(obj.orientation);

    // --- joint servo dynamics with contact reaction torques
    last_torques_.assign(morph_.dof, 0.0);
    std::vector<double> reaction(morph_.dof, 0.0);
    for (const auto& c : contacts) {
      if (c.finger < 0) continue;
      // force on the fingertip from the object (normal part only)
      const double fn = normal_mags[&c - contacts.data()];
      const Vec3 f_tip = -fn * c.sp.normal;
      accumulate_joint_reaction(poses, c.finger, c.sp.contact_point, f_tip,
                                reaction);
    }
    for (int i = 0; i < morph_.dof; ++i) {
      const auto& js = morph_.chain.joints[active[i]];
      double& q = hand.joints.positions[i];
      double& qd = hand.joints.velocities[i];
      const double servo =
          std::clamp(params_.joint_kp * (hand.joint_targets[i] - q) -
                         params_.joint_kd * qd,
                     -params_.joint_torque_limit, params_.joint_torque_limit);
      last_torques_[i] = servo;
      qd += (servo + reaction[i]) / params_.joint_inertia * dt;
      q += qd * dt;
      if (q < js.lower_limit) { q = js.lower_limit; qd = std::max(qd, 0.0); }
      if (q > js.upper_limit) { q = js.upper_limit; qd = std::min(qd, 0.0); }
    }

    next.time_step = state.time_step + 1;
    next.contacts = readings;
    check_finite_state(next);
    return {next, readings};
  }

 private:
  static double clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

  // Tip velocities from the wrist twist and joint rates, by differencing the
  // kinematics along the current velocity direction.
  std::vector<Vec3> fingertip_velocities(const HandSimState& hand) const {
    const double h = 1e-6;
    const auto p0 = fingertip_positions(
        morph_.chain, forward_kinematics(morph_.chain, hand.wrist, hand.joints));
    WristState w2 = hand.wrist;
    w2.position += h * hand.wrist.linear_velocity;
    w2.orientation = normalized(
        quat_from_rotvec(h * hand.wrist.angular_velocity) * w2.orientation);
    JointState j2 = hand.joints;
    for (std::size_t i = 0; i < j2.positions.size(); ++i)
      j2.positions[i] += h * j2.velocities[i];
    const auto p1 = fingertip_positions(
        morph_.chain, forward_kinematics(morph_.chain, w2, j2));
    std::vector<Vec3> vels(p0.size());
    for (std::size_t i = 0; i < p0.size(); ++i)
      vels[i] = (1.0 / h) * (p1[i] - p0[i]);
    return vels;
  }

  // Torque felt by each active ancestor joint of `finger`'s tip link from a
  // force applied at the contact point.
  void accumulate_joint_reaction(const std::vector<LinkPose>& poses, int finger,
                                 const Vec3& point, const Vec3& f,
                                 std::vector<double>& reaction) const {
    const auto active = morph_.chain.active_joints();
    int link = morph_.chain.fingertip_links[finger].back();
    while (link >= 0) {
      const auto& l = morph_.chain.links[link];
      if (l.joint >= 0) {
        const auto& js = morph_.chain.joints[l.joint];
        if (!js.mimic_master && js.kind == JointKind::revolute) {
          // active index of this joint
          for (std::size_t k = 0; k < active.size(); ++k) {
            if (active[k] == l.joint) {
              const Vec3 axis_w = rotate(poses[link].orientation, js.axis);
              reaction[k] += dot(axis_w, cross(point - poses[link].position, f));
              break;
            }
          }
        }
      }
      link = l.parent_link;
    }
  }

  void check_finite(const SimState& s, const ActionDelta& a,
                    const std::array<double, 6>& wrench) const {
    check_finite_state(s);
    for (const auto& h : a.hands) {
      require(all_finite(h.wrist_delta.data(), 6), ErrorCategory::numeric,
              "simulation diverged: non-finite wrist action");
      require(all_finite(h.joint_delta.data(), h.joint_delta.size()),
              ErrorCategory::numeric,
              "simulation diverged: non-finite joint action");
    }
    require(all_finite(wrench.data(), 6), ErrorCategory::numeric,
            "simulation diverged: non-finite support wrench");
  }

  void check_finite_state(const SimState& s) const {
    for (const auto& h : s.hands) {
      require(all_finite(h.wrist.position.data(), 3) &&
                  std::isfinite(h.wrist.orientation.w) &&
                  all_finite(h.joints.positions.data(),
                             h.joints.positions.size()) &&
                  all_finite(h.joints.velocities.data(),
                             h.joints.velocities.size()),
              ErrorCategory::numeric,
              "simulation diverged: non-finite hand state");
    }
    require(all_finite(s.object.position.data(), 3) &&
                all_finite(s.object.linear_velocity.data(), 3) &&
                all_finite(s.object.angular_velocity.data(), 3),
            ErrorCategory::numeric,
            "simulation diverged: non-finite object state");
  }

  HandMorphology morph_;
  SimParams params_;
  std::vector<double> last_torques_;
};

}  // namespace byd
