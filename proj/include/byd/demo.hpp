#pragma once

// Expert demonstration trajectories: recording, JSONL (de)serialization,
// episode resets, replay fidelity checks, and the scripted grasp oracle
// that generates the bundled demos.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "byd/core.hpp"
#include "byd/simenv.hpp"

namespace byd {

struct DemoStep {
  WristState wrist;
  JointState joints;
  std::vector<double> joint_targets;
  std::vector<Vec3> fingertips;
  std::vector<bool> contact_flags;
  std::vector<Vec3> contact_forces;
  RigidObjectState object;
  std::vector<double> expert_action;  // flat normalized action
};

struct DemoTrajectory {
  std::string morphology_id;
  double dt = 1.0 / 60.0;
  int t_max = 300;
  std::string task;
  std::uint64_t seed = 0;
  RigidObjectState object_template;  // carries mass / inertia / shape
  std::vector<DemoStep> steps;
};

namespace detail {

inline nlohmann::json vec3_json(const Vec3& v) {
  return nlohmann::json::array({v[0], v[1], v[2]});
}
inline nlohmann::json quat_json(const Quat& q) {
  return nlohmann::json::array({q.w, q.x, q.y, q.z});
}
inline nlohmann::json wrist_json(const WristState& w) {
  return {{"position", vec3_json(w.position)},
          {"orientation", quat_json(w.orientation)},
          {"linear_velocity", vec3_json(w.linear_velocity)},
          {"angular_velocity", vec3_json(w.angular_velocity)}};
}
inline WristState wrist_from_json(const nlohmann::json& j) {
  WristState w;
  w.position = vec3_from_json(j.at("position"));
  w.orientation = quat_from_json(j.at("orientation"));
  w.linear_velocity = vec3_from_json(j.at("linear_velocity"));
  w.angular_velocity = vec3_from_json(j.at("angular_velocity"));
  return w;
}
inline nlohmann::json object_pose_json(const RigidObjectState& o) {
  return {{"position", vec3_json(o.position)},
          {"orientation", quat_json(o.orientation)},
          {"linear_velocity", vec3_json(o.linear_velocity)},
          {"angular_velocity", vec3_json(o.angular_velocity)}};
}

}  // namespace detail

inline nlohmann::json demo_header_json(const DemoTrajectory& d) {
  nlohmann::json j;
  j["format"] = "byd-demo";
  j["version"] = 1;
  j["morphology"] = d.morphology_id;
  j["dt"] = d.dt;
  j["t_max"] = d.t_max;
  j["task"] = d.task;
  j["seed"] = d.seed;
  j["object"] = {
      {"mass", d.object_template.mass},
      {"inertia_diag", detail::vec3_json(d.object_template.inertia_diag)},
      {"shape",
       {{"kind",
         d.object_template.shape.kind == ShapeKind::sphere ? "sphere" : "box"},
        {"radius", d.object_template.shape.radius},
        {"half_extents",
         detail::vec3_json(d.object_template.shape.half_extents)}}}};
  return j;
}

inline nlohmann::json demo_step_json(const DemoStep& s) {
  nlohmann::json j;
  j["wrist"] = detail::wrist_json(s.wrist);
  j["q"] = s.joints.positions;
  j["qd"] = s.joints.velocities;
  j["targets"] = s.joint_targets;
  j["tips"] = nlohmann::json::array();
  for (const auto& t : s.fingertips) j["tips"].push_back(detail::vec3_json(t));
  j["contact"] = s.contact_flags;
  j["contact_force"] = nlohmann::json::array();
  for (const auto& f : s.contact_forces)
    j["contact_force"].push_back(detail::vec3_json(f));
  j["object"] = detail::object_pose_json(s.object);
  j["action"] = s.expert_action;
  return j;
}

inline void save_demo(const DemoTrajectory& d, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCategory::io, "cannot open for writing: " + path);
  out << demo_header_json(d).dump() << "\n";
  for (const auto& s : d.steps) out << demo_step_json(s).dump() << "\n";
  require(out.good(), ErrorCategory::io, "write failed: " + path);
}

inline DemoTrajectory load_demo(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCategory::io, "cannot open demo file: " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCategory::io,
          "empty demo file: " + path);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::io, "bad demo header: " + std::string(e.what()));
  }
  require(h.value("format", "") == "byd-demo", ErrorCategory::io,
          "not a demo file: " + path);
  DemoTrajectory d;
  d.morphology_id = h.at("morphology").get<std::string>();
  d.dt = h.at("dt").get<double>();
  d.t_max = h.at("t_max").get<int>();
  d.task = h.at("task").get<std::string>();
  d.seed = h.at("seed").get<std::uint64_t>();
  const auto& obj = h.at("object");
  d.object_template.mass = obj.at("mass").get<double>();
  d.object_template.inertia_diag = vec3_from_json(obj.at("inertia_diag"));
  const std::string kind = obj.at("shape").at("kind").get<std::string>();
  d.object_template.shape.kind =
      kind == "sphere" ? ShapeKind::sphere : ShapeKind::box;
  d.object_template.shape.radius = obj.at("shape").at("radius").get<double>();
  d.object_template.shape.half_extents =
      vec3_from_json(obj.at("shape").at("half_extents"));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCategory::io,
                  "bad demo step record: " + std::string(e.what()));
    }
    DemoStep s;
    s.wrist = detail::wrist_from_json(j.at("wrist"));
    s.joints.positions = j.at("q").get<std::vector<double>>();
    s.joints.velocities = j.at("qd").get<std::vector<double>>();
    s.joint_targets = j.at("targets").get<std::vector<double>>();
    for (const auto& t : j.at("tips")) s.fingertips.push_back(vec3_from_json(t));
    s.contact_flags = j.at("contact").get<std::vector<bool>>();
    for (const auto& f : j.at("contact_force"))
      s.contact_forces.push_back(vec3_from_json(f));
    const auto& o = j.at("object");
    s.object = d.object_template;
    s.object.position = vec3_from_json(o.at("position"));
    s.object.orientation = quat_from_json(o.at("orientation"));
    s.object.linear_velocity = vec3_from_json(o.at("linear_velocity"));
    s.object.angular_velocity = vec3_from_json(o.at("angular_velocity"));
    s.expert_action = j.at("action").get<std::vector<double>>();
    d.steps.push_back(std::move(s));
  }
  require(static_cast<int>(d.steps.size()) == d.t_max, ErrorCategory::io,
          "demo file truncated: expected " + std::to_string(d.t_max) +
              " records, got " + std::to_string(d.steps.size()));
  return d;
}

// ---------------------------------------------------------------------------
// Resets

inline SimState reset_from_demo(const DemoTrajectory& demo, int start_step) {
  require(start_step >= 0 && start_step < demo.t_max, ErrorCategory::contract,
          "start_step out of range");
  const auto& rec = demo.steps[start_step];
  SimState s;
  s.time_step = start_step;
  s.hands.push_back({rec.wrist, rec.joints, rec.joint_targets});
  s.object = demo.object_template;
  s.object.position = rec.object.position;
  s.object.orientation = rec.object.orientation;
  s.object.linear_velocity = rec.object.linear_velocity;
  s.object.angular_velocity = rec.object.angular_velocity;
  s.contacts.assign(rec.contact_flags.size(), ContactReading{});
  for (std::size_t f = 0; f < rec.contact_flags.size(); ++f) {
    s.contacts[f].finger_index = static_cast<int>(f);
    s.contacts[f].in_contact = rec.contact_flags[f];
    s.contacts[f].force = rec.contact_forces[f];
    s.contacts[f].separation = rec.contact_flags[f] ? -1e-6 : 1e-6;
  }
  return s;
}

// Training-mode start step: uniform over [0, T_max - l_min] inclusive.
inline int sample_start_step(Rng& rng, const DemoTrajectory& demo, int l_min) {
  const int hi = demo.t_max - l_min;
  require(hi >= 0, ErrorCategory::contract, "l_min exceeds demo length");
  return static_cast<int>(rng.uniform_int(0, hi));
}

// ---------------------------------------------------------------------------
// Replay fidelity: executing the stored actions from the stored initial
// state must reproduce the stored trajectory bit-for-bit.

struct ReplayReport {
  bool exact = true;
  int first_mismatch_step = -1;
  double max_object_position_error = 0.0;
};

inline ReplayReport check_replay(SimEnv& env, const DemoTrajectory& demo) {
  ReplayReport rep;
  SimState s = reset_from_demo(demo, 0);
  const std::array<double, 6> zero_wrench = {0, 0, 0, 0, 0, 0};
  for (int t = 0; t + 1 < demo.t_max; ++t) {
    const auto action = ActionDelta::from_flat(demo.steps[t].expert_action,
                                               {env.dof()});
    auto [next, readings] = env.step(s, action, zero_wrench);
    const auto& rec = demo.steps[t + 1];
    bool match = rec.object.position == next.object.position &&
                 rec.object.orientation.w == next.object.orientation.w &&
                 rec.object.orientation.x == next.object.orientation.x &&
                 rec.object.orientation.y == next.object.orientation.y &&
                 rec.object.orientation.z == next.object.orientation.z &&
                 rec.joints.positions == next.hands[0].joints.positions &&
                 rec.wrist.position == next.hands[0].wrist.position;
    const double err = norm(rec.object.position - next.object.position);
    rep.max_object_position_error = std::max(rep.max_object_position_error, err);
    if (!match && rep.exact) {
      rep.exact = false;
      rep.first_mismatch_step = t + 1;
    }
    s = std::move(next);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Scripted expert: approach is pre-positioned, close fingers until a firm
// grasp registers, then follow the task waypoints.

enum class DemoTask { lift, slide, pour_tilt };

inline DemoTask demo_task_from_string(const std::string& s) {
  if (s == "lift") return DemoTask::lift;
  if (s == "slide") return DemoTask::slide;
  if (s == "pour_tilt") return DemoTask::pour_tilt;
  throw Error(ErrorCategory::config, "unknown task: " + s);
}
inline std::string demo_task_name(DemoTask t) {
  switch (t) {
    case DemoTask::lift: return "lift";
    case DemoTask::slide: return "slide";
    default: return "pour_tilt";
  }
}

inline DemoTrajectory generate_demo(DemoTask task, const HandMorphology& morph,
                                    std::uint64_t seed,
                                    const SimParams& params = {}) {
  require(morph.n_finger >= 2, ErrorCategory::contract,
          "lift-style tasks need at least 2 fingertips");
  SimEnv env(morph, params);
  const int dof = morph.dof;
  const int t_max = 300;

  // object: sphere resting on the ground at the penalty equilibrium
  RigidObjectState obj;
  obj.shape.kind = ShapeKind::sphere;
  obj.shape.radius = 0.03;
  obj.mass = 0.5;
  const double i_sphere = 0.4 * obj.mass * obj.shape.radius * obj.shape.radius;
  obj.inertia_diag = {i_sphere, i_sphere, i_sphere};
  Rng rng = rng_stream(seed, 0);
  const double jx = rng.uniform(-0.002, 0.002);
  const double jy = rng.uniform(-0.002, 0.002);
  const double rest_pen = obj.mass * -params.gravity / params.contact_stiffness;
  obj.position = {jx, jy, obj.shape.radius - rest_pen};

  // wrist above the object so the outer fingertips straddle it
  WristState wrist;
  wrist.position = {jx, jy, obj.position[2] + 0.1};
  std::vector<double> q0(dof, 0.0);

  // grasp with the two outermost fingers; fold any others out of the way
  const int nf = morph.n_finger;
  std::vector<int> finger_offset(nf);  // active-joint offset of each finger
  {
    int off = 0;
    const auto active = morph.chain.active_joints();
    // planar presets lay out active joints finger by finger
    std::vector<int> per_finger(nf, 0);
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::string& name = morph.chain.joints[active[k]].name;
      const int f = std::stoi(name.substr(1, name.find('_') - 1));
      ++per_finger[f];
    }
    for (int f = 0; f < nf; ++f) {
      finger_offset[f] = off;
      off += per_finger[f];
    }
  }
  const int grasp_a = 0;        // finger at -y, closes with +q
  const int grasp_b = nf - 1;   // finger at +y, closes with -q

  SimState state = env.make_initial_state(wrist, q0, obj);
  const std::array<double, 6> zero_wrench = {0, 0, 0, 0, 0, 0};

  DemoTrajectory demo;
  demo.morphology_id = morph.id;
  demo.dt = params.dt;
  demo.t_max = t_max;
  demo.task = demo_task_name(task);
  demo.seed = seed;
  demo.object_template = obj;

  // The grasp itself happens in an unrecorded pre-roll: recorded demos start
  // from a held object, so every start step (including evaluation's step 0)
  // poses the tracking problem rather than grasp acquisition.
  enum class Phase { close, squeeze, move, hold };
  Phase phase = Phase::close;
  int phase_steps = 0;
  int firm_steps = 0;
  const double grasp_force = 3.0;  // N per fingertip before we call it a grasp

  auto record = [&](const std::vector<double>& action) {
    const auto poses = forward_kinematics(morph.chain, state.hands[0].wrist,
                                          state.hands[0].joints);
    DemoStep s;
    s.wrist = state.hands[0].wrist;
    s.joints = state.hands[0].joints;
    s.joint_targets = state.hands[0].joint_targets;
    s.fingertips = fingertip_positions(morph.chain, poses);
    for (const auto& c : state.contacts) {
      s.contact_flags.push_back(c.in_contact);
      s.contact_forces.push_back(c.force);
    }
    s.object = state.object;
    s.expert_action = action;
    demo.steps.push_back(std::move(s));
  };

  for (int t = 0; phase != Phase::move; ++t) {
    std::vector<double> action(6 + dof, 0.0);
    if (phase == Phase::close) {
      // advance each grasping finger only until it reports force, so the
      // servo targets never run far ahead of a blocked joint
      const double rate_a =
          norm(state.contacts[grasp_a].force) < grasp_force ? 0.375 : 0.05;
      const double rate_b =
          norm(state.contacts[grasp_b].force) < grasp_force ? 0.375 : 0.05;
      action[6 + finger_offset[grasp_a]] = rate_a;
      action[6 + finger_offset[grasp_a] + 1] = rate_a;
      action[6 + finger_offset[grasp_b]] = -rate_b;
      action[6 + finger_offset[grasp_b] + 1] = -rate_b;
      for (int f = 1; f < nf - 1; ++f) {
        action[6 + finger_offset[f]] = -0.75;  // fold inner fingers away
        action[6 + finger_offset[f] + 1] = -0.75;
      }
      const bool firm =
          state.contacts[grasp_a].in_contact &&
          state.contacts[grasp_b].in_contact &&
          norm(state.contacts[grasp_a].force) >= grasp_force &&
          norm(state.contacts[grasp_b].force) >= grasp_force;
      firm_steps = firm ? firm_steps + 1 : 0;
      if (firm_steps >= 5) { phase = Phase::squeeze; phase_steps = 0; }
      if (t > 120)
        throw Error(ErrorCategory::numeric,
                    "demo generation failed: no stable grasp after 120 "
                    "steps (task " + demo.task + ", hand " + morph.id + ")");
    } else {  // squeeze
      action[6 + finger_offset[grasp_a]] = 0.05;
      action[6 + finger_offset[grasp_a] + 1] = 0.05;
      action[6 + finger_offset[grasp_b]] = -0.05;
      action[6 + finger_offset[grasp_b] + 1] = -0.05;
      if (++phase_steps >= 20) { phase = Phase::move; phase_steps = 0; }
    }
    auto [next, readings] =
        env.step(state, ActionDelta::from_flat(action, {dof}), zero_wrench);
    state = std::move(next);
  }

  for (int t = 0; t < t_max; ++t) {
    std::vector<double> action(6 + dof, 0.0);
    switch (phase) {
      case Phase::close:
      case Phase::squeeze:
        break;  // handled in the pre-roll
      case Phase::move: {
        // keep the grip regulated around the target force while moving
        const double hold_a =
            norm(state.contacts[grasp_a].force) < grasp_force ? 0.25 : 0.0;
        const double hold_b =
            norm(state.contacts[grasp_b].force) < grasp_force ? 0.25 : 0.0;
        action[6 + finger_offset[grasp_a]] = hold_a;
        action[6 + finger_offset[grasp_a] + 1] = hold_a;
        action[6 + finger_offset[grasp_b]] = -hold_b;
        action[6 + finger_offset[grasp_b] + 1] = -hold_b;
        bool done = false;
        switch (task) {
          case DemoTask::lift:
            action[2] = 0.1;  // +z
            done = ++phase_steps >= 160;
            break;
          case DemoTask::slide:
            action[0] = 0.1;  // +x along the ground
            done = ++phase_steps >= 160;
            break;
          case DemoTask::pour_tilt:
            if (phase_steps < 80) {
              action[2] = 0.12;
            } else {
              action[3] = 0.15;  // tilt about x
            }
            done = ++phase_steps >= 170;
            break;
        }
        if (done) { phase = Phase::hold; phase_steps = 0; }
        break;
      }
      case Phase::hold: {
        const double hold_a =
            norm(state.contacts[grasp_a].force) < grasp_force ? 0.25 : 0.0;
        const double hold_b =
            norm(state.contacts[grasp_b].force) < grasp_force ? 0.25 : 0.0;
        action[6 + finger_offset[grasp_a]] = hold_a;
        action[6 + finger_offset[grasp_a] + 1] = hold_a;
        action[6 + finger_offset[grasp_b]] = -hold_b;
        action[6 + finger_offset[grasp_b] + 1] = -hold_b;
        break;
      }
    }

    record(action);
    if (t + 1 < t_max) {
      auto [next, readings] =
          env.step(state, ActionDelta::from_flat(action, {dof}), zero_wrench);
      state = std::move(next);
      // drop detection once the grasp phase is over
      if (phase == Phase::move || phase == Phase::hold) {
        const auto poses = forward_kinematics(
            morph.chain, state.hands[0].wrist, state.hands[0].joints);
        const auto tips = fingertip_positions(morph.chain, poses);
        const Vec3 grip_center =
            0.5 * (tips[grasp_a] + tips[grasp_b]);
        if (norm(grip_center - state.object.position) > 0.08)
          throw Error(ErrorCategory::numeric,
                      "demo generation failed: object slipped out of the "
                      "grasp at step " + std::to_string(t) + " (task " +
                          demo.task + ")");
      }
    }
  }
  return demo;
}

}  // namespace byd
