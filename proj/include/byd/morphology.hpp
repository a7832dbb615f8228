#pragma once

// Hand embodiments: kinematic chains, forward kinematics, and the
// fixed-dimension unified morphological observation encoding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "byd/core.hpp"

namespace byd {

enum class JointKind { revolute, prismatic };

enum class FingerRole { thumb, index, middle, ring, little, generic };

struct JointSpec {
  std::string name;
  JointKind kind = JointKind::revolute;
  Vec3 axis = {0, 0, 1};
  double lower_limit = -M_PI;
  double upper_limit = M_PI;
  std::optional<std::string> mimic_master;
  double mimic_ratio = 1.0;
};

struct LinkSpec {
  std::string name;
  int parent_link = -1;   // -1: root (wrist)
  int joint = -1;         // index into joints; -1 for a fixed attachment
  Vec3 local_translation = {0, 0, 0};
  Quat local_rotation;
  double length = 0.0;    // link extends along local +x by this much
};

struct KinematicChain {
  std::vector<LinkSpec> links;
  std::vector<JointSpec> joints;
  std::vector<std::vector<int>> fingertip_links;  // grouped by finger
  std::vector<FingerRole> finger_roles;

  int joint_index(const std::string& name) const {
    for (std::size_t i = 0; i < joints.size(); ++i)
      if (joints[i].name == name) return static_cast<int>(i);
    return -1;
  }

  // Non-mimic joints, in chain order; these carry the D_h coordinates.
  std::vector<int> active_joints() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < joints.size(); ++i)
      if (!joints[i].mimic_master) out.push_back(static_cast<int>(i));
    return out;
  }

  void validate() const {
    require(!links.empty(), ErrorCategory::contract, "chain has no links");
    int roots = 0;
    for (std::size_t i = 0; i < links.size(); ++i) {
      const auto& l = links[i];
      if (l.parent_link < 0) {
        ++roots;
      } else {
        require(l.parent_link < static_cast<int>(i), ErrorCategory::contract,
                "link parents must precede children: " + l.name);
      }
      require(l.joint < static_cast<int>(joints.size()),
              ErrorCategory::contract, "link joint index out of range");
    }
    require(roots == 1, ErrorCategory::contract,
            "chain must have exactly one root link");
    for (const auto& j : joints) {
      require(j.lower_limit <= j.upper_limit, ErrorCategory::contract,
              "joint limits inverted: " + j.name);
      require(std::abs(norm(j.axis) - 1.0) < 1e-9, ErrorCategory::contract,
              "joint axis must be unit length: " + j.name);
      if (j.mimic_master) {
        const int m = joint_index(*j.mimic_master);
        require(m >= 0, ErrorCategory::contract,
                "mimic master not found: " + *j.mimic_master);
        require(!joints[m].mimic_master, ErrorCategory::contract,
                "chained mimic joints are not supported: " + j.name);
      }
    }
    require(!fingertip_links.empty(), ErrorCategory::contract,
            "fingertip_links must be nonempty");
    require(finger_roles.size() == fingertip_links.size(),
            ErrorCategory::contract,
            "finger_roles size must match finger count");
  }
};

struct HandMorphology {
  std::string id;
  KinematicChain chain;
  int dof = 0;       // D_h: non-mimic joints
  int n_finger = 0;
  int n_body = 0;

  std::array<double, 3> descriptor() const {
    return {static_cast<double>(n_finger), static_cast<double>(dof),
            static_cast<double>(n_body)};
  }

  static HandMorphology from_chain(std::string id, KinematicChain chain) {
    chain.validate();
    HandMorphology m;
    m.id = std::move(id);
    m.dof = static_cast<int>(chain.active_joints().size());
    m.n_finger = static_cast<int>(chain.finger_roles.size());
    m.n_body = static_cast<int>(chain.links.size());
    m.chain = std::move(chain);
    return m;
  }
};

struct WristState {
  Vec3 position = {0, 0, 0};
  Quat orientation;
  Vec3 linear_velocity = {0, 0, 0};
  Vec3 angular_velocity = {0, 0, 0};
};

struct JointState {
  std::vector<double> positions;   // length D_h
  std::vector<double> velocities;  // length D_h
};

// Expands the D_h active-joint vector to a per-joint vector with mimic
// slaves set to ratio * master. Exact, no arithmetic beyond the product.
inline std::vector<double> resolve_mimics(const KinematicChain& chain,
                                          const std::vector<double>& q_active) {
  const auto active = chain.active_joints();
  require(q_active.size() == active.size(), ErrorCategory::contract,
          "joint vector length does not match chain dof");
  std::vector<double> full(chain.joints.size(), 0.0);
  for (std::size_t k = 0; k < active.size(); ++k) full[active[k]] = q_active[k];
  for (std::size_t i = 0; i < chain.joints.size(); ++i) {
    const auto& j = chain.joints[i];
    if (j.mimic_master)
      full[i] = j.mimic_ratio * full[chain.joint_index(*j.mimic_master)];
  }
  return full;
}

struct LinkPose {
  int link = 0;
  Vec3 position = {0, 0, 0};
  Quat orientation;
};

inline std::vector<LinkPose> forward_kinematics(const KinematicChain& chain,
                                                const WristState& wrist,
                                                const JointState& q) {
  const std::vector<double> full = resolve_mimics(chain, q.positions);
  std::vector<LinkPose> poses(chain.links.size());
  for (std::size_t i = 0; i < chain.links.size(); ++i) {
    const auto& l = chain.links[i];
    Vec3 parent_p = wrist.position;
    Quat parent_r = wrist.orientation;
    if (l.parent_link >= 0) {
      parent_p = poses[l.parent_link].position;
      parent_r = poses[l.parent_link].orientation;
    }
    Vec3 p = parent_p + rotate(parent_r, l.local_translation);
    Quat r = parent_r * l.local_rotation;
    if (l.joint >= 0) {
      const auto& j = chain.joints[l.joint];
      const double v = full[l.joint];
      if (j.kind == JointKind::revolute) {
        r = r * quat_from_axis_angle(j.axis, v);
      } else {
        p = p + rotate(r, v * j.axis);
      }
    }
    poses[i] = {static_cast<int>(i), p, normalized(r)};
  }
  return poses;
}

// Tip point of a link: frame origin advanced by `length` along local x.
inline Vec3 link_tip(const KinematicChain& chain,
                     const std::vector<LinkPose>& poses, int link) {
  const auto& l = chain.links[link];
  return poses[link].position +
         rotate(poses[link].orientation, {l.length, 0, 0});
}

// World positions of the distal fingertip point of each finger.
inline std::vector<Vec3> fingertip_positions(const KinematicChain& chain,
                                             const std::vector<LinkPose>& poses) {
  std::vector<Vec3> tips;
  tips.reserve(chain.fingertip_links.size());
  for (const auto& group : chain.fingertip_links) {
    tips.push_back(link_tip(chain, poses, group.back()));
  }
  return tips;
}

// ---------------------------------------------------------------------------
// Unified morphological observation block for one hand:
//   s_base(13) | q pad | cos q pad | sin q pad | qdot pad | descriptor(3)

inline int umr_block_size(int d_max) { return 13 + 4 * d_max + 3; }

struct UmrObservation {
  std::vector<double> values;
};

inline UmrObservation encode_umr(const WristState& wrist,
                                 const JointState& joints,
                                 const HandMorphology& morph, int d_max) {
  require(morph.dof <= d_max, ErrorCategory::config,
          "morphology '" + morph.id + "' has dof " + std::to_string(morph.dof) +
              " > d_max " + std::to_string(d_max));
  require(static_cast<int>(joints.positions.size()) == morph.dof &&
              static_cast<int>(joints.velocities.size()) == morph.dof,
          ErrorCategory::contract, "joint state length mismatch");
  UmrObservation obs;
  obs.values.reserve(umr_block_size(d_max));
  auto& v = obs.values;
  v.insert(v.end(), wrist.position.begin(), wrist.position.end());
  v.push_back(wrist.orientation.w);
  v.push_back(wrist.orientation.x);
  v.push_back(wrist.orientation.y);
  v.push_back(wrist.orientation.z);
  v.insert(v.end(), wrist.linear_velocity.begin(), wrist.linear_velocity.end());
  v.insert(v.end(), wrist.angular_velocity.begin(),
           wrist.angular_velocity.end());
  auto pad_section = [&](auto&& f) {
    for (int i = 0; i < morph.dof; ++i) v.push_back(f(i));
    for (int i = morph.dof; i < d_max; ++i) v.push_back(0.0);
  };
  pad_section([&](int i) { return joints.positions[i]; });
  pad_section([&](int i) { return std::cos(joints.positions[i]); });
  pad_section([&](int i) { return std::sin(joints.positions[i]); });
  pad_section([&](int i) { return joints.velocities[i]; });
  const auto d = morph.descriptor();
  v.insert(v.end(), d.begin(), d.end());
  return obs;
}

// ---------------------------------------------------------------------------
// JSON schema (mirrors the chain fields; see docs in README)

inline nlohmann::json to_json(const Quat& q) {
  return nlohmann::json::array({q.w, q.x, q.y, q.z});
}
inline Quat quat_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
          j.at(3).get<double>()};
}
inline Vec3 vec3_from_json(const nlohmann::json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

inline nlohmann::json morphology_to_json(const HandMorphology& m) {
  nlohmann::json j;
  j["id"] = m.id;
  j["joints"] = nlohmann::json::array();
  for (const auto& js : m.chain.joints) {
    nlohmann::json e;
    e["name"] = js.name;
    e["kind"] = js.kind == JointKind::revolute ? "revolute" : "prismatic";
    e["axis"] = {js.axis[0], js.axis[1], js.axis[2]};
    e["lower_limit"] = js.lower_limit;
    e["upper_limit"] = js.upper_limit;
    if (js.mimic_master) {
      e["mimic_master"] = *js.mimic_master;
      e["mimic_ratio"] = js.mimic_ratio;
    }
    j["joints"].push_back(e);
  }
  j["links"] = nlohmann::json::array();
  for (const auto& l : m.chain.links) {
    nlohmann::json e;
    e["name"] = l.name;
    e["parent_link"] = l.parent_link;
    e["joint"] = l.joint;
    e["local_translation"] = {l.local_translation[0], l.local_translation[1],
                              l.local_translation[2]};
    e["local_rotation"] = to_json(l.local_rotation);
    e["length"] = l.length;
    j["links"].push_back(e);
  }
  j["fingertip_links"] = m.chain.fingertip_links;
  j["finger_roles"] = nlohmann::json::array();
  static const char* role_names[] = {"thumb", "index",  "middle",
                                     "ring",  "little", "generic"};
  for (auto r : m.chain.finger_roles)
    j["finger_roles"].push_back(role_names[static_cast<int>(r)]);
  return j;
}

inline FingerRole finger_role_from_string(const std::string& s) {
  if (s == "thumb") return FingerRole::thumb;
  if (s == "index") return FingerRole::index;
  if (s == "middle") return FingerRole::middle;
  if (s == "ring") return FingerRole::ring;
  if (s == "little") return FingerRole::little;
  if (s == "generic") return FingerRole::generic;
  throw Error(ErrorCategory::config, "unknown finger role: " + s);
}

inline HandMorphology morphology_from_json(const nlohmann::json& j) {
  KinematicChain c;
  for (const auto& e : j.at("joints")) {
    JointSpec js;
    js.name = e.at("name").get<std::string>();
    const std::string kind = e.at("kind").get<std::string>();
    require(kind == "revolute" || kind == "prismatic", ErrorCategory::config,
            "unknown joint kind: " + kind);
    js.kind = kind == "revolute" ? JointKind::revolute : JointKind::prismatic;
    js.axis = vec3_from_json(e.at("axis"));
    js.lower_limit = e.at("lower_limit").get<double>();
    js.upper_limit = e.at("upper_limit").get<double>();
    if (e.contains("mimic_master")) {
      js.mimic_master = e.at("mimic_master").get<std::string>();
      js.mimic_ratio = e.value("mimic_ratio", 1.0);
    }
    c.joints.push_back(js);
  }
  for (const auto& e : j.at("links")) {
    LinkSpec l;
    l.name = e.at("name").get<std::string>();
    l.parent_link = e.at("parent_link").get<int>();
    l.joint = e.at("joint").get<int>();
    l.local_translation = vec3_from_json(e.at("local_translation"));
    l.local_rotation = quat_from_json(e.at("local_rotation"));
    l.length = e.at("length").get<double>();
    c.links.push_back(l);
  }
  c.fingertip_links = j.at("fingertip_links").get<std::vector<std::vector<int>>>();
  for (const auto& r : j.at("finger_roles"))
    c.finger_roles.push_back(finger_role_from_string(r.get<std::string>()));
  return HandMorphology::from_chain(j.at("id").get<std::string>(),
                                    std::move(c));
}

// ---------------------------------------------------------------------------
// Preset registry. Planar revolute fingers on a floating wrist. The high-DoF
// presets exist for encoding; only the low-DoF toy hands are simulated.

namespace detail {

// Builds a hand with `joints_per_finger[i]` joints on finger i. Fingers hang
// from the wrist pointing -z (local x rotated down), bases spread along y,
// joints rotating about local z (world x at the zero configuration).
inline HandMorphology planar_hand(const std::string& id,
                                  const std::vector<int>& joints_per_finger,
                                  const std::vector<FingerRole>& roles,
                                  double base_half_spread = 0.06,
                                  double link_length = 0.05) {
  KinematicChain c;
  c.links.push_back({"palm", -1, -1, {0, 0, 0}, Quat{}, 0.0});
  const int nf = static_cast<int>(joints_per_finger.size());
  // Rotation taking local +x to world -z: rotate about y by +90 deg.
  const Quat down = quat_from_axis_angle({0, 1, 0}, M_PI / 2);
  for (int f = 0; f < nf; ++f) {
    const double y = nf == 1 ? 0.0
                             : -base_half_spread +
                                   2.0 * base_half_spread * f / (nf - 1);
    int parent = 0;
    std::vector<int> tip_group;
    for (int k = 0; k < joints_per_finger[f]; ++k) {
      JointSpec js;
      js.name = "f" + std::to_string(f) + "_j" + std::to_string(k);
      js.kind = JointKind::revolute;
      js.axis = {0, 0, 1};
      js.lower_limit = -1.4;
      js.upper_limit = 1.4;
      c.joints.push_back(js);
      LinkSpec l;
      l.name = "f" + std::to_string(f) + "_l" + std::to_string(k);
      l.parent_link = parent;
      l.joint = static_cast<int>(c.joints.size()) - 1;
      l.local_translation = k == 0 ? Vec3{0, y, 0} : Vec3{link_length, 0, 0};
      l.local_rotation = k == 0 ? down : Quat{};
      l.length = link_length;
      c.links.push_back(l);
      parent = static_cast<int>(c.links.size()) - 1;
      tip_group.push_back(parent);
    }
    c.fingertip_links.push_back(tip_group);
  }
  c.finger_roles = roles;
  return HandMorphology::from_chain(id, std::move(c));
}

}  // namespace detail

inline std::vector<std::string> preset_names() {
  return {"two_finger", "three_finger", "shadow",        "allegro",
          "inspire",    "ohand",        "casia_3finger", "xarm_gripper",
          "franka_panda"};
}

inline HandMorphology preset_morphology(const std::string& name) {
  using detail::planar_hand;
  using R = FingerRole;
  if (name == "two_finger")
    return planar_hand("two_finger", {2, 2}, {R::thumb, R::index});
  if (name == "three_finger")
    return planar_hand("three_finger", {2, 2, 2}, {R::thumb, R::index, R::middle});
  if (name == "shadow")
    return planar_hand("shadow", {5, 5, 4, 4, 4},
                       {R::thumb, R::index, R::middle, R::ring, R::little});
  if (name == "allegro")
    return planar_hand("allegro", {4, 4, 4, 4},
                       {R::thumb, R::index, R::middle, R::ring});
  if (name == "inspire")
    return planar_hand("inspire", {2, 1, 1, 1, 1},
                       {R::thumb, R::index, R::middle, R::ring, R::little});
  if (name == "ohand")
    return planar_hand("ohand", {3, 2, 2, 2, 2},
                       {R::thumb, R::index, R::middle, R::ring, R::little});
  if (name == "casia_3finger")
    return planar_hand("casia_3finger", {4, 3, 3},
                       {R::thumb, R::index, R::middle});
  if (name == "xarm_gripper") {
    // one active joint, the second finger mirrors it
    auto m = planar_hand("xarm_gripper", {1, 1}, {R::thumb, R::index});
    auto c = m.chain;
    c.joints[1].mimic_master = "f0_j0";
    c.joints[1].mimic_ratio = -1.0;
    return HandMorphology::from_chain("xarm_gripper", std::move(c));
  }
  if (name == "franka_panda") {
    auto m = planar_hand("franka_panda", {1, 1}, {R::thumb, R::index});
    auto c = m.chain;
    c.joints[1].mimic_master = "f0_j0";
    c.joints[1].mimic_ratio = -1.0;
    return HandMorphology::from_chain("franka_panda", std::move(c));
  }
  std::string avail;
  for (const auto& n : preset_names()) avail += (avail.empty() ? "" : ", ") + n;
  throw Error(ErrorCategory::config,
              "unknown morphology preset '" + name + "' (available: " + avail +
                  ")");
}

}  // namespace byd
