#pragma once

// Small math and utility layer shared by every module: 3-vectors,
// quaternions (w,x,y,z), a deterministic counter-based RNG, and the
// error taxonomy used for CLI exit codes.

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace byd {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2]};
}
inline Vec3 operator-(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}
inline Vec3 operator*(double s, const Vec3& v) {
  return {s * v[0], s * v[1], s * v[2]};
}
inline Vec3 operator-(const Vec3& v) { return {-v[0], -v[1], -v[2]}; }
inline Vec3& operator+=(Vec3& a, const Vec3& b) {
  a[0] += b[0]; a[1] += b[1]; a[2] += b[2];
  return a;
}
inline double dot(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1],
          a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

struct Quat {
  double w = 1, x = 0, y = 0, z = 0;
};

inline Quat operator*(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}
inline Quat conj(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }
inline double quat_norm(const Quat& q) {
  return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}
inline Quat normalized(const Quat& q) {
  const double n = quat_norm(q);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}
inline Vec3 rotate(const Quat& q, const Vec3& v) {
  // q v q* with v as a pure quaternion
  const Quat p{0, v[0], v[1], v[2]};
  const Quat r = q * p * conj(q);
  return {r.x, r.y, r.z};
}

inline Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  const double h = 0.5 * angle;
  const double s = std::sin(h);
  return {std::cos(h), s * axis[0], s * axis[1], s * axis[2]};
}

inline Quat quat_from_rotvec(const Vec3& rv) {
  const double angle = norm(rv);
  if (angle < 1e-12) {
    return normalized(Quat{1, 0.5 * rv[0], 0.5 * rv[1], 0.5 * rv[2]});
  }
  return quat_from_axis_angle({rv[0] / angle, rv[1] / angle, rv[2] / angle},
                              angle);
}

inline Vec3 rotvec_from_quat(const Quat& q_in) {
  Quat q = q_in;
  if (q.w < 0) q = {-q.w, -q.x, -q.y, -q.z};
  const double sin_half = std::sqrt(q.x * q.x + q.y * q.y + q.z * q.z);
  const double angle = 2.0 * std::atan2(sin_half, q.w);
  if (sin_half < 1e-12) return {2.0 * q.x, 2.0 * q.y, 2.0 * q.z};
  const double s = angle / sin_half;
  return {s * q.x, s * q.y, s * q.z};
}

// Geodesic angle between two orientations; invariant to quaternion sign.
// Identical (or negated) inputs short-circuit to exactly 0: the generic
// product leaves ~1e-28 rounding residue, which matters for bit-exact
// replay checks. atan2 keeps the small-angle regime well conditioned.
inline double quat_angle(const Quat& a, const Quat& b) {
  if ((a.w == b.w && a.x == b.x && a.y == b.y && a.z == b.z) ||
      (a.w == -b.w && a.x == -b.x && a.y == -b.y && a.z == -b.z))
    return 0.0;
  const Quat d = conj(a) * b;
  const double s = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
  return 2.0 * std::atan2(s, std::abs(d.w));
}

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Vec3 mat_mul(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
          m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

inline Quat quat_from_mat(const Mat3& m) {
  const double tr = m[0][0] + m[1][1] + m[2][2];
  Quat q;
  if (tr > 0) {
    const double s = std::sqrt(tr + 1.0) * 2;
    q.w = 0.25 * s;
    q.x = (m[2][1] - m[1][2]) / s;
    q.y = (m[0][2] - m[2][0]) / s;
    q.z = (m[1][0] - m[0][1]) / s;
  } else if (m[0][0] > m[1][1] && m[0][0] > m[2][2]) {
    const double s = std::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2;
    q.w = (m[2][1] - m[1][2]) / s;
    q.x = 0.25 * s;
    q.y = (m[0][1] + m[1][0]) / s;
    q.z = (m[0][2] + m[2][0]) / s;
  } else if (m[1][1] > m[2][2]) {
    const double s = std::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2;
    q.w = (m[0][2] - m[2][0]) / s;
    q.x = (m[0][1] + m[1][0]) / s;
    q.y = 0.25 * s;
    q.z = (m[1][2] + m[2][1]) / s;
  } else {
    const double s = std::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2;
    q.w = (m[1][0] - m[0][1]) / s;
    q.x = (m[0][2] + m[2][0]) / s;
    q.y = (m[1][2] + m[2][1]) / s;
    q.z = 0.25 * s;
  }
  return normalized(q);
}

// ---------------------------------------------------------------------------
// Errors. Categories map onto CLI exit codes.

enum class ErrorCategory : int { config = 2, io = 3, numeric = 4, contract = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory cat, const std::string& msg)
      : std::runtime_error(msg), category_(cat) {}
  ErrorCategory category() const { return category_; }
  int exit_code() const { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

inline void require(bool cond, ErrorCategory cat, const std::string& msg) {
  if (!cond) throw Error(cat, msg);
}

// ---------------------------------------------------------------------------
// Deterministic RNG. SplitMix64 core, explicit Box-Muller; the whole state
// is two integers so checkpoints can carry it exactly.

struct Rng {
  std::uint64_t state = 0x9e3779b97f4a7c15ULL;

  explicit Rng(std::uint64_t seed = 0) { state = seed; }

  std::uint64_t next_u64() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [lo, hi] inclusive
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

  double normal() {
    const double u1 =
        (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0,1]
    const double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
};

// Derives an independent stream from (run seed, stream id).
inline Rng rng_stream(std::uint64_t seed, std::uint64_t stream_id) {
  Rng mix(seed);
  mix.state ^= 0xd1342543de82ef95ULL * (stream_id + 1);
  // burn a few outputs so nearby stream ids decorrelate
  mix.next_u64();
  mix.next_u64();
  return Rng(mix.next_u64());
}

// Shortest round-trip decimal formatting; used everywhere a double is
// written to a file so logs and demos are byte-stable.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline bool all_finite(const double* p, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i])) return false;
  return true;
}

}  // namespace byd
