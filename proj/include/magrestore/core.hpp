// Vector/quaternion primitives and the closed-form accelerometer/magnetometer
// quaternion construction used throughout the pipeline.
//
// Conventions (fixed for the whole project):
//   - Navigation frame is North-East-Down; gravity direction is (0,0,1).
//   - Quaternions are scalar-first (q0,q1,q2,q3) and rotate body -> nav:
//     v_nav = R(q) * v_body.
//   - The normalized accelerometer reading is the body-frame gravity
//     direction, so a level sensor reads a = (0,0,1).
//   - The navigation-frame geomagnetic field direction is (mN, 0, mD) with
//     mN = cos(dip) >= 0 and mD = sin(dip).

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace magrestore {

template <typename S> using Vec3T = Eigen::Matrix<S, 3, 1>;
template <typename S> using Vec4T = Eigen::Matrix<S, 4, 1>;
template <typename S> using Mat3T = Eigen::Matrix<S, 3, 3>;

using Vec3 = Vec3T<double>;
using Vec4 = Vec4T<double>;
using Quat = Vec4;  // scalar-first attitude quaternion
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

inline constexpr double unit_norm_tol = 1e-9;

// Projections of the unit field direction onto gravity (mD) and the
// horizontal plane (mN). mN is the non-negative root, mN^2 + mD^2 = 1.
struct MagProjections {
  double mD = 0.0;
  double mN = 1.0;
};

struct EulerAngles {
  double roll = 0.0;   // rad, about body x
  double pitch = 0.0;  // rad, about body y, in [-pi/2, pi/2]
  double yaw = 0.0;    // rad, about nav z, in (-pi, pi]
  bool gimbal_lock = false;
};

namespace detail {

template <typename S>
inline void require_unit(const Vec3T<S>& v, const char* name) {
  using std::abs;
  if (abs(v.norm() - S(1)) > S(unit_norm_tol))
    throw std::invalid_argument(std::string(name) + " must be a unit vector");
}

template <typename S>
inline void require_unit_quat(const Vec4T<S>& q, const char* name) {
  using std::abs;
  if (abs(q.norm() - S(1)) > S(unit_norm_tol))
    throw std::invalid_argument(std::string(name) + " must be a unit quaternion");
}

}  // namespace detail

inline double wrap_pi(double angle) {
  double a = std::remainder(angle, 2.0 * M_PI);
  if (a <= -M_PI) a = M_PI;  // keep (-pi, pi]
  return a;
}

template <typename S>
Vec4T<S> quat_multiply(const Vec4T<S>& p, const Vec4T<S>& q) {
  Vec4T<S> r;
  r(0) = p(0) * q(0) - p(1) * q(1) - p(2) * q(2) - p(3) * q(3);
  r(1) = p(0) * q(1) + p(1) * q(0) + p(2) * q(3) - p(3) * q(2);
  r(2) = p(0) * q(2) - p(1) * q(3) + p(2) * q(0) + p(3) * q(1);
  r(3) = p(0) * q(3) + p(1) * q(2) - p(2) * q(1) + p(3) * q(0);
  return r;
}

template <typename S>
Vec4T<S> quat_conjugate(const Vec4T<S>& q) {
  return Vec4T<S>(q(0), -q(1), -q(2), -q(3));
}

// Direction cosine matrix of q (body -> nav).
template <typename S>
Mat3T<S> quat_to_rotmat(const Vec4T<S>& q) {
  const S w = q(0), x = q(1), y = q(2), z = q(3);
  Mat3T<S> r;
  r(0, 0) = 1 - 2 * (y * y + z * z);
  r(0, 1) = 2 * (x * y - w * z);
  r(0, 2) = 2 * (x * z + w * y);
  r(1, 0) = 2 * (x * y + w * z);
  r(1, 1) = 1 - 2 * (x * x + z * z);
  r(1, 2) = 2 * (y * z - w * x);
  r(2, 0) = 2 * (x * z - w * y);
  r(2, 1) = 2 * (y * z + w * x);
  r(2, 2) = 1 - 2 * (x * x + y * y);
  return r;
}

// v expressed in nav axes given its body coordinates.
template <typename S>
Vec3T<S> quat_rotate(const Vec4T<S>& q, const Vec3T<S>& v) {
  return quat_to_rotmat(q) * v;
}

// v expressed in body axes given its nav coordinates.
template <typename S>
Vec3T<S> quat_rotate_inverse(const Vec4T<S>& q, const Vec3T<S>& v) {
  return quat_to_rotmat(q).transpose() * v;
}

template <typename S>
Vec4T<S> quat_normalized(const Vec4T<S>& q) {
  const S n = q.norm();
  if (!(n > S(0))) throw std::domain_error("cannot normalize zero quaternion");
  return q / n;
}

// Canonical sign: q0 >= 0, ties broken by the first nonzero component.
template <typename S>
Vec4T<S> quat_canonical(const Vec4T<S>& q) {
  for (int i = 0; i < 4; ++i) {
    if (q(i) > S(0)) return q;
    if (q(i) < S(0)) return Vec4T<S>(-q);
  }
  return q;
}

// q or -q, whichever has non-negative dot product with ref. Zero dot keeps q.
template <typename S>
Vec4T<S> quat_align_sign(const Vec4T<S>& q, const Vec4T<S>& ref) {
  return q.dot(ref) < S(0) ? Vec4T<S>(-q) : q;
}

template <typename S>
Vec4T<S> quat_from_axis_angle(const Vec3T<S>& axis, S angle) {
  using std::cos;
  using std::sin;
  detail::require_unit(axis, "axis");
  Vec4T<S> q;
  q(0) = cos(angle / 2);
  q.template tail<3>() = sin(angle / 2) * axis;
  return q;
}

// Right-multiplied body-rate integration step: q <- q (x) exp(omega*dt/2).
template <typename S>
Vec4T<S> quat_integrate(const Vec4T<S>& q, const Vec3T<S>& omega, S dt) {
  using std::cos;
  using std::sin;
  const S angle = omega.norm() * dt;
  Vec4T<S> d;
  if (angle < S(1e-12)) {
    d(0) = S(1);
    d.template tail<3>() = omega * (dt / 2);
  } else {
    d(0) = cos(angle / 2);
    d.template tail<3>() = (sin(angle / 2) / omega.norm()) * omega;
  }
  return quat_normalized(quat_multiply(q, d));
}

// Aerospace Z-Y-X sequence: q = qz(yaw) (x) qy(pitch) (x) qx(roll).
inline Quat euler_to_quat(double roll, double pitch, double yaw) {
  const double cr = std::cos(roll / 2), sr = std::sin(roll / 2);
  const double cp = std::cos(pitch / 2), sp = std::sin(pitch / 2);
  const double cy = std::cos(yaw / 2), sy = std::sin(yaw / 2);
  Quat q;
  q(0) = cy * cp * cr + sy * sp * sr;
  q(1) = cy * cp * sr - sy * sp * cr;
  q(2) = cy * sp * cr + sy * cp * sr;
  q(3) = sy * cp * cr - cy * sp * sr;
  return q;
}

inline EulerAngles quat_to_euler(const Quat& q) {
  detail::require_unit_quat(q, "q");
  EulerAngles e;
  const double w = q(0), x = q(1), y = q(2), z = q(3);
  const double sp = 2.0 * (w * y - x * z);
  if (std::abs(sp) >= 1.0 - 1e-12) {
    // Gimbal lock: only yaw -/+ roll is observable; report roll = 0.
    e.gimbal_lock = true;
    e.pitch = std::copysign(M_PI / 2.0, sp);
    e.roll = 0.0;
    e.yaw = wrap_pi(std::atan2(-2.0 * (x * y - w * z), 1.0 - 2.0 * (x * x + z * z)));
    return e;
  }
  e.pitch = std::asin(sp);
  e.roll = std::atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y));
  e.yaw = wrap_pi(std::atan2(2.0 * (x * y + w * z), 1.0 - 2.0 * (y * y + z * z)));
  return e;
}

// Body-frame gravity direction implied by the attitude (third row of R).
template <typename S>
Vec3T<S> gravity_from_quat(const Vec4T<S>& q) {
  detail::require_unit_quat(q, "q");
  const S w = q(0), x = q(1), y = q(2), z = q(3);
  return Vec3T<S>(2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y));
}

// Body-frame direction of the nav-frame field (mN, 0, mD) for attitude q.
template <typename S>
Vec3T<S> mag_dir_from_quat(const Vec4T<S>& q, S mN, S mD) {
  detail::require_unit_quat(q, "q");
  return quat_rotate_inverse(q, Vec3T<S>(mN, S(0), mD));
}

template <typename S>
MagProjections mag_projections(const Vec3T<S>& a, const Vec3T<S>& m) {
  detail::require_unit(a, "a");
  detail::require_unit(m, "m");
  double mD = static_cast<double>(a.dot(m));
  if (mD > 1.0) mD = 1.0;  // rounding clamp
  if (mD < -1.0) mD = -1.0;
  MagProjections p;
  p.mD = mD;
  p.mN = std::sqrt(std::max(0.0, 1.0 - mD * mD));
  return p;
}

// Unnormalized attitude quaternion from the body gravity direction a and the
// body field direction m. Degenerates to zero as a_z -> 1.
template <typename S>
std::pair<Vec4T<S>, MagProjections> quat_from_acc_mag(const Vec3T<S>& a,
                                                      const Vec3T<S>& m) {
  const MagProjections p = mag_projections(a, m);
  const S mD = S(p.mD), mN = S(p.mN);
  const S ax = a(0), ay = a(1), az = a(2);
  const S mx = m(0), my = m(1), mz = m(2);
  Vec4T<S> q;
  q(0) = -ay * (mN + mx) + ax * my;
  q(1) = (az - 1) * (mN + mx) + ax * (mD - mz);
  q(2) = (az - 1) * my + ay * (mD - mz);
  q(3) = az * mD - ax * mN - mz;
  return {q, p};
}

// Closed form of ||quat_from_acc_mag(a, m)|| for unit inputs. The radicand
// suffers catastrophic cancellation near the construction singularity, where
// the 1/sqrt amplification would dominate; it is evaluated in extended
// precision so the result stays accurate to ~1e-13 absolute everywhere.
inline double quat_norm_closed_form(const Vec3& a, const Vec3& m) {
  detail::require_unit(a, "a");
  detail::require_unit(m, "m");
  // Renormalize exactly: the identity only holds on the unit sphere, and the
  // residual of machine-unit inputs gets amplified by 1/sqrt near degeneracy.
  Vec3T<long double> al = a.cast<long double>();
  Vec3T<long double> ml = m.cast<long double>();
  al /= al.norm();
  ml /= ml.norm();
  const long double ax = al(0), az = al(2);
  const long double mx = ml(0), mz = ml(2);
  long double mD = al.dot(ml);
  if (mD > 1.0L) mD = 1.0L;
  if (mD < -1.0L) mD = -1.0L;
  const long double mN = sqrtl(1.0L - mD * mD);
  long double radicand = mN * ((1.0L - az) * (mN + mx) - ax * (mD - mz));
  if (radicand < 0.0L) {
    if (radicand < -1e-12L)
      throw std::domain_error("quat_norm_closed_form: negative radicand");
    radicand = 0.0L;
  }
  return static_cast<double>(2.0L * sqrtl(radicand));
}

}  // namespace magrestore
