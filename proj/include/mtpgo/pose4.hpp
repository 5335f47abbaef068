#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mtpgo {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

// Maps any finite angle into (-pi, pi]; the interval is open at -pi.
inline double wrap_yaw(double theta) {
  if (!std::isfinite(theta)) {
    throw std::invalid_argument("wrap_yaw: angle must be finite");
  }
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(theta + std::numbers::pi, two_pi);
  if (r <= 0.0) {
    r += two_pi;
  }
  return r - std::numbers::pi;
}

inline Mat3 rz(double theta) {
  if (!std::isfinite(theta)) {
    throw std::invalid_argument("rz: angle must be finite");
  }
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat3 m;
  m << c, -s, 0.0,
       s,  c, 0.0,
       0.0, 0.0, 1.0;
  return m;
}

// Yaw plus 3D translation. A pose stored on a tree node is the pose of that
// node's frame expressed in its parent's frame:
//   x_parent = rz(yaw) * x_child + trans.
struct Pose4 {
  double yaw = 0.0;
  Vec3 trans = Vec3::Zero();

  Pose4() = default;

  Pose4(double yaw_in, const Vec3& trans_in) : yaw(wrap_yaw(yaw_in)), trans(trans_in) {
    if (!trans.allFinite()) {
      throw std::invalid_argument("Pose4: translation must be finite");
    }
  }

  Pose4(double yaw_in, double tx, double ty, double tz) : Pose4(yaw_in, Vec3(tx, ty, tz)) {}

  static Pose4 identity() { return Pose4(); }
};

inline Pose4 compose(const Pose4& a, const Pose4& b) {
  const double c = std::cos(a.yaw);
  const double s = std::sin(a.yaw);
  Pose4 out;
  out.yaw = wrap_yaw(a.yaw + b.yaw);
  out.trans.x() = a.trans.x() + c * b.trans.x() - s * b.trans.y();
  out.trans.y() = a.trans.y() + s * b.trans.x() + c * b.trans.y();
  out.trans.z() = a.trans.z() + b.trans.z();
  return out;
}

inline Pose4 inverse(const Pose4& a) {
  const double c = std::cos(a.yaw);
  const double s = std::sin(a.yaw);
  Pose4 out;
  out.yaw = wrap_yaw(-a.yaw);
  // -rz(-yaw) * trans
  out.trans.x() = -(c * a.trans.x() + s * a.trans.y());
  out.trans.y() = -(-s * a.trans.x() + c * a.trans.y());
  out.trans.z() = -a.trans.z();
  return out;
}

// Pose of b expressed in a's frame, both given in a common frame.
inline Pose4 relative(const Pose4& a, const Pose4& b) {
  return compose(inverse(a), b);
}

}  // namespace mtpgo
