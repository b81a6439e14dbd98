#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/AutoDiff>

namespace reldiff::ad {

using AD1 = Eigen::AutoDiffScalar<Eigen::Vector4d>;
using AD1Vec = Eigen::Matrix<AD1, 4, 1>;
using AD2 = Eigen::AutoDiffScalar<AD1Vec>;

template <class T>
using Vec4T = Eigen::Matrix<T, 4, 1>;
template <class T>
using Mat4T = Eigen::Matrix<T, 4, 4>;

inline Vec4T<AD1> seed1(const Eigen::Vector4d& x) {
  Vec4T<AD1> out;
  for (int i = 0; i < 4; ++i) out(i) = AD1(x(i), Eigen::Vector4d::Unit(i));
  return out;
}

inline Vec4T<AD2> seed2(const Eigen::Vector4d& x) {
  Vec4T<AD2> out;
  for (int i = 0; i < 4; ++i) {
    AD1 inner(x(i), Eigen::Vector4d::Unit(i));
    AD1Vec outer = AD1Vec::Constant(AD1(0.0, Eigen::Vector4d::Zero()));
    outer(i) = AD1(1.0, Eigen::Vector4d::Zero());
    out(i) = AD2(inner, outer);
  }
  return out;
}

inline double value(double x) { return x; }
inline double value(const AD1& x) { return x.value(); }
inline double value(const AD2& x) { return x.value().value(); }

}  // namespace reldiff::ad
