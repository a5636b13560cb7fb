#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xsam/types.hpp"

namespace xsam {

inline constexpr double kMinFrameAngle = 1e-8;

/// Two unit vectors spanning the probe plane and the angle between them.
struct SlerpFrame {
  GradVector v0;
  GradVector v1;
  double psi = 0.0;

  bool degenerate() const { return !(psi >= kMinFrameAngle && psi <= std::numbers::pi - kMinFrameAngle); }
};

/// Normalizes both spanning vectors and measures ψ = arccos(v₀·v₁).
inline SlerpFrame make_frame(const GradVector& a, const GradVector& b) {
  if (a.size() != b.size()) throw DimensionMismatch("make_frame: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw DegenerateFrame("make_frame: zero spanning vector");
  SlerpFrame f{a / na, b / nb, 0.0};
  f.psi = std::acos(std::clamp(f.v0.dot(f.v1), -1.0, 1.0));
  return f;
}

/// v(α) = [sin((1−α)ψ)·v₀ + sin(αψ)·v₁] / sin ψ: the unit vector rotated αψ
/// from v₀ toward v₁.
inline GradVector slerp(const SlerpFrame& frame, double alpha) {
  if (frame.degenerate()) throw DegenerateFrame("slerp: spanning vectors (anti)parallel");
  const double s = std::sin(frame.psi);
  const double c0 = std::sin((1.0 - alpha) * frame.psi) / s;
  const double c1 = std::sin(alpha * frame.psi) / s;
  return c0 * frame.v0 + c1 * frame.v1;
}

}  // namespace xsam
