#pragma once

#include <vector>

#include "etrs/model.hpp"

namespace etrs::testing {

// F = {|x| <= 1, |x| <= 1 - x1 - x2} in the plane.
inline EtrsInstance orthogonal_instance() {
  EtrsInstance inst;
  inst.n = 2;
  inst.H = Mat::Zero(2, 2);
  inst.g = Vec::Zero(2);
  inst.gamma = 0.0;
  inst.nu = 1.0;
  inst.c = Vec::Zero(2);
  inst.b = Vec::Constant(2, -1.0);
  inst.alpha = -1.0;
  inst.interior_point = Vec::Zero(2);
  return inst;
}

// -|x|^2 - 1.1 x1 - x2 over the same set.
inline EtrsInstance closed_gap_instance() {
  EtrsInstance inst = orthogonal_instance();
  inst.H = -Mat::Identity(2, 2);
  inst.g = (Vec(2) << -0.55, -0.5).finished();
  return inst;
}

// A two-dimensional TTRS instance (b = 0).
inline EtrsInstance ttrs_instance() {
  EtrsInstance inst;
  inst.n = 2;
  inst.H = (Mat(2, 2) << -1.32, 0.21, 0.21, -0.81).finished();
  inst.g = (Vec(2) << -0.25, 0.05).finished();
  inst.gamma = 0.0;
  inst.nu = 1.0;
  inst.c = (Vec(2) << -0.38, 0.18).finished();
  inst.b = Vec::Zero(2);
  inst.alpha = -0.77;
  inst.interior_point = Vec::Zero(2);
  return inst;
}

/// Bordered objective [[k, w'], [w, W]] so that C . Y = k + 2w'x + W . X.
inline Mat bordered(double k, const Vec& w, const Mat& W) {
  const auto n = w.size();
  Mat c(n + 1, n + 1);
  c(0, 0) = k;
  c.block(1, 0, n, 1) = w;
  c.block(0, 1, 1, n) = w.transpose();
  c.bottomRightCorner(n, n) = W;
  return c;
}

inline std::vector<Vec> feasible_samples(const EtrsInstance& inst, int count, std::uint64_t seed) {
  FeasibleSampler sampler(inst, seed);
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    auto x = sampler.next();
    if (!x) break;
    out.push_back(*x);
  }
  return out;
}

}  // namespace etrs::testing
