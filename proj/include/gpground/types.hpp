#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace gpground {

enum class Label : std::uint8_t { NonGround = 0, Ground = 1, Unlabeled = 2 };

/// One LiDAR return in the sensor frame (z up). Coordinates are kept in
/// double even when the source file stores float32.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  float intensity = 0.0f;
  Label truth = Label::Unlabeled;
  // True local terrain grade for synthetic ground points; NaN when unknown.
  double true_grade = std::numeric_limits<double>::quiet_NaN();
};

struct Frame {
  std::vector<Point3> points;
  std::string source_id;
  // Records rejected at load because a coordinate was not finite.
  std::size_t dropped_nonfinite = 0;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }

  bool has_truth() const noexcept {
    for (const auto& p : points)
      if (p.truth != Label::Unlabeled) return true;
    return false;
  }
};

/// A point projected onto the (range, height) plane of its angular segment.
struct RZ {
  double r = 0.0;
  double z = 0.0;
};

}  // namespace gpground
