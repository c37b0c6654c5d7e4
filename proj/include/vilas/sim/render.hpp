#pragma once

#include <string_view>

#include "vilas/image.hpp"
#include "vilas/sim/world.hpp"

namespace vilas::sim {

enum class Camera { base, wrist };
std::string_view camera_name(Camera c);

/// Orthographic top-down projection used by both cameras. Pixel (u, v) has
/// its center at world (origin_x + (u + 0.5) * mpp, origin_y - (v + 0.5) * mpp):
/// +x runs right and +y runs up the image.
struct Projection {
  double origin_x = 0;  // world x of the left image edge
  double origin_y = 0;  // world y of the top image edge
  double meters_per_pixel = 0;

  double u(double x) const { return (x - origin_x) / meters_per_pixel; }
  double v(double y) const { return (origin_y - y) / meters_per_pixel; }
  double x(double u) const { return origin_x + u * meters_per_pixel; }
  double y(double v) const { return origin_y - v * meters_per_pixel; }
};

/// Base camera covers the workspace; 1 px = workspace width / image width.
Projection base_projection(const SimConfig& config);
/// Wrist camera is centered on the TCP and covers the wrist window.
Projection wrist_projection(const SimConfig& config, const WorldState& world);

namespace palette {
inline constexpr Rgb table{206, 196, 176};
inline constexpr Rgb box{92, 64, 44};
inline constexpr Rgb held{236, 200, 40};
inline constexpr Rgb deposited{60, 150, 70};
inline constexpr Rgb dropped{120, 120, 120};
inline constexpr Rgb tcp{220, 30, 30};
}  // namespace palette

Rgb status_color(const SimConfig& config, ObjectStatus s);

Image render(const SimConfig& config, const WorldState& world, Camera camera);

}  // namespace vilas::sim
