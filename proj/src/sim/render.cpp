#include "vilas/sim/render.hpp"

#include <algorithm>
#include <cmath>

namespace vilas::sim {

std::string_view camera_name(Camera c) { return c == Camera::base ? "base" : "wrist"; }

Projection base_projection(const SimConfig& config) {
  const auto& ws = config.task.workspace;
  return {ws.x_min, ws.y_max, ws.width() / config.camera.width};
}

Projection wrist_projection(const SimConfig& config, const WorldState& world) {
  const auto& cam = config.camera;
  return {world.tcp.position.x - cam.wrist_window_width / 2.0,
          world.tcp.position.y + cam.wrist_window_height / 2.0, cam.wrist_window_width / cam.width};
}

Rgb status_color(const SimConfig& config, ObjectStatus s) {
  switch (s) {
    case ObjectStatus::free: return config.task.object.color;
    case ObjectStatus::held: return palette::held;
    case ObjectStatus::deposited: return palette::deposited;
    case ObjectStatus::dropped: return palette::dropped;
  }
  return config.task.object.color;
}

namespace {

// Fills every pixel whose center lies inside the world-space rectangle.
void fill_rect(Image& img, const Projection& p, const Rect& r, Rgb color) {
  const int u0 = std::max(0, static_cast<int>(std::ceil(p.u(r.x_min) - 0.5)));
  const int u1 = std::min(img.width - 1, static_cast<int>(std::floor(p.u(r.x_max) - 0.5)));
  const int v0 = std::max(0, static_cast<int>(std::ceil(p.v(r.y_max) - 0.5)));
  const int v1 = std::min(img.height - 1, static_cast<int>(std::floor(p.v(r.y_min) - 0.5)));
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) img.set(u, v, color);
  }
}

// Fills every pixel whose center lies inside the disc.
void fill_disc(Image& img, const Projection& p, double cx, double cy, double radius, Rgb color) {
  const double cu = p.u(cx);
  const double cv = p.v(cy);
  const double rp = radius / p.meters_per_pixel;
  const int u0 = std::max(0, static_cast<int>(std::floor(cu - rp)));
  const int u1 = std::min(img.width - 1, static_cast<int>(std::ceil(cu + rp)));
  const int v0 = std::max(0, static_cast<int>(std::floor(cv - rp)));
  const int v1 = std::min(img.height - 1, static_cast<int>(std::ceil(cv + rp)));
  const double r2 = rp * rp;
  for (int v = v0; v <= v1; ++v) {
    const double dv = v + 0.5 - cv;
    for (int u = u0; u <= u1; ++u) {
      const double du = u + 0.5 - cu;
      if (du * du + dv * dv <= r2) img.set(u, v, color);
    }
  }
}

void draw_marker(Image& img, const Projection& p, double x, double y, int arm, Rgb color) {
  const int cu = static_cast<int>(std::floor(p.u(x)));
  const int cv = static_cast<int>(std::floor(p.v(y)));
  for (int d = -arm; d <= arm; ++d) {
    if (cu + d >= 0 && cu + d < img.width && cv >= 0 && cv < img.height) img.set(cu + d, cv, color);
    if (cv + d >= 0 && cv + d < img.height && cu >= 0 && cu < img.width) img.set(cu, cv + d, color);
  }
}

}  // namespace

Image render(const SimConfig& config, const WorldState& world, Camera camera) {
  Image img(config.camera.width, config.camera.height, palette::table);
  const Projection p = camera == Camera::base ? base_projection(config) : wrist_projection(config, world);

  fill_rect(img, p, world.box_region, palette::box);
  for (ObjectStatus pass : {ObjectStatus::dropped, ObjectStatus::deposited, ObjectStatus::free}) {
    for (const auto& o : world.objects) {
      if (o.status == pass) {
        fill_disc(img, p, o.center.x, o.center.y, o.diameter / 2.0, status_color(config, pass));
      }
    }
  }
  if (auto held = world.held_index()) {
    const auto& o = world.objects[*held];
    fill_disc(img, p, o.center.x, o.center.y, o.diameter / 2.0, palette::held);
  }
  if (camera == Camera::base) {
    draw_marker(img, p, world.tcp.position.x, world.tcp.position.y, 4, palette::tcp);
  }
  return img;
}

}  // namespace vilas::sim
