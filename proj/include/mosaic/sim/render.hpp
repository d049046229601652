#pragma once

#include "mosaic/core/image.hpp"
#include "mosaic/sim/world.hpp"

namespace mosaic::sim {

constexpr int kImageHeight = 48;
constexpr int kImageWidth = 72;

struct Rgb {
  uint8_t r, g, b;
};

namespace palette {
constexpr Rgb kBackground{38, 38, 42};
// reach targets
constexpr Rgb kReach[4] = {{225, 60, 60}, {60, 200, 90}, {70, 110, 230}, {230, 220, 70}};
// push: objects then zones
constexpr Rgb kPushObj[2] = {{240, 150, 50}, {60, 210, 210}};
constexpr Rgb kPushZone[2] = {{170, 60, 170}, {130, 150, 40}};
// pickplace: objects, bin borders, bin interior
constexpr Rgb kPickObj[2] = {{150, 70, 220}, {235, 235, 235}};
constexpr Rgb kBinBorder[2] = {{200, 120, 60}, {60, 160, 200}};
constexpr Rgb kBinInner{22, 22, 22};
// stack blocks share push-object geometry, colors differ
constexpr Rgb kStackBlock[2] = {{225, 60, 60}, {70, 110, 230}};
// arms
constexpr Rgb kImitatorArm{220, 220, 220};
constexpr Rgb kDemonstratorArm{150, 200, 255};
constexpr Rgb kGripClosed{30, 30, 30};
}  // namespace palette

namespace detail {

// Pixel (y, x) covers workspace point ((x+0.5)/W, (y+0.5)/H); a shape owns
// every pixel whose center it contains. Integer bounds derived with floor/
// ceil so rasterization is exact and deterministic.
inline void fill_rect(Image& img, double cx, double cy, double hx, double hy, Rgb c) {
  int W = img.width, H = img.height;
  int x0 = std::max(0, static_cast<int>(std::ceil((cx - hx) * W - 0.5)));
  int x1 = std::min(W - 1, static_cast<int>(std::floor((cx + hx) * W - 0.5)));
  int y0 = std::max(0, static_cast<int>(std::ceil((cy - hy) * H - 0.5)));
  int y1 = std::min(H - 1, static_cast<int>(std::floor((cy + hy) * H - 0.5)));
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      uint8_t* p = img.px(y, x);
      p[0] = c.r;
      p[1] = c.g;
      p[2] = c.b;
    }
}

inline void fill_disc(Image& img, double cx, double cy, double radius, Rgb c,
                      double inner_hole = 0.0) {
  int W = img.width, H = img.height;
  int x0 = std::max(0, static_cast<int>(std::floor((cx - radius) * W)));
  int x1 = std::min(W - 1, static_cast<int>(std::ceil((cx + radius) * W)));
  int y0 = std::max(0, static_cast<int>(std::floor((cy - radius) * H)));
  int y1 = std::min(H - 1, static_cast<int>(std::ceil((cy + radius) * H)));
  double r2 = radius * radius, h2 = inner_hole * inner_hole;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      double dx = (x + 0.5) / W - cx;
      double dy = (y + 0.5) / H - cy;
      double d2 = dx * dx + dy * dy;
      if (d2 <= r2 && d2 >= h2) {
        uint8_t* p = img.px(y, x);
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
      }
    }
}

inline void draw_arm(Image& img, const WorldState& s, const Morphology& morph) {
  double gx = s.gripper.x, gy = s.gripper.y;
  if (morph.role == Role::kImitator) {
    // plus-shaped end effector
    fill_rect(img, gx, gy, 0.045, 0.011, palette::kImitatorArm);
    fill_rect(img, gx, gy, 0.011, 0.045, palette::kImitatorArm);
  } else {
    fill_disc(img, gx, gy, 0.045, palette::kDemonstratorArm, 0.022);
  }
  if (s.grip_closed) fill_rect(img, gx, gy, 0.009, 0.009, palette::kGripClosed);
}

}  // namespace detail

// Flat-shaded raster of the scene. Deterministic: identical state and
// morphology produce byte-identical images. Static goal markers first, then
// the arm, then movable objects (a held object stays visible on top).
inline Image render(const WorldState& s, const Morphology& morph) {
  Image img(kImageHeight, kImageWidth);
  img.fill(palette::kBackground.r, palette::kBackground.g, palette::kBackground.b);
  using namespace detail;
  switch (s.task) {
    case Task::kReach:
      for (int i = 0; i < 4; ++i)
        fill_disc(img, s.entities[i].x, s.entities[i].y, geom::kTargetRadius, palette::kReach[i]);
      draw_arm(img, s, morph);
      break;
    case Task::kPush:
      for (int z = 0; z < 2; ++z)
        fill_rect(img, s.entities[2 + z].x, s.entities[2 + z].y, geom::kZoneHalf, geom::kZoneHalf,
                  palette::kPushZone[z]);
      draw_arm(img, s, morph);
      for (int o = 0; o < 2; ++o)
        fill_rect(img, s.entities[o].x, s.entities[o].y, geom::kObjectHalf, geom::kObjectHalf,
                  palette::kPushObj[o]);
      break;
    case Task::kPickPlace:
      for (int z = 0; z < 2; ++z) {
        fill_rect(img, s.entities[2 + z].x, s.entities[2 + z].y, geom::kZoneHalf, geom::kZoneHalf,
                  palette::kBinBorder[z]);
        fill_rect(img, s.entities[2 + z].x, s.entities[2 + z].y, geom::kZoneHalf - 0.016,
                  geom::kZoneHalf - 0.016, palette::kBinInner);
      }
      draw_arm(img, s, morph);
      for (int o = 0; o < 2; ++o)
        fill_rect(img, s.entities[o].x, s.entities[o].y, geom::kObjectHalf, geom::kObjectHalf,
                  palette::kPickObj[o]);
      break;
    case Task::kStack: {
      draw_arm(img, s, morph);
      // Most recently manipulated block sits on top, drawn smaller so the
      // base block reads as a border around it.
      int top = s.last_moved;
      for (int o = 0; o < 2; ++o) {
        if (o == top) continue;
        fill_rect(img, s.entities[o].x, s.entities[o].y, geom::kObjectHalf, geom::kObjectHalf,
                  palette::kStackBlock[o]);
      }
      if (top >= 0)
        fill_rect(img, s.entities[top].x, s.entities[top].y, geom::kObjectHalf - 0.008,
                  geom::kObjectHalf - 0.008, palette::kStackBlock[top]);
      break;
    }
  }
  return img;
}

inline Image render(const WorldState& s) { return render(s, morphology_for(s.role)); }

}  // namespace mosaic::sim
