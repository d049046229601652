#pragma once

#include <cmath>
#include <vector>

#include "mosaic/core/image.hpp"
#include "mosaic/core/rng.hpp"

namespace mosaic::data {

// All magnitudes zero => exact identity. One parameter draw per call is
// shared by every frame in the stack, preserving intra-video consistency.
struct AugmentConfig {
  double translate_frac = 0.08;
  double crop_retain = 0.9;  // 1.0 disables
  double brightness = 0.15;
  double contrast = 0.15;
  double saturation = 0.15;
  int blur_kernel = 5;
  double blur_sigma_lo = 0.1;
  double blur_sigma_hi = 0.8;

  bool is_identity() const {
    return translate_frac == 0.0 && crop_retain == 1.0 && brightness == 0.0 && contrast == 0.0 &&
           saturation == 0.0 && (blur_kernel <= 1 || blur_sigma_hi <= 0.0);
  }

  static AugmentConfig identity() {
    AugmentConfig c;
    c.translate_frac = 0;
    c.crop_retain = 1.0;
    c.brightness = c.contrast = c.saturation = 0;
    c.blur_kernel = 0;
    c.blur_sigma_lo = c.blur_sigma_hi = 0;
    return c;
  }
};

namespace detail {

inline uint8_t clamp_u8(double v) {
  return static_cast<uint8_t>(std::min(255.0, std::max(0.0, std::floor(v + 0.5))));
}

inline Image translate(const Image& in, int dx, int dy) {
  Image out(in.height, in.width);
  for (int y = 0; y < in.height; ++y) {
    int sy = std::clamp(y - dy, 0, in.height - 1);
    for (int x = 0; x < in.width; ++x) {
      int sx = std::clamp(x - dx, 0, in.width - 1);
      std::memcpy(out.px(y, x), in.px(sy, sx), 3);
    }
  }
  return out;
}

// Crop [oy, oy+ch) x [ox, ox+cw) and bilinearly resize back to full size.
inline Image crop_resize(const Image& in, int oy, int ox, int ch, int cw) {
  if (ch == in.height && cw == in.width && oy == 0 && ox == 0) return in;
  Image out(in.height, in.width);
  double sy = static_cast<double>(ch) / in.height;
  double sx = static_cast<double>(cw) / in.width;
  for (int y = 0; y < in.height; ++y) {
    double fy = (y + 0.5) * sy - 0.5 + oy;
    int y0 = static_cast<int>(std::floor(fy));
    double wy = fy - y0;
    int y0c = std::clamp(y0, 0, in.height - 1);
    int y1c = std::clamp(y0 + 1, 0, in.height - 1);
    for (int x = 0; x < in.width; ++x) {
      double fx = (x + 0.5) * sx - 0.5 + ox;
      int x0 = static_cast<int>(std::floor(fx));
      double wx = fx - x0;
      int x0c = std::clamp(x0, 0, in.width - 1);
      int x1c = std::clamp(x0 + 1, 0, in.width - 1);
      const uint8_t* p00 = in.px(y0c, x0c);
      const uint8_t* p01 = in.px(y0c, x1c);
      const uint8_t* p10 = in.px(y1c, x0c);
      const uint8_t* p11 = in.px(y1c, x1c);
      uint8_t* o = out.px(y, x);
      for (int c = 0; c < 3; ++c) {
        double v = (1 - wy) * ((1 - wx) * p00[c] + wx * p01[c]) +
                   wy * ((1 - wx) * p10[c] + wx * p11[c]);
        o[c] = clamp_u8(v);
      }
    }
  }
  return out;
}

inline void jitter_inplace(Image& img, double fb, double fc, double fs) {
  // brightness, then contrast about the frame's gray mean, then saturation
  double mean = 0;
  for (size_t i = 0; i < img.pixels.size(); i += 3) {
    mean += 0.299 * img.pixels[i] + 0.587 * img.pixels[i + 1] + 0.114 * img.pixels[i + 2];
  }
  mean /= (img.pixels.size() / 3);
  for (size_t i = 0; i < img.pixels.size(); i += 3) {
    double r = img.pixels[i] * fb;
    double g = img.pixels[i + 1] * fb;
    double b = img.pixels[i + 2] * fb;
    r = (r - mean) * fc + mean;
    g = (g - mean) * fc + mean;
    b = (b - mean) * fc + mean;
    double gray = 0.299 * r + 0.587 * g + 0.114 * b;
    r = gray + (r - gray) * fs;
    g = gray + (g - gray) * fs;
    b = gray + (b - gray) * fs;
    img.pixels[i] = clamp_u8(r);
    img.pixels[i + 1] = clamp_u8(g);
    img.pixels[i + 2] = clamp_u8(b);
  }
}

inline Image gaussian_blur(const Image& in, int kernel, double sigma) {
  int half = kernel / 2;
  std::vector<double> k(kernel);
  double sum = 0;
  for (int i = 0; i < kernel; ++i) {
    double d = i - half;
    k[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  // horizontal then vertical, edge clamp
  std::vector<double> tmp(in.pixels.size());
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = 0; i < kernel; ++i) {
          int sx = std::clamp(x + i - half, 0, in.width - 1);
          acc += k[i] * in.px(y, sx)[c];
        }
        tmp[(static_cast<size_t>(y) * in.width + x) * 3 + c] = acc;
      }
  Image out(in.height, in.width);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = 0; i < kernel; ++i) {
          int sy = std::clamp(y + i - half, 0, in.height - 1);
          acc += k[i] * tmp[(static_cast<size_t>(sy) * in.width + x) * 3 + c];
        }
        out.px(y, x)[c] = clamp_u8(acc);
      }
  return out;
}

}  // namespace detail

// translate -> crop-and-resize -> color jitter -> gaussian blur, one random
// draw applied to every frame of the stack. Shape and dtype are preserved.
inline std::vector<Image> augment(const std::vector<Image>& frames, const AugmentConfig& cfg,
                                  Rng& rng) {
  if (frames.empty()) return {};
  if (cfg.is_identity()) return frames;
  int H = frames[0].height, W = frames[0].width;

  int dx = 0, dy = 0;
  if (cfg.translate_frac > 0) {
    dx = static_cast<int>(std::llround(rng.uniform(-cfg.translate_frac, cfg.translate_frac) * W));
    dy = static_cast<int>(std::llround(rng.uniform(-cfg.translate_frac, cfg.translate_frac) * H));
  }
  int ch = H, cw = W, oy = 0, ox = 0;
  if (cfg.crop_retain < 1.0) {
    ch = std::max(1, static_cast<int>(std::llround(cfg.crop_retain * H)));
    cw = std::max(1, static_cast<int>(std::llround(cfg.crop_retain * W)));
    oy = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(H - ch + 1)));
    ox = static_cast<int>(rng.uniform_int(static_cast<uint32_t>(W - cw + 1)));
  }
  double fb = cfg.brightness > 0 ? rng.uniform(1 - cfg.brightness, 1 + cfg.brightness) : 1.0;
  double fc = cfg.contrast > 0 ? rng.uniform(1 - cfg.contrast, 1 + cfg.contrast) : 1.0;
  double fs = cfg.saturation > 0 ? rng.uniform(1 - cfg.saturation, 1 + cfg.saturation) : 1.0;
  bool do_blur = cfg.blur_kernel > 1 && cfg.blur_sigma_hi > 0;
  double sigma = do_blur ? rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi) : 0.0;

  std::vector<Image> out;
  out.reserve(frames.size());
  for (const Image& f : frames) {
    check(f.height == H && f.width == W, "augment: inconsistent frame sizes");
    Image img = (dx != 0 || dy != 0) ? detail::translate(f, dx, dy) : f;
    img = detail::crop_resize(img, oy, ox, ch, cw);
    if (fb != 1.0 || fc != 1.0 || fs != 1.0) detail::jitter_inplace(img, fb, fc, fs);
    if (do_blur) img = detail::gaussian_blur(img, cfg.blur_kernel, sigma);
    out.push_back(std::move(img));
  }
  return out;
}

}  // namespace mosaic::data
