#include <array>
#include <cmath>
#include <random>

#include "srnam/errors.hpp"
#include "srnam/imagedata.hpp"
#include "srnam/rng.hpp"

namespace srnam::imagedata {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Portable draws on top of mt19937_64 (the std distributions are
// implementation-defined).
class Draw {
 public:
  explicit Draw(uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 rng_;
};

using Rgb = std::array<double, 3>;

struct FaceParams {
  Rgb background;
  Rgb skin;
  Rgb hair;
  Rgb eye;
  Rgb mouth;
  double cx, cy, a, b, theta;
  double eye_dx, eye_dy, eye_r;
  double mouth_dy, mouth_hw, mouth_hh;
  double hair_line;
  double light_angle, light_strength;
};

FaceParams draw_face(Draw& d) {
  FaceParams f{};
  for (auto& c : f.background) c = d.uniform(0.05, 0.95);
  const double tone = d.uniform(0.55, 1.1);
  f.skin = {std::min(1.0, 0.92 * tone), 0.70 * tone, 0.56 * tone * d.uniform(0.85, 1.1)};
  const double hair_tone = d.uniform(0.05, 0.6);
  f.hair = {hair_tone, hair_tone * d.uniform(0.6, 0.9), hair_tone * d.uniform(0.3, 0.7)};
  f.eye = {0.08, 0.07, d.uniform(0.05, 0.2)};
  f.mouth = {d.uniform(0.45, 0.7), 0.15, 0.18};
  f.cx = 32.0 + d.uniform(-5.0, 5.0);
  f.cy = 33.0 + d.uniform(-4.0, 4.0);
  f.a = d.uniform(15.0, 20.0);
  f.b = d.uniform(19.0, 25.0);
  f.theta = d.uniform(-0.35, 0.35);
  f.eye_dx = d.uniform(0.32, 0.42);
  f.eye_dy = d.uniform(-0.25, -0.12);
  f.eye_r = d.uniform(2.0, 3.5);
  f.mouth_dy = d.uniform(0.4, 0.55);
  f.mouth_hw = d.uniform(0.25, 0.45);
  f.mouth_hh = d.uniform(1.0, 2.2);
  f.hair_line = d.uniform(-0.75, -0.5);
  f.light_angle = d.uniform(0.0, 2.0 * kPi);
  f.light_strength = d.uniform(0.0, 0.35);
  return f;
}

Rgb shade(const FaceParams& f, double x, double y) {
  const double dx = x - f.cx;
  const double dy = y - f.cy;
  const double c = std::cos(f.theta);
  const double s = std::sin(f.theta);
  // Head frame: u to the face's right, v downwards.
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  const double r = (u * u) / (f.a * f.a) + (v * v) / (f.b * f.b);
  Rgb color = f.background;
  if (r <= 1.0) {
    color = v < f.hair_line * f.b ? f.hair : f.skin;
    const double ey = f.eye_dy * f.b;
    for (double side : {-1.0, 1.0}) {
      const double ex = side * f.eye_dx * f.a;
      if ((u - ex) * (u - ex) + (v - ey) * (v - ey) <= f.eye_r * f.eye_r) color = f.eye;
    }
    const double nose = 0.1 * f.b;
    if (std::abs(u) <= 1.0 && v > nose - 3.0 && v < nose + 3.0) {
      for (auto& ch : color) ch *= 0.8;
    }
    if (std::abs(u) <= f.mouth_hw * f.a && std::abs(v - f.mouth_dy * f.b) <= f.mouth_hh) {
      color = f.mouth;
    }
  }
  const double light = 1.0 + f.light_strength *
                                 (dx * std::cos(f.light_angle) + dy * std::sin(f.light_angle)) / 32.0;
  for (auto& ch : color) ch = std::clamp(ch * light, 0.0, 1.0);
  return color;
}

// Renders at 64x64 with 2x2 supersampling; values in [0, 1], (3, 64, 64).
std::vector<double> render_hr(const FaceParams& f) {
  constexpr int64_t n = kHrSide;
  std::vector<double> img(static_cast<size_t>(3 * n * n));
  for (int64_t y = 0; y < n; ++y) {
    for (int64_t x = 0; x < n; ++x) {
      Rgb acc{0, 0, 0};
      for (double oy : {0.25, 0.75}) {
        for (double ox : {0.25, 0.75}) {
          const Rgb c = shade(f, static_cast<double>(x) + ox, static_cast<double>(y) + oy);
          for (int k = 0; k < 3; ++k) acc[k] += 0.25 * c[k];
        }
      }
      for (int64_t k = 0; k < 3; ++k) img[static_cast<size_t>((k * n + y) * n + x)] = acc[k];
    }
  }
  return img;
}

void blur(std::vector<double>& img, int64_t n, double sigma) {
  const int radius = static_cast<int>(std::ceil(2.5 * sigma));
  std::vector<double> kernel(static_cast<size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[static_cast<size_t>(i + radius)];
  }
  for (auto& k : kernel) k /= sum;
  std::vector<double> tmp(img.size());
  auto at = [n](int64_t c, int64_t y, int64_t x) { return static_cast<size_t>((c * n + y) * n + x); };
  auto clampi = [n](int64_t i) { return std::clamp<int64_t>(i, 0, n - 1); };
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < n; ++y)
      for (int64_t x = 0; x < n; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[static_cast<size_t>(i + radius)] * img[at(c, y, clampi(x + i))];
        tmp[at(c, y, x)] = acc;
      }
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < n; ++y)
      for (int64_t x = 0; x < n; ++x) {
        double acc = 0;
        for (int i = -radius; i <= radius; ++i) acc += kernel[static_cast<size_t>(i + radius)] * tmp[at(c, clampi(y + i), x)];
        img[at(c, y, x)] = acc;
      }
}

// Blur, 4x area decimation, colour cast, contrast loss and sensor noise.
std::vector<double> degrade_lr(std::vector<double> hr, Draw& d) {
  blur(hr, kHrSide, d.uniform(0.6, 2.0));
  constexpr int64_t n = kLrSide;
  constexpr int64_t f = kHrSide / kLrSide;
  std::vector<double> lr(static_cast<size_t>(3 * n * n));
  Rgb cast;
  for (auto& c : cast) c = d.uniform(0.85, 1.15);
  const double contrast = d.uniform(0.7, 1.0);
  const double noise = d.uniform(0.01, 0.06);
  for (int64_t c = 0; c < 3; ++c) {
    for (int64_t y = 0; y < n; ++y) {
      for (int64_t x = 0; x < n; ++x) {
        double acc = 0;
        for (int64_t dy = 0; dy < f; ++dy)
          for (int64_t dx = 0; dx < f; ++dx)
            acc += hr[static_cast<size_t>((c * kHrSide + y * f + dy) * kHrSide + x * f + dx)];
        double v = acc / static_cast<double>(f * f);
        v = 0.5 + contrast * (v * cast[static_cast<size_t>(c)] - 0.5) + noise * d.normal();
        lr[static_cast<size_t>((c * n + y) * n + x)] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return lr;
}

}  // namespace

ImageTensor render_synthetic_face(const SyntheticFace& face, int64_t resolution) {
  if (resolution != kHrSide && resolution != kLrSide) {
    throw ValueError("synthetic faces support resolution 16 or 64");
  }
  Draw shape_draw(mix_seed(face.seed, face.index));
  const FaceParams params = draw_face(shape_draw);
  std::vector<double> img = render_hr(params);
  if (resolution == kLrSide) {
    Draw degrade_draw(mix_seed(face.seed ^ 0x4c52'4c52'4c52'4c52ULL, face.index));
    img = degrade_lr(std::move(img), degrade_draw);
  }
  auto t = torch::from_blob(img.data(), {3, resolution, resolution}, torch::kDouble).clone();
  return ImageTensor(t * 2.0 - 1.0);
}

}  // namespace srnam::imagedata
