#include "iprrn/data.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "iprrn/errors.hpp"
#include "iprrn/resample.hpp"

namespace iprrn {

torch::Tensor degrade(const torch::Tensor& hr, const DegradationSpec& spec) {
  spec.validate();
  if (hr.dim() < 3) throw InputError("degrade expects (.., C, H, W)");
  const int64_t h = hr.size(-2), w = hr.size(-1), s = spec.scale;
  if (h % s != 0 || w % s != 0) {
    throw InputError("frame size " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by scale " +
                     std::to_string(s));
  }
  torch::Tensor lr;
  if (spec.mode == DegradationMode::kGaussian) {
    auto blurred = gaussian_blur(hr, spec.blur_sigma, spec.kernel_size);
    using torch::indexing::Slice;
    lr = blurred.index({"...", Slice(0, h, s), Slice(0, w, s)});
  } else {
    lr = bicubic_resize_to(hr, h / s, w / s);
  }
  return lr.clamp(0.0, 1.0).contiguous();
}

ClipRecord make_clip(std::string id, torch::Tensor hr, const DegradationSpec& spec, std::string source) {
  auto lr = degrade(hr, spec);
  return {std::move(id), std::move(hr), std::move(lr), ClipMeta{std::move(source), 0, 0}};
}

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::kTranslatingTexture: return "translating_texture";
    case SynthKind::kRotatingPattern: return "rotating_pattern";
    case SynthKind::kRandomSmooth: return "random_smooth";
  }
  return "?";
}

SynthKind synth_kind_from(const std::string& name) {
  for (auto k : {SynthKind::kTranslatingTexture, SynthKind::kRotatingPattern, SynthKind::kRandomSmooth}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown synthetic sequence kind '" + name + "'");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Wave {
  double fy, fx;       // cycles per frame extent
  double phase;
  double drift;        // phase change per frame (random_smooth)
  double amplitude;
  std::vector<double> gain;  // per channel
};

std::vector<Wave> draw_waves(const SynthOptions& o, int64_t max_freq, std::mt19937_64& rng) {
  std::uniform_int_distribution<int64_t> freq(-max_freq, max_freq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Wave> waves;
  while (static_cast<int64_t>(waves.size()) < o.components) {
    Wave w;
    w.fy = static_cast<double>(freq(rng));
    w.fx = static_cast<double>(freq(rng));
    if (w.fy == 0.0 && w.fx == 0.0) continue;
    w.phase = kTwoPi * unit(rng);
    w.drift = 0.3 * (unit(rng) - 0.5);
    w.amplitude = 1.0 / (1.0 + 0.25 * std::hypot(w.fy, w.fx));
    for (int64_t c = 0; c < o.channels; ++c) w.gain.push_back(0.4 + 0.6 * unit(rng));
    waves.push_back(std::move(w));
  }
  return waves;
}

// Maps p into [0, period).
double wrap(double p, double period) {
  double r = std::fmod(p, period);
  return r < 0.0 ? r + period : r;
}

}  // namespace

torch::Tensor synth_sequence(const SynthOptions& o) {
  if (o.frames < 1 || o.height < 1 || o.width < 1 || o.channels < 1) {
    throw ConfigError("synthetic sequences need positive frames and dimensions");
  }
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int64_t max_freq =
      o.max_frequency > 0 ? o.max_frequency : std::max<int64_t>(2, std::min(o.height, o.width) / 6);

  const double hh = static_cast<double>(o.height), ww = static_cast<double>(o.width);
  auto out = torch::empty({o.frames, o.channels, o.height, o.width}, torch::kFloat64);
  auto acc = out.accessor<double, 4>();

  if (o.kind == SynthKind::kRotatingPattern) {
    const double spokes = 3.0 + std::floor(6.0 * unit(rng));
    const double omega = 0.05 + 0.15 * unit(rng);
    const double ring = 4.0 + 8.0 * unit(rng);
    std::vector<double> offsets;
    for (int64_t c = 0; c < o.channels; ++c) offsets.push_back(kTwoPi * unit(rng));
    const double cy = (hh - 1.0) / 2.0, cx = (ww - 1.0) / 2.0;
    const double rmax = std::hypot(cy, cx) + 1.0;
    for (int64_t t = 0; t < o.frames; ++t) {
      const double angle = omega * static_cast<double>(t);
      for (int64_t c = 0; c < o.channels; ++c) {
        for (int64_t y = 0; y < o.height; ++y) {
          for (int64_t x = 0; x < o.width; ++x) {
            const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
            const double r = std::hypot(dy, dx), theta = std::atan2(dy, dx) - angle;
            const double radial = std::cos(kTwoPi * r / ring + offsets[static_cast<size_t>(c)]);
            const double angular = std::cos(spokes * theta + offsets[static_cast<size_t>(c)]) * (r / rmax);
            acc[t][c][y][x] = 0.5 + 0.35 * (0.6 * angular + 0.4 * radial);
          }
        }
      }
    }
    return out.to(torch::kFloat32);
  }

  auto waves = draw_waves(o, o.kind == SynthKind::kRandomSmooth ? std::min<int64_t>(max_freq, 3) : max_freq, rng);
  double vy = 0.0, vx = 0.0;
  if (o.kind == SynthKind::kTranslatingTexture) {
    if (o.velocity) {
      vy = (*o.velocity)[0];
      vx = (*o.velocity)[1];
    } else {
      vy = 3.0 * (unit(rng) - 0.5);
      vx = 3.0 * (unit(rng) - 0.5);
    }
  }
  double norm = 0.0;
  for (const auto& w : waves) norm += w.amplitude;

  for (int64_t t = 0; t < o.frames; ++t) {
    const double td = static_cast<double>(t);
    for (int64_t y = 0; y < o.height; ++y) {
      const double py = wrap(static_cast<double>(y) - vy * td, hh);
      for (int64_t x = 0; x < o.width; ++x) {
        const double px = wrap(static_cast<double>(x) - vx * td, ww);
        for (int64_t c = 0; c < o.channels; ++c) acc[t][c][y][x] = 0.0;
        for (const auto& w : waves) {
          const double drift = o.kind == SynthKind::kRandomSmooth ? w.drift * td : 0.0;
          const double v = w.amplitude * std::cos(kTwoPi * (w.fy * py / hh + w.fx * px / ww) + w.phase + drift);
          for (int64_t c = 0; c < o.channels; ++c) acc[t][c][y][x] += w.gain[static_cast<size_t>(c)] * v;
        }
        for (int64_t c = 0; c < o.channels; ++c) acc[t][c][y][x] = 0.5 + 0.4 * acc[t][c][y][x] / norm;
      }
    }
  }
  return out.to(torch::kFloat32);
}

int64_t clip_scale(const ClipRecord& clip) {
  if (!clip.hr.defined() || !clip.lr.defined()) throw InputError("clip " + clip.id + " has no frames");
  const int64_t s = clip.hr.size(-1) / clip.lr.size(-1);
  if (s < 1 || clip.lr.size(-1) * s != clip.hr.size(-1) || clip.lr.size(-2) * s != clip.hr.size(-2)) {
    throw InputError("clip " + clip.id + ": LR dims are not HR dims / scale");
  }
  return s;
}

ClipRecord crop_patch(const ClipRecord& clip, int64_t hr_patch, int64_t y, int64_t x) {
  const int64_t s = clip_scale(clip);
  const int64_t h = clip.hr.size(-2), w = clip.hr.size(-1);
  if (hr_patch < s || hr_patch % s != 0) {
    throw ConfigError("patch size " + std::to_string(hr_patch) + " must be a multiple of scale " + std::to_string(s));
  }
  if (h < hr_patch || w < hr_patch) {
    throw InputError("clip " + clip.id + " (" + std::to_string(h) + "x" + std::to_string(w) +
                     ") is smaller than the " + std::to_string(hr_patch) + " patch");
  }
  if (y % s != 0 || x % s != 0 || y < 0 || x < 0 || y + hr_patch > h || x + hr_patch > w) {
    throw InputError("patch offset (" + std::to_string(y) + ", " + std::to_string(x) + ") is misaligned or outside");
  }
  const int64_t lp = hr_patch / s;
  ClipRecord out;
  out.id = clip.id;
  out.hr = clip.hr.narrow(-2, y, hr_patch).narrow(-1, x, hr_patch);
  out.lr = clip.lr.narrow(-2, y / s, lp).narrow(-1, x / s, lp);
  out.meta = clip.meta;
  out.meta.crop_y = clip.meta.crop_y + y;
  out.meta.crop_x = clip.meta.crop_x + x;
  return out;
}

ClipRecord sample_patch(const ClipRecord& clip, int64_t hr_patch, std::mt19937_64& rng) {
  const int64_t s = clip_scale(clip);
  const int64_t h = clip.hr.size(-2), w = clip.hr.size(-1);
  if (h < hr_patch || w < hr_patch) {
    throw InputError("clip " + clip.id + " is smaller than the " + std::to_string(hr_patch) + " patch");
  }
  std::uniform_int_distribution<int64_t> dy(0, (h - hr_patch) / s), dx(0, (w - hr_patch) / s);
  const int64_t y = dy(rng) * s;
  const int64_t x = dx(rng) * s;
  return crop_patch(clip, hr_patch, y, x);
}

}  // namespace iprrn
