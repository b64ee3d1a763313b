#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ara/rng.hpp"
#include "ara/synthvid.hpp"

namespace ara::synthvid {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Offset of an object's texture mean from the background mean at contrast 1.
constexpr double kMeanOffset = 0.35;
constexpr double kTintRange = 0.025;

std::uint64_t hash_mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Lattice value in [0,1) for an unbounded grid, keyed by (seed, texture, channel, i, j).
double lattice(std::uint64_t seed, std::uint64_t texture, std::uint64_t channel, long i, long j) {
  std::uint64_t h = hash_mix(seed ^ hash_mix(texture * 0x100000001b3ull + channel));
  h = hash_mix(h ^ static_cast<std::uint64_t>(i) * 0xd6e8feb86659fd93ull);
  h = hash_mix(h ^ static_cast<std::uint64_t>(j) * 0xa0761d6478bd642full);
  return double(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Smoothed uniform noise in [0,1].
double value_noise(std::uint64_t seed, std::uint64_t texture, std::uint64_t channel, double x,
                   double y, double cell) {
  double gx = x / cell, gy = y / cell;
  long ix = static_cast<long>(std::floor(gx)), iy = static_cast<long>(std::floor(gy));
  double fx = smooth(gx - double(ix)), fy = smooth(gy - double(iy));
  double v00 = lattice(seed, texture, channel, ix, iy);
  double v10 = lattice(seed, texture, channel, ix + 1, iy);
  double v01 = lattice(seed, texture, channel, ix, iy + 1);
  double v11 = lattice(seed, texture, channel, ix + 1, iy + 1);
  return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

struct Centre {
  double x, y;
};

Centre centre_at(const ObjectSpec& o, std::size_t t) {
  double tt = double(t);
  double x = o.x0 + o.vx * tt;
  double y = o.y0 + o.vy * tt;
  if (o.trajectory == Trajectory::sinusoidal && o.period > 0.0) {
    y += o.amplitude * std::sin(2.0 * kPi * tt / o.period);
  }
  return {x, y};
}

bool inside_shape(ShapeKind kind, double size, double dx, double dy) {
  switch (kind) {
    case ShapeKind::disc:
      return dx * dx + dy * dy <= size * size;
    case ShapeKind::square:
      return std::fabs(dx) <= size && std::fabs(dy) <= size;
    case ShapeKind::triangle: {
      // Equilateral, apex up (image y grows downward), circumradius `size`.
      const double ax = 0.0, ay = -size;
      const double bx = size * std::sqrt(3.0) / 2.0, by = size / 2.0;
      const double cx = -bx, cy = by;
      auto edge = [&](double x0, double y0, double x1, double y1) {
        return (x1 - x0) * (dy - y0) - (y1 - y0) * (dx - x0);
      };
      double e0 = edge(ax, ay, bx, by), e1 = edge(bx, by, cx, cy), e2 = edge(cx, cy, ax, ay);
      return (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
    }
  }
  return false;
}

}  // namespace

bool covers(const ObjectSpec& obj, double px, double py, std::size_t t) {
  Centre c = centre_at(obj, t);
  return inside_shape(obj.kind, obj.size, px - c.x, py - c.y);
}

Footprint footprint(const ObjectSpec& obj, std::size_t H, std::size_t W, std::size_t t) {
  Centre c = centre_at(obj, t);
  const long reach = static_cast<long>(std::ceil(obj.size)) + 2;
  const long cx = static_cast<long>(std::floor(c.x)), cy = static_cast<long>(std::floor(c.y));
  Footprint fp;
  for (long y = cy - reach; y <= cy + reach; ++y) {
    for (long x = cx - reach; x <= cx + reach; ++x) {
      if (!inside_shape(obj.kind, obj.size, x + 0.5 - c.x, y + 0.5 - c.y)) continue;
      ++fp.total;
      if (x >= 0 && y >= 0 && x < static_cast<long>(W) && y < static_cast<long>(H)) ++fp.inside;
    }
  }
  return fp;
}

Tensor VideoSequence::object_mask(std::size_t t, std::size_t object) const {
  const Tensor& m = masks.at(t);
  if (object >= m.dim(0)) throw std::out_of_range("object_mask: object index out of range");
  const std::size_t plane = m.dim(1) * m.dim(2);
  auto d = m.data();
  return Tensor::from_data({m.dim(1), m.dim(2)},
                           std::vector<float>(d.begin() + object * plane, d.begin() + (object + 1) * plane));
}

Palette palette_for(const SceneSpec& spec, std::uint64_t seed) {
  Rng rng = Rng::substream(seed, "palette");
  Palette p{};
  for (double& b : p.background) b = 0.5 + rng.uniform(-kTintRange, kTintRange);
  auto mean_of = [&](const ObjectSpec& o) {
    std::array<double, 3> m{};
    for (int c = 0; c < 3; ++c) m[c] = p.background[c] + o.polarity * kMeanOffset * spec.contrast;
    return m;
  };
  for (const auto& o : spec.objects) p.objects.push_back(mean_of(o));
  for (const auto& o : spec.distractors) p.distractors.push_back(mean_of(o));
  return p;
}

VideoSequence generate(const SceneSpec& spec, std::size_t H, std::size_t W, std::size_t T,
                       std::uint64_t seed) {
  if (H < 32 || W < 32) throw std::invalid_argument("generate: H and W must be >= 32");
  if (T < 3) throw std::invalid_argument("generate: T must be >= 3");
  if (spec.objects.empty()) throw std::invalid_argument("generate: scene has no objects");
  auto check_visible = [&](const std::vector<ObjectSpec>& list, const char* what) {
    for (std::size_t o = 0; o < list.size(); ++o) {
      for (std::size_t t = 0; t < T; ++t) {
        Footprint fp = footprint(list[o], H, W, t);
        if (fp.total == 0 || 2 * fp.inside < fp.total) {
          throw std::invalid_argument(std::string("generate: ") + what + " " + std::to_string(o) +
                                      " has less than half its area inside the frame at t=" +
                                      std::to_string(t));
        }
      }
    }
  };
  check_visible(spec.objects, "object");
  check_visible(spec.distractors, "distractor");

  const Palette pal = palette_for(spec, seed);
  const std::size_t O = spec.objects.size();
  const std::size_t D = spec.distractors.size();
  const double amp = spec.texture_amplitude;
  Rng noise_rng = Rng::substream(seed, "pixel-noise");

  VideoSequence v;
  v.object_count = O;
  v.seed = seed;
  for (std::size_t t = 0; t < T; ++t) {
    std::vector<float> frame(H * W * 3);
    std::vector<float> masks(O * H * W, 0.0f);
    std::vector<Centre> centres(O), dcentres(D);
    for (std::size_t o = 0; o < O; ++o) centres[o] = centre_at(spec.objects[o], t);
    for (std::size_t d = 0; d < D; ++d) dcentres[d] = centre_at(spec.distractors[d], t);
    for (std::size_t y = 0; y < H; ++y) {
      for (std::size_t x = 0; x < W; ++x) {
        const double px = double(x) + 0.5, py = double(y) + 0.5;
        // Topmost (last-listed) object wins.
        long owner = -1;
        for (std::size_t o = O; o-- > 0;) {
          if (inside_shape(spec.objects[o].kind, spec.objects[o].size, px - centres[o].x,
                           py - centres[o].y)) {
            owner = static_cast<long>(o);
            break;
          }
        }
        long downer = -1;
        if (owner < 0) {
          for (std::size_t d = D; d-- > 0;) {
            if (inside_shape(spec.distractors[d].kind, spec.distractors[d].size, px - dcentres[d].x,
                             py - dcentres[d].y)) {
              downer = static_cast<long>(d);
              break;
            }
          }
        }
        for (std::size_t c = 0; c < 3; ++c) {
          double val;
          if (downer >= 0) {
            const auto d = static_cast<std::size_t>(downer);
            val = pal.distractors[d][c] +
                  amp * (value_noise(seed, 1 + O + d, c, px - dcentres[d].x, py - dcentres[d].y,
                                     spec.texture_cell) -
                         0.5);
          } else if (owner < 0) {
            val = pal.background[c] + amp * (value_noise(seed, 0, c, px, py, spec.texture_cell) - 0.5);
          } else {
            const auto o = static_cast<std::size_t>(owner);
            // Texture is attached to the object and moves with it.
            val = pal.objects[o][c] +
                  amp * (value_noise(seed, 1 + o, c, px - centres[o].x, py - centres[o].y,
                                     spec.texture_cell) -
                         0.5);
          }
          if (spec.noise > 0.0) val += noise_rng.uniform(-spec.noise, spec.noise);
          frame[(y * W + x) * 3 + c] = static_cast<float>(std::clamp(val, 0.0, 1.0));
        }
        if (owner >= 0) masks[(static_cast<std::size_t>(owner) * H + y) * W + x] = 1.0f;
      }
    }
    v.frames.push_back(Tensor::from_data({H, W, 3}, std::move(frame)));
    v.masks.push_back(Tensor::from_data({O, H, W}, std::move(masks)));
  }
  return v;
}

SceneSpec random_scene(const DataConfig& config, std::uint64_t scene_seed) {
  Rng rng = Rng::substream(scene_seed, "scene");
  SceneSpec spec;
  spec.contrast = rng.uniform(config.contrast_min, config.contrast_max);
  spec.noise = config.noise;
  const std::size_t count = rng.uniform() < config.two_object_fraction ? 2 : 1;
  const std::size_t total = count + config.distractors;
  const double H = double(config.height), W = double(config.width);

  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<ObjectSpec> placed;
    bool ok = true;
    for (std::size_t o = 0; o < total && ok; ++o) {
      ObjectSpec obj;
      obj.kind = static_cast<ShapeKind>(rng.below(3));
      obj.size = rng.uniform(config.size_min, config.size_max);
      obj.trajectory = rng.uniform() < 0.5 ? Trajectory::linear : Trajectory::sinusoidal;
      double speed = rng.uniform(0.0, config.speed_max);
      double angle = rng.uniform(0.0, 2.0 * kPi);
      obj.vx = speed * std::cos(angle);
      obj.vy = speed * std::sin(angle);
      if (obj.trajectory == Trajectory::sinusoidal) {
        obj.amplitude = rng.uniform(1.0, 4.0);
        obj.period = rng.uniform(4.0, 12.0);
      }
      obj.polarity = rng.uniform() < 0.5 ? -1 : +1;
      const double margin = obj.size + 1.0;
      obj.x0 = rng.uniform(margin, W - margin);
      obj.y0 = rng.uniform(margin, H - margin);
      // Sampled scenes stay at least 90% visible, stricter than generate()'s 50%.
      for (std::size_t t = 0; t < config.length; ++t) {
        Footprint fp = footprint(obj, config.height, config.width, t);
        if (fp.total == 0 || 10 * fp.inside < 9 * fp.total) ok = false;
      }
      // Keep shapes from overlapping much so none vanishes.
      for (const auto& other : placed) {
        for (std::size_t t = 0; t < config.length && ok; ++t) {
          Centre ca = centre_at(obj, t), cb = centre_at(other, t);
          if (std::hypot(ca.x - cb.x, ca.y - cb.y) < 0.9 * (obj.size + other.size)) ok = false;
        }
      }
      if (ok) placed.push_back(obj);
    }
    if (!ok) continue;
    spec.objects.assign(placed.begin(), placed.begin() + static_cast<long>(count));
    spec.distractors.assign(placed.begin() + static_cast<long>(count), placed.end());
    // Polarity is what identifies each target: a distractor takes the
    // opposite polarity to the single object, and two objects take opposite
    // polarities to each other. Only the first-frame mask says which is which.
    if (count == 2) {
      spec.objects[1].polarity = -spec.objects[0].polarity;
      spec.distractors.clear();
    }
    for (auto& d : spec.distractors) d.polarity = -spec.objects[0].polarity;
    return spec;
  }
  // Fallback: a single static disc at the centre always fits.
  spec.distractors.clear();
  spec.objects = {ObjectSpec{}};
  spec.objects[0].x0 = W / 2.0;
  spec.objects[0].y0 = H / 2.0;
  spec.objects[0].size = config.size_min;
  return spec;
}

std::vector<VideoSequence> generate_dataset(const DataConfig& config, const std::string& stream) {
  std::vector<VideoSequence> videos;
  videos.reserve(config.count);
  for (std::size_t i = 0; i < config.count; ++i) {
    const std::uint64_t seed = Rng::substream(config.seed, stream, i).next_u64();
    SceneSpec spec = random_scene(config, seed);
    VideoSequence v = generate(spec, config.height, config.width, config.length, seed);
    char id[64];
    std::snprintf(id, sizeof id, "%s%04zu", stream.c_str(), i);
    v.id = id;
    videos.push_back(std::move(v));
  }
  return videos;
}

}  // namespace ara::synthvid
