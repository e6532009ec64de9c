#include "embridge/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "embridge/errors.hpp"
#include "embridge/image_io.hpp"
#include "embridge/rng.hpp"

namespace embridge {

namespace {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
double norm(Vec2 v) { return std::hypot(v.x, v.y); }
Vec2 normalized(Vec2 v) {
  const double n = norm(v);
  return n > 1e-12 ? Vec2{v.x / n, v.y / n} : Vec2{1.0, 0.0};
}

struct GlyphBox {
  int min_x = 1 << 20, min_y = 1 << 20, max_x = -1, max_y = -1;

  void cover(int x, int y) {
    min_x = std::min(min_x, x);
    min_y = std::min(min_y, y);
    max_x = std::max(max_x, x);
    max_y = std::max(max_y, y);
  }
};

void draw_disc(GrayImage& img, Vec2 c, double r, std::uint8_t value, GlyphBox* box) {
  const int x0 = std::max(0, static_cast<int>(std::floor(c.x - r)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(c.x + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(c.y - r)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(c.y + r)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (std::hypot(x - c.x, y - c.y) <= r) {
        img.at(x, y) = value;
        if (box) box->cover(x, y);
      }
    }
  }
}

// Thick segment (capsule footprint) from a to b.
void draw_bar(GrayImage& img, Vec2 a, Vec2 b, double half_width, std::uint8_t value,
              GlyphBox* box) {
  const double pad = half_width + 1.0;
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - pad)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + pad)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - pad)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + pad)));
  const Vec2 ab = b - a;
  const double len_sq = ab.x * ab.x + ab.y * ab.y;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      double t = len_sq > 1e-12 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len_sq : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const Vec2 closest = a + t * ab;
      if (norm(p - closest) <= half_width) {
        img.at(x, y) = value;
        if (box) box->cover(x, y);
      }
    }
  }
}

std::uint8_t offset_value(double bg_level, double delta) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(bg_level + delta), 0l, 255l));
}

// The two effector glyphs share a pinch layout — a base mass plus two digits
// converging on the tip — but sit on opposite sides of the backdrop level:
// the hand renders brighter than the scene, the gripper darker. The shared
// layout keeps the geometric signal (where the effector is, how it is
// oriented) common across embodiments while the appearance flips.
void draw_hand_glyph(GrayImage& img, Vec2 tip, Vec2 dir, double bg_level, GlyphBox* box) {
  const std::uint8_t value = offset_value(bg_level, +60.0);
  const Vec2 palm = tip - 10.0 * dir;
  const Vec2 n{-dir.y, dir.x};
  draw_disc(img, palm, 3.4, value, box);
  // Thumb and index: unequal widths and offsets so the pinch reads as a hand.
  draw_bar(img, palm - 2.3 * n, tip - 2.3 * n, 1.3, value, box);
  draw_bar(img, palm + 2.7 * n, tip + 2.7 * n, 1.1, value, box);
}

void draw_gripper_glyph(GrayImage& img, Vec2 tip, Vec2 dir, double bg_level, GlyphBox* box) {
  const std::uint8_t value = offset_value(bg_level, -60.0);
  const Vec2 base = tip - 10.0 * dir;
  const Vec2 n{-dir.y, dir.x};
  draw_disc(img, base, 3.4, value, box);
  // Symmetric parallel jaws.
  draw_bar(img, base - 2.5 * n, tip - 2.5 * n, 1.2, value, box);
  draw_bar(img, base + 2.5 * n, tip + 2.5 * n, 1.2, value, box);
}

GrayImage render_background(int size, double level) {
  GrayImage img(size, size);
  const auto value = static_cast<std::uint8_t>(std::clamp(std::lround(level), 0l, 255l));
  std::fill(img.pixels.begin(), img.pixels.end(), value);
  return img;
}

void clamp_center(int& cx, int& cy, int size) {
  cx = std::clamp(cx, 0, size - 1);
  cy = std::clamp(cy, 0, size - 1);
}

std::vector<SynthFrame> render_sequence(const SynthConfig& cfg, int sequence_id,
                                        bool free_motion, int frame_count, Rng& rng) {
  const int size = cfg.image_size;
  // Per-sequence backdrop: a flat level plus a handful of texture blobs.
  // The texture is identical across the embodiment variants of a frame but
  // wanders from frame to frame, so world content decorrelates along the
  // sequence while the effector identity stays put.
  const double bg_level = rng.uniform(70.0, 130.0);
  struct TextureBlob {
    Vec2 center;
    double radius;
    std::uint8_t value;
  };
  std::vector<TextureBlob> texture(3);
  for (auto& blob : texture) {
    blob.center = {rng.uniform(0.0, size - 1.0), rng.uniform(0.0, size - 1.0)};
    blob.radius = rng.uniform(1.5, 2.2);
    const double contrast = rng.uniform(12.0, 18.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    blob.value =
        static_cast<std::uint8_t>(std::clamp(std::lround(bg_level + contrast), 0l, 255l));
  }

  const double obj_r = rng.uniform(3.0, 4.5);
  Vec2 obj{rng.uniform(obj_r + 3.0, size - obj_r - 4.0),
           rng.uniform(obj_r + 3.0, size - obj_r - 4.0)};

  // The agent starts a short reach away from the object and closes in over
  // the sequence, so the effector moves slowly relative to the texture
  // wander (or just sweeps a line in the free-motion style).
  const double entry_angle = rng.uniform(0.0, 6.283185307179586);
  const Vec2 entry_dir{std::cos(entry_angle), std::sin(entry_angle)};
  const double approach = rng.uniform(5.0, 8.0);
  Vec2 start = obj + (obj_r + approach) * entry_dir;
  start.x = std::clamp(start.x, 2.0, size - 3.0);
  start.y = std::clamp(start.y, 2.0, size - 3.0);
  const double sweep_angle = rng.uniform(0.0, 6.283185307179586);
  const Vec2 sweep_dir{std::cos(sweep_angle), std::sin(sweep_angle)};

  const int shift_whole = static_cast<int>(std::floor(0.6 * cfg.photometric_shift));
  const int shift_noise = static_cast<int>(std::floor(0.4 * cfg.photometric_shift));

  std::vector<SynthFrame> frames;
  frames.reserve(static_cast<std::size_t>(frame_count));
  for (int f = 0; f < frame_count; ++f) {
    const double u = frame_count > 1 ? static_cast<double>(f) / (frame_count - 1) : 1.0;

    // Object drifts a little each frame; the texture wanders faster.
    if (f > 0 && !free_motion) {
      obj.x = std::clamp(obj.x + rng.uniform(-0.8, 0.8), obj_r + 2.0, size - obj_r - 3.0);
      obj.y = std::clamp(obj.y + rng.uniform(-0.8, 0.8), obj_r + 2.0, size - obj_r - 3.0);
      for (auto& blob : texture) {
        blob.center.x = std::clamp(blob.center.x + rng.uniform(-1.2, 1.2), 1.0, size - 2.0);
        blob.center.y = std::clamp(blob.center.y + rng.uniform(-1.2, 1.2), 1.0, size - 2.0);
      }
    }

    Vec2 tip;
    Vec2 dir;
    if (free_motion) {
      tip = start + (u * 0.7 * size) * sweep_dir;
      tip.x = std::clamp(tip.x, 2.0, size - 3.0);
      tip.y = std::clamp(tip.y, 2.0, size - 3.0);
      dir = sweep_dir;
    } else {
      const Vec2 boundary = obj + obj_r * normalized(start - obj);
      tip = start + u * (boundary - start);
      dir = normalized(obj - tip);
    }

    GrayImage base = render_background(size, bg_level);
    for (const auto& blob : texture) draw_disc(base, blob.center, blob.radius, blob.value, nullptr);
    if (!free_motion) {
      // Object: a bright ring, so its local patches resemble neither the
      // filled glyph masses nor the texture blobs.
      draw_disc(base, obj, obj_r, offset_value(bg_level, +45.0), nullptr);
      draw_disc(base, obj, obj_r - 1.6, offset_value(bg_level, 0.0), nullptr);
    }

    SynthFrame frame;
    frame.sequence_id = sequence_id;
    frame.frame_index = f;
    frame.free_motion = free_motion;

    GlyphBox box;
    frame.hand = base;
    draw_hand_glyph(frame.hand, tip, dir, bg_level, &box);
    frame.pseudo = base;
    draw_gripper_glyph(frame.pseudo, tip, dir, bg_level, &box);
    if (box.max_x >= box.min_x) {
      frame.glyph_min_x = box.min_x;
      frame.glyph_min_y = box.min_y;
      frame.glyph_max_x = box.max_x;
      frame.glyph_max_y = box.max_y;
    }

    // Robot view: same geometry as the pseudo view, shifted photometrically.
    frame.robot = frame.pseudo;
    const auto whole = rng.uniform_int(-shift_whole, shift_whole);
    for (auto& px : frame.robot.pixels) {
      const auto delta = whole + rng.uniform_int(-shift_noise, shift_noise);
      px = static_cast<std::uint8_t>(std::clamp<std::int64_t>(px + delta, 0, 255));
    }

    Vec2 contact = free_motion ? tip : obj + obj_r * normalized(tip - obj);
    frame.center_x = static_cast<int>(std::lround(contact.x));
    frame.center_y = static_cast<int>(std::lround(contact.y));
    clamp_center(frame.center_x, frame.center_y, size);

    frames.push_back(std::move(frame));
  }
  return frames;
}

} // namespace

void SynthConfig::validate() const {
  if (image_size < 16) throw ConfigError("image_size must be at least 16");
  if (n_sequences < 1) throw ConfigError("n_sequences must be at least 1");
  if (frames_per_seq < 1) throw ConfigError("frames_per_seq must be at least 1");
  if (photometric_shift < 0.0) throw ConfigError("photometric_shift must be non-negative");
  if (free_motion_fraction < 0.0 || free_motion_fraction > 0.5) {
    throw ConfigError("free_motion_fraction must lie in [0, 0.5]");
  }
}

void PairedFrameSet::validate() const {
  for (const auto& f : frames) {
    if (f.hand.width != image_size || f.hand.height != image_size ||
        f.pseudo.width != image_size || f.pseudo.height != image_size ||
        f.robot.width != image_size || f.robot.height != image_size) {
      throw ShapeError("frame image dimensions disagree with the set");
    }
    if (f.center_x < 0 || f.center_x >= image_size || f.center_y < 0 ||
        f.center_y >= image_size) {
      throw ValidationError("interaction center outside the image");
    }
  }
}

PairedFrameSet synthesize_pairs(const SynthConfig& cfg) {
  cfg.validate();
  PairedFrameSet set;
  set.image_size = cfg.image_size;

  for (int s = 0; s < cfg.n_sequences; ++s) {
    Rng rng(Rng::derive(cfg.seed, static_cast<std::uint64_t>(s)));
    auto frames = render_sequence(cfg, s, false, cfg.frames_per_seq, rng);
    for (auto& f : frames) set.frames.push_back(std::move(f));
  }

  // Free-motion style as appended frames; "0.4% of the corpus" rounds to
  // zero at toy sizes, so any positive fraction contributes at least one.
  if (cfg.free_motion_fraction > 0.0) {
    const int total = cfg.n_sequences * cfg.frames_per_seq;
    const int n_free =
        std::max(1, static_cast<int>(std::llround(cfg.free_motion_fraction * total)));
    Rng rng(Rng::derive(cfg.seed, 0x66726565ull));
    auto frames = render_sequence(cfg, cfg.n_sequences, true, n_free, rng);
    for (auto& f : frames) set.frames.push_back(std::move(f));
  }

  set.validate();
  return set;
}

PairedFrameSet synthesize_pairs(std::uint64_t world_seed, int n_sequences, int frames_per_seq) {
  SynthConfig cfg;
  cfg.seed = world_seed;
  cfg.n_sequences = n_sequences;
  cfg.frames_per_seq = frames_per_seq;
  return synthesize_pairs(cfg);
}

void write_dataset(const std::filesystem::path& dir, const PairedFrameSet& set) {
  set.validate();
  std::filesystem::create_directories(dir);

  nlohmann::json manifest;
  manifest["image_size"] = set.image_size;
  manifest["frames"] = nlohmann::json::array();
  for (const auto& f : set.frames) {
    char stem[64];
    std::snprintf(stem, sizeof(stem), "seq%03d_frame%03d", f.sequence_id, f.frame_index);
    const std::string h = std::string(stem) + "_h.png";
    const std::string p = std::string(stem) + "_p.png";
    const std::string r = std::string(stem) + "_r.png";
    write_png8(dir / h, f.hand);
    write_png8(dir / p, f.pseudo);
    write_png8(dir / r, f.robot);

    nlohmann::json entry;
    entry["sequence"] = f.sequence_id;
    entry["index"] = f.frame_index;
    entry["center"] = {f.center_x, f.center_y};
    entry["free_motion"] = f.free_motion;
    entry["glyph_box"] = {f.glyph_min_x, f.glyph_min_y, f.glyph_max_x, f.glyph_max_y};
    entry["hand"] = h;
    entry["pseudo"] = p;
    entry["robot"] = r;
    manifest["frames"].push_back(entry);
  }

  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

PairedFrameSet read_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad dataset manifest: ") + e.what());
  }

  PairedFrameSet set;
  set.image_size = manifest.at("image_size").get<int>();
  for (const auto& entry : manifest.at("frames")) {
    SynthFrame f;
    f.sequence_id = entry.at("sequence").get<int>();
    f.frame_index = entry.at("index").get<int>();
    f.center_x = entry.at("center").at(0).get<int>();
    f.center_y = entry.at("center").at(1).get<int>();
    f.free_motion = entry.at("free_motion").get<bool>();
    if (entry.contains("glyph_box")) {
      f.glyph_min_x = entry["glyph_box"].at(0).get<int>();
      f.glyph_min_y = entry["glyph_box"].at(1).get<int>();
      f.glyph_max_x = entry["glyph_box"].at(2).get<int>();
      f.glyph_max_y = entry["glyph_box"].at(3).get<int>();
    }
    f.hand = read_png8(dir / entry.at("hand").get<std::string>());
    f.pseudo = read_png8(dir / entry.at("pseudo").get<std::string>());
    f.robot = read_png8(dir / entry.at("robot").get<std::string>());
    set.frames.push_back(std::move(f));
  }
  set.validate();
  return set;
}

} // namespace embridge
