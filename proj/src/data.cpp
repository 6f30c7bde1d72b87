#include "tcdc/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace tcdc {

namespace {

// ------------------------------------------------------------- manifest io

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

DatasetManifest load_manifest(const std::string& csv_path, int num_classes) {
  require(num_classes >= 2, "a dataset needs at least two classes");
  std::ifstream in(csv_path);
  require(in.good(), "cannot open manifest: " + csv_path);

  DatasetManifest m;
  m.root = fs::path(csv_path).parent_path().string();
  if (m.root.empty()) m.root = ".";
  m.num_classes = num_classes;

  std::string line;
  require(static_cast<bool>(std::getline(in, line)),
          "empty manifest: " + csv_path);
  require(trim(line) == "path,label",
          "manifest must start with the header `path,label`");

  std::set<std::string> seen;
  std::string dups;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string row = trim(line);
    if (row.empty()) continue;
    const auto comma = row.find_last_of(',');
    require(comma != std::string::npos && comma > 0,
            "malformed manifest row " + std::to_string(lineno));
    const std::string path = trim(row.substr(0, comma));
    const std::string label_str = trim(row.substr(comma + 1));
    int label = -1;
    try {
      label = std::stoi(label_str);
    } catch (const std::exception&) {
      fail("bad label on manifest row " + std::to_string(lineno));
    }
    require(label >= 0 && label < num_classes,
            "label " + label_str + " outside [0," +
                std::to_string(num_classes) + ") on row " +
                std::to_string(lineno));
    if (!seen.insert(path).second) dups += "\n  " + path;
    require(fs::exists(fs::path(m.root) / path),
            "missing image file: " + path);
    m.paths.push_back(path);
    m.labels.push_back(label);
  }
  require(dups.empty(), "duplicate manifest paths:" + dups);
  require(!m.paths.empty(), "manifest has no data rows");
  return m;
}

void save_manifest(const std::string& csv_path, const DatasetManifest& m) {
  std::ofstream out(csv_path, std::ios::trunc);
  require(out.good(), "cannot write manifest: " + csv_path);
  out << "path,label\n";
  for (std::size_t i = 0; i < m.paths.size(); ++i)
    out << m.paths[i] << "," << m.labels[i] << "\n";
  require(out.good(), "manifest write failed: " + csv_path);
}

SplitIndices split_dataset(int n, real train_frac, real val_frac,
                           std::uint64_t seed) {
  require(n > 0, "cannot split an empty dataset");
  require(train_frac > 0.0 && val_frac >= 0.0 &&
              train_frac + val_frac <= 1.0 + 1e-12,
          "bad split fractions");
  Rng rng(seed);
  const std::vector<int> perm = rng.permutation(n);
  const int n_train = static_cast<int>(std::lround(train_frac * n));
  const int n_val = static_cast<int>(std::lround(val_frac * n));
  require(n_train >= 1, "train split is empty");
  require(val_frac == 0.0 || n_val >= 1, "val split is empty");
  require(n_train + n_val <= n, "split fractions overflow the dataset");

  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + n_train);
  s.val.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  s.test.assign(perm.begin() + n_train + n_val, perm.end());
  return s;
}

Dataset load_dataset(const DatasetManifest& m, int target_size) {
  require(target_size > 0, "target size must be positive");
  Dataset d;
  d.h = d.w = target_size;
  d.num_classes = m.num_classes;
  d.images.reserve(m.paths.size());
  d.labels = m.labels;
  for (const std::string& rel : m.paths) {
    ImageU8 img = load_png((fs::path(m.root) / rel).string());
    d.images.push_back(resize_bilinear(img, target_size, target_size));
  }
  return d;
}

Tensor preprocess(const ImageU8& img, bool train_mode, Rng& rng) {
  Tensor t = to_tensor01(img);
  if (train_mode && rng.bernoulli(0.5)) {
    const int h = t.dim(1), w = t.dim(2);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w / 2; ++x)
          std::swap(t[(static_cast<std::int64_t>(c) * h + y) * w + x],
                    t[(static_cast<std::int64_t>(c) * h + y) * w + (w - 1 - x)]);
  }
  return t;
}

Tensor make_batch(const Dataset& data, const std::vector<int>& indices,
                  bool train_mode, Rng& rng, std::vector<int>* labels_out) {
  require(!indices.empty(), "empty batch");
  const int b = static_cast<int>(indices.size());
  Tensor batch({b, 3, data.h, data.w});
  if (labels_out != nullptr) labels_out->clear();
  const std::int64_t plane = static_cast<std::int64_t>(3) * data.h * data.w;
  for (int i = 0; i < b; ++i) {
    const int idx = indices[static_cast<std::size_t>(i)];
    require(idx >= 0 && idx < data.size(), "batch index out of range");
    Tensor img = preprocess(data.images[static_cast<std::size_t>(idx)],
                            train_mode, rng);
    for (std::int64_t j = 0; j < plane; ++j) batch[i * plane + j] = img[j];
    if (labels_out != nullptr)
      labels_out->push_back(data.labels[static_cast<std::size_t>(idx)]);
  }
  return batch;
}

// ----------------------------------------------------- synthetic generator

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t x = a * 0x9E3779B97F4A7C15ull;
  x ^= b * 0xBF58476D1CE4E5B9ull;
  x ^= c * 0x94D049BB133111EBull;
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

struct Vec2 {
  real x, y;
};

real clamp01d(real v) { return std::min(1.0, std::max(0.0, v)); }

// Anti-aliased coverage of a signed distance (negative = inside).
real coverage(real d, real aa) { return clamp01d(0.5 - d / (2.0 * aa)); }

real sd_ellipse(Vec2 p, Vec2 c, real rx, real ry) {
  const real dx = (p.x - c.x) / rx, dy = (p.y - c.y) / ry;
  return (std::sqrt(dx * dx + dy * dy) - 1.0) * std::min(rx, ry);
}

real sd_segment(Vec2 p, Vec2 a, Vec2 b) {
  const real abx = b.x - a.x, aby = b.y - a.y;
  const real apx = p.x - a.x, apy = p.y - a.y;
  const real t =
      clamp01d((apx * abx + apy * aby) / (abx * abx + aby * aby + 1e-12));
  const real dx = apx - t * abx, dy = apy - t * aby;
  return std::sqrt(dx * dx + dy * dy);
}

// Distance to the mouth arc: a parabola through (-w,0),(0,curve),(w,0) in
// face-local coordinates, sampled as a short polyline.
real sd_mouth_arc(Vec2 p, Vec2 center, real half_w, real curve) {
  real best = 1e9;
  Vec2 prev{center.x - half_w, center.y};
  for (int i = 1; i <= 12; ++i) {
    const real t = -1.0 + 2.0 * i / 12.0;
    Vec2 cur{center.x + t * half_w, center.y - curve * (1.0 - t * t)};
    best = std::min(best, sd_segment(p, prev, cur));
    prev = cur;
  }
  return best;
}

struct FaceSpec {
  real mouth_curve;  // + smiles, - frowns (in face-radius units)
  real mouth_w;      // mouth half-width / face radius
  real mouth_open;   // lip gap height / face radius (0 = closed)
  real eye_open;     // vertical eye radius scale
  real brow_ang;     // + outer ends raised, - knitted inward-down
  real brow_raise;   // brow height above eye center / face radius
};

// Eight distinguishable expressions; a C-class dataset uses the first C.
const FaceSpec kFaces[8] = {
    {+0.42, 0.58, 0.05, 0.55, +0.18, 0.34},  // broad smile
    {-0.38, 0.46, 0.04, 0.45, -0.26, 0.30},  // frown
    {+0.02, 0.26, 0.52, 0.95, +0.06, 0.50},  // round open mouth, wide eyes
    {-0.24, 0.56, 0.10, 0.38, -0.46, 0.20},  // knitted brows
    {+0.00, 0.50, 0.04, 0.55, +0.00, 0.32},  // neutral
    {+0.06, 0.46, 0.05, 0.12, +0.06, 0.28},  // eyes nearly shut
    {+0.52, 0.64, 0.26, 0.60, +0.22, 0.36},  // open grin
    {-0.08, 0.20, 0.12, 0.85, -0.06, 0.52},  // small pout, raised wide eyes
};

ImageU8 render_face(int size, int cls, Rng& rng) {
  const FaceSpec& base = kFaces[cls];
  auto jitter = [&](real v, real rel) {
    return v * (1.0 + rng.normal(0.0, rel));
  };

  FaceSpec f = base;
  f.mouth_curve = base.mouth_curve + rng.normal(0.0, 0.025);
  f.mouth_w = std::max(0.12, jitter(base.mouth_w, 0.08));
  f.mouth_open = std::max(0.0, jitter(base.mouth_open, 0.10));
  f.eye_open = std::min(1.1, std::max(0.06, jitter(base.eye_open, 0.08)));
  f.brow_ang = base.brow_ang + rng.normal(0.0, 0.035);
  f.brow_raise = std::max(0.12, jitter(base.brow_raise, 0.08));

  // Feature sizes are deliberately coarse: the class cues have to survive
  // heavy downsampling, so they live in low spatial frequencies rather than
  // in thin strokes.
  const Vec2 center{0.5 + rng.uniform(-0.03, 0.03),
                    0.50 + rng.uniform(-0.03, 0.03)};
  const real face_r = 0.40 * (1.0 + rng.uniform(-0.07, 0.07));
  const real eye_dx = 0.40 * face_r * (1.0 + rng.uniform(-0.06, 0.06));
  const real eye_y = center.y - 0.22 * face_r;
  const real eye_r = 0.20 * face_r * (1.0 + rng.uniform(-0.08, 0.08));
  const Vec2 mouth_c{center.x, center.y + 0.45 * face_r};

  // Per-image palette.
  const real skin_r = 0.82 + rng.uniform(-0.08, 0.08);
  const real skin_g = 0.68 + rng.uniform(-0.08, 0.08);
  const real skin_b = 0.55 + rng.uniform(-0.08, 0.08);
  const real bg_r = 0.30 + rng.uniform(-0.10, 0.10);
  const real bg_g = 0.36 + rng.uniform(-0.10, 0.10);
  const real bg_b = 0.48 + rng.uniform(-0.10, 0.10);
  const real ink = 0.12 + rng.uniform(0.0, 0.08);

  const real aa = 1.2 / size;
  const real stroke = 0.10 * (1.0 + rng.uniform(-0.1, 0.1));

  ImageU8 img;
  img.h = img.w = size;
  img.data.resize(static_cast<std::size_t>(size) * size * 3);

  // The noise field must not depend on rasterization order tricks, so draw
  // it up front.
  std::vector<real> noise(static_cast<std::size_t>(size) * size);
  for (auto& v : noise) v = rng.uniform(-0.035, 0.035);

  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const Vec2 p{(x + 0.5) / size, (y + 0.5) / size};
      real r = bg_r, g = bg_g, b = bg_b;

      // Face disc with a soft edge shade.
      const real fd = sd_ellipse(p, center, face_r, face_r * 1.06);
      const real fc = coverage(fd, aa);
      if (fc > 0.0) {
        const real shade = 1.0 - 0.25 * clamp01d((fd + 0.12) / 0.12);
        r = r + fc * (skin_r * shade - r);
        g = g + fc * (skin_g * shade - g);
        b = b + fc * (skin_b * shade - b);
      }

      real feat = 0.0;  // coverage of dark features
      for (int side = -1; side <= 1; side += 2) {
        const Vec2 ec{center.x + side * eye_dx, eye_y};
        // Eye: ellipse whose height carries the openness parameter.
        feat = std::max(
            feat, coverage(sd_ellipse(p, ec, eye_r, eye_r * f.eye_open), aa));
        // Brow: angled segment above the eye; the sign convention makes
        // negative angles point the inner ends down ("knitted").
        const real by = ec.y - f.brow_raise * face_r;
        const real blen = eye_r * 1.6;
        const Vec2 a{ec.x - side * blen, by + f.brow_ang * blen};
        const Vec2 bb{ec.x + side * blen, by - f.brow_ang * blen};
        feat = std::max(
            feat, coverage(sd_segment(p, a, bb) - stroke * face_r * 1.1, aa));
      }
      // Mouth: open classes get a filled inner ellipse under the lip arc.
      if (f.mouth_open > 0.08) {
        feat = std::max(
            feat, coverage(sd_ellipse(p, mouth_c, f.mouth_w * face_r * 0.8,
                                      f.mouth_open * face_r),
                           aa));
      }
      feat = std::max(
          feat,
          coverage(sd_mouth_arc(p, mouth_c, f.mouth_w * face_r,
                                f.mouth_curve * face_r) -
                       stroke * face_r,
                   aa));

      r += feat * (ink - r);
      g += feat * (ink * 0.9 - g);
      b += feat * (ink * 0.9 - b);

      const real n = noise[static_cast<std::size_t>(y) * size + x];
      img.at(y, x, 0) =
          static_cast<std::uint8_t>(std::lround(clamp01d(r + n) * 255.0));
      img.at(y, x, 1) =
          static_cast<std::uint8_t>(std::lround(clamp01d(g + n) * 255.0));
      img.at(y, x, 2) =
          static_cast<std::uint8_t>(std::lround(clamp01d(b + n) * 255.0));
    }
  }
  return img;
}

}  // namespace

DatasetManifest generate_synthetic_dataset(int n_per_class, int num_classes,
                                           int size, std::uint64_t seed,
                                           const std::string& out_dir) {
  require(num_classes >= 2 && num_classes <= 8,
          "synthetic generator supports 2..8 classes");
  require(n_per_class >= 1, "need at least one image per class");
  require(size >= 16 && size % 16 == 0, "synthetic size must be a multiple of 16");
  fs::create_directories(out_dir);

  DatasetManifest m;
  m.root = out_dir;
  m.num_classes = num_classes;
  for (int cls = 0; cls < num_classes; ++cls) {
    for (int i = 0; i < n_per_class; ++i) {
      Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cls),
                       static_cast<std::uint64_t>(i)));
      const ImageU8 img = render_face(size, cls, rng);
      std::ostringstream name;
      name << "class" << cls << "_" << i << ".png";
      save_png((fs::path(out_dir) / name.str()).string(), img);
      m.paths.push_back(name.str());
      m.labels.push_back(cls);
    }
  }
  save_manifest((fs::path(out_dir) / "manifest.csv").string(), m);
  return m;
}

}  // namespace tcdc
