#include "genesis/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "genesis/errors.hpp"
#include "genesis/png_io.hpp"

namespace genesis::data {
namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Shape shape) {
  switch (shape) {
    case Shape::square:
      return "square";
    case Shape::ellipse:
      return "ellipse";
    case Shape::heart:
      return "heart";
  }
  return "square";
}

Shape shape_from_string(const std::string& name) {
  if (name == "square") return Shape::square;
  if (name == "ellipse") return Shape::ellipse;
  if (name == "heart") return Shape::heart;
  throw DatasetError("unknown sprite shape '" + name + "'");
}

Color color_from_index(const ColorIndex& index) {
  Color c{};
  for (int ch = 0; ch < 3; ++ch) {
    if (index[ch] < 0 || index[ch] >= kColorLevels) throw DatasetError("colour index outside the 5-level grid");
    c[ch] = index[ch] / static_cast<double>(kColorLevels - 1);
  }
  return c;
}

ColorIndex sample_color_index(Rng& rng) {
  ColorIndex idx{};
  for (auto& v : idx) v = static_cast<int>(rng.below(kColorLevels));
  return idx;
}

SpriteSpec sample_sprite(Rng& rng) {
  SpriteSpec s;
  s.shape = static_cast<Shape>(rng.below(3));
  s.scale = rng.uniform(kMinScale, kMaxScale);
  s.orientation = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.x = rng.uniform();
  s.y = rng.uniform();
  s.color_index = sample_color_index(rng);
  return s;
}

SpriteSpec sample_sprite(Rng& rng, const ColorIndex& forced) {
  SpriteSpec s = sample_sprite(rng);
  color_from_index(forced);
  s.color_index = forced;
  return s;
}

namespace {

// Shapes live in a local frame where the sprite spans roughly [-1,1]²
// (v grows downwards, as image rows do).
bool inside(Shape shape, double u, double v) {
  switch (shape) {
    case Shape::square:
      return std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
    case Shape::ellipse:
      return u * u + 4.0 * v * v <= 1.0;
    case Shape::heart: {
      // (X²+Y²−1)³ − X²Y³ ≤ 0 spans X ∈ [−1.14, 1.14], Y ∈ [−1, 1.236].
      const double x = 1.14 * u;
      const double y = 0.118 - 1.118 * v;
      const double r = x * x + y * y - 1.0;
      return r * r * r - x * x * y * y * y <= 0.0;
    }
  }
  return false;
}

}  // namespace

Mask rasterize(const SpriteSpec& sprite, int height, int width) {
  Mask m(height, width);
  const double half = 0.5 * sprite.scale * kBaseSizeFraction * std::min(height, width);
  const double cx = sprite.x * width;
  const double cy = sprite.y * height;
  const double c = std::cos(sprite.orientation);
  const double s = std::sin(sprite.orientation);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double dx = j + 0.5 - cx;
      const double dy = i + 0.5 - cy;
      const double u = (c * dx + s * dy) / half;
      const double v = (-s * dx + c * dy) / half;
      m.at(i, j) = inside(sprite.shape, u, v);
    }
  }
  return m;
}

std::vector<Mask> SceneRecord::instance_masks() const {
  std::vector<Mask> masks;
  masks.reserve(sprites.size());
  for (int k = 1; k <= sprite_count(); ++k) masks.push_back(labels.mask_of(k));
  return masks;
}

SceneRecord render_scene(const std::vector<SpriteSpec>& sprites, const ColorIndex& background, int height,
                         int width) {
  if (sprites.empty() || sprites.size() > static_cast<std::size_t>(kMaxSprites)) {
    throw DatasetError("a scene holds between one and four sprites, got " + std::to_string(sprites.size()));
  }
  if (height <= 0 || width <= 0) throw DatasetError("canvas must be non-empty");
  SceneRecord rec;
  rec.height = height;
  rec.width = width;
  rec.background = background;
  rec.sprites = sprites;
  rec.labels = LabelMap(height, width);
  rec.image.assign(static_cast<std::size_t>(height) * width * 3, 0.0f);
  const Color bg = color_from_index(background);
  for (std::size_t p = 0; p < rec.labels.labels.size(); ++p) {
    for (int ch = 0; ch < 3; ++ch) rec.image[p * 3 + ch] = static_cast<float>(bg[ch]);
  }
  for (std::size_t k = 0; k < sprites.size(); ++k) {
    const Mask raster = rasterize(sprites[k], height, width);
    if (raster.empty()) {
      throw DatasetError("sprite " + std::to_string(k) + " lies fully outside the canvas");
    }
    const Color col = sprites[k].color();
    for (std::size_t p = 0; p < raster.bits.size(); ++p) {
      if (!raster.bits[p]) continue;
      rec.labels.labels[p] = static_cast<int>(k) + 1;
      for (int ch = 0; ch < 3; ++ch) rec.image[p * 3 + ch] = static_cast<float>(col[ch]);
    }
  }
  return rec;
}

SceneRecord generate_record(std::uint64_t seed, std::uint64_t index, int height, int width) {
  Rng rng(derive_seed(seed, index));
  const int count = 1 + static_cast<int>(rng.below(kMaxSprites));
  const ColorIndex background = sample_color_index(rng);
  std::vector<SpriteSpec> sprites;
  sprites.reserve(count);
  while (static_cast<int>(sprites.size()) < count) {
    SpriteSpec s = sample_sprite(rng);
    // Only reachable on canvases a few pixels wide.
    if (rasterize(s, height, width).empty()) continue;
    sprites.push_back(s);
  }
  return render_scene(sprites, background, height, width);
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw DatasetError("unknown split '" + name + "' (expected train, val or test)");
}

std::int64_t DatasetManifest::count(Split split) const {
  switch (split) {
    case Split::train:
      return n_train;
    case Split::val:
      return n_val;
    case Split::test:
      return n_test;
  }
  return 0;
}

std::int64_t DatasetManifest::offset(Split split) const {
  switch (split) {
    case Split::train:
      return 0;
    case Split::val:
      return n_train;
    case Split::test:
      return n_train + n_val;
  }
  return 0;
}

void DatasetManifest::validate() const {
  if (n_train < 0 || n_val < 0 || n_test < 0) throw DatasetError("manifest: split counts must be non-negative");
  if (total() <= 0) throw DatasetError("manifest: dataset must contain at least one record");
  if (height <= 0 || width <= 0) throw DatasetError("manifest: image size must be positive");
  if (format_version != kFormatVersion) {
    throw DatasetError("manifest: unsupported format_version " + std::to_string(format_version));
  }
}

std::string DatasetManifest::to_json() const {
  json j;
  j["n_train"] = n_train;
  j["n_val"] = n_val;
  j["n_test"] = n_test;
  j["image_size"] = {height, width};
  j["seed"] = seed;
  j["format_version"] = format_version;
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.n_train = j.at("n_train").get<std::int64_t>();
    m.n_val = j.at("n_val").get<std::int64_t>();
    m.n_test = j.at("n_test").get<std::int64_t>();
    m.height = j.at("image_size").at(0).get<int>();
    m.width = j.at("image_size").at(1).get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.format_version = j.at("format_version").get<int>();
  } catch (const json::exception& e) {
    throw DatasetError(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

namespace {

std::string record_name(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
  return buf;
}

json annotation_json(std::int64_t index, const SceneRecord& rec) {
  json sprites = json::array();
  for (const auto& s : rec.sprites) {
    sprites.push_back({{"shape", to_string(s.shape)},
                       {"scale", s.scale},
                       {"orientation", s.orientation},
                       {"position", {s.x, s.y}},
                       {"color", {s.color_index[0], s.color_index[1], s.color_index[2]}}});
  }
  return {{"index", index},
          {"sprite_count", rec.sprite_count()},
          {"background", {rec.background[0], rec.background[1], rec.background[2]}},
          {"sprites", sprites}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << text;
  if (!out) throw DatasetError("short write to " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

png::Image8 to_rgb8(const SceneRecord& rec) {
  png::Image8 img{rec.height, rec.width, 3, std::vector<std::uint8_t>(rec.image.size())};
  for (std::size_t i = 0; i < rec.image.size(); ++i) img.data[i] = png::quantize(rec.image[i]);
  return img;
}

png::Image8 to_label8(const SceneRecord& rec) {
  png::Image8 img{rec.height, rec.width, 1, std::vector<std::uint8_t>(rec.labels.labels.size())};
  for (std::size_t i = 0; i < rec.labels.labels.size(); ++i) {
    img.data[i] = static_cast<std::uint8_t>(rec.labels.labels[i]);
  }
  return img;
}

}  // namespace

void build_dataset(const DatasetManifest& manifest, const fs::path& out_dir, int workers) {
  manifest.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw DatasetError("cannot create " + out_dir.string() + ": " + ec.message());

  for (Split split : {Split::train, Split::val, Split::test}) {
    const std::int64_t n = manifest.count(split);
    const fs::path dir = out_dir / to_string(split);
    fs::create_directories(dir / "masks", ec);
    if (ec) throw DatasetError("cannot create " + dir.string() + ": " + ec.message());

    std::vector<json> annotations(static_cast<std::size_t>(n));
    const std::int64_t offset = manifest.offset(split);
    const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::int64_t>(n, 1))));
    std::vector<std::exception_ptr> failures(n_workers);
    auto work = [&](int w) {
      try {
        for (std::int64_t i = w; i < n; i += n_workers) {
          const SceneRecord rec =
              generate_record(manifest.seed, static_cast<std::uint64_t>(offset + i), manifest.height, manifest.width);
          png::write(dir / (record_name(i) + ".png"), to_rgb8(rec));
          png::write(dir / "masks" / (record_name(i) + ".png"), to_label8(rec));
          annotations[static_cast<std::size_t>(i)] = annotation_json(i, rec);
        }
      } catch (...) {
        failures[w] = std::current_exception();
      }
    };
    if (n_workers == 1) {
      work(0);
    } else {
      std::vector<std::jthread> pool;
      for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w);
    }
    for (auto& f : failures) {
      if (f) std::rethrow_exception(f);
    }
    write_text(dir / "annotations.json", json(annotations).dump() + "\n");
  }
  write_text(out_dir / "manifest.json", manifest.to_json());
}

DatasetManifest read_manifest(const fs::path& dataset_dir) {
  const fs::path path = dataset_dir / "manifest.json";
  if (!fs::exists(path)) throw DatasetError("no manifest.json in " + dataset_dir.string());
  return DatasetManifest::from_json(read_text(path));
}

torch::Tensor SplitData::image_batch(const std::vector<std::int64_t>& indices) const {
  const auto b = static_cast<std::int64_t>(indices.size());
  const std::int64_t pixels = static_cast<std::int64_t>(height) * width;
  auto out = torch::empty({b, height, width, 3}, torch::kUInt8);
  auto* dst = out.data_ptr<std::uint8_t>();
  for (std::int64_t i = 0; i < b; ++i) {
    const auto idx = indices[static_cast<std::size_t>(i)];
    if (idx < 0 || idx >= static_cast<std::int64_t>(size())) throw DatasetError("record index out of range");
    std::copy_n(images.data() + idx * pixels * 3, pixels * 3, dst + i * pixels * 3);
  }
  return out.permute({0, 3, 1, 2}).to(torch::kFloat32).div_(255.0f).contiguous();
}

LabelMap SplitData::label_map(std::int64_t index) const {
  if (labels.empty()) throw DatasetError("split was loaded without label maps");
  LabelMap map(height, width);
  const std::size_t pixels = static_cast<std::size_t>(height) * width;
  for (std::size_t p = 0; p < pixels; ++p) map.labels[p] = labels[static_cast<std::size_t>(index) * pixels + p];
  return map;
}

std::vector<Mask> SplitData::instance_masks(std::int64_t index) const {
  const LabelMap map = label_map(index);
  std::vector<Mask> masks;
  for (int k = 1; k <= kMaxSprites; ++k) {
    Mask m = map.mask_of(k);
    if (!m.empty()) masks.push_back(std::move(m));
  }
  return masks;
}

SplitData load_split(const fs::path& dataset_dir, Split split, bool with_labels) {
  const DatasetManifest manifest = read_manifest(dataset_dir);
  const fs::path dir = dataset_dir / to_string(split);
  const std::int64_t n = manifest.count(split);
  SplitData data;
  data.split = split;
  data.height = manifest.height;
  data.width = manifest.width;
  const std::size_t pixels = static_cast<std::size_t>(manifest.height) * manifest.width;

  json annotations;
  try {
    annotations = json::parse(read_text(dir / "annotations.json"));
  } catch (const json::exception& e) {
    throw DatasetError("annotations for split " + to_string(split) + ": " + e.what());
  }
  if (!annotations.is_array() || static_cast<std::int64_t>(annotations.size()) != n) {
    throw DatasetError("annotations for split " + to_string(split) + " do not match the manifest count");
  }

  data.images.resize(static_cast<std::size_t>(n) * pixels * 3);
  if (with_labels) data.labels.resize(static_cast<std::size_t>(n) * pixels);
  data.sprite_counts.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto fail = [&](const std::string& why) -> DatasetError {
      return DatasetError("corrupt record " + std::to_string(i) + " in split " + to_string(split) + ": " + why);
    };
    png::Image8 img;
    try {
      img = png::read(dir / (record_name(i) + ".png"));
    } catch (const Error& e) {
      throw fail(e.what());
    }
    if (img.height != manifest.height || img.width != manifest.width || img.channels != 3) {
      throw fail("image geometry differs from the manifest");
    }
    std::copy(img.data.begin(), img.data.end(), data.images.begin() + static_cast<std::ptrdiff_t>(i * pixels * 3));
    const auto& ann = annotations[static_cast<std::size_t>(i)];
    if (!ann.is_object() || !ann.contains("sprite_count")) throw fail("missing annotation");
    const int count = ann["sprite_count"].get<int>();
    if (count < 1 || count > kMaxSprites) throw fail("sprite_count outside [1,4]");
    data.sprite_counts[static_cast<std::size_t>(i)] = count;
    if (with_labels) {
      png::Image8 lab;
      try {
        lab = png::read(dir / "masks" / (record_name(i) + ".png"));
      } catch (const Error& e) {
        throw fail(e.what());
      }
      if (lab.height != manifest.height || lab.width != manifest.width || lab.channels != 1) {
        throw fail("mask geometry differs from the manifest");
      }
      for (auto v : lab.data) {
        if (v > count) throw fail("mask label exceeds sprite_count");
      }
      std::copy(lab.data.begin(), lab.data.end(), data.labels.begin() + static_cast<std::ptrdiff_t>(i * pixels));
    }
  }
  return data;
}

BatchLoader::BatchLoader(std::shared_ptr<const SplitData> data, std::int64_t batch_size, std::uint64_t seed)
    : data_(std::move(data)), batch_size_(batch_size), seed_(seed) {
  if (!data_ || data_->size() == 0) throw DatasetError("cannot batch an empty split");
  if (batch_size_ < 1 || batch_size_ > static_cast<std::int64_t>(data_->size())) {
    throw DatasetError("batch_size must lie in [1, split size]");
  }
  build_permutation();
}

void BatchLoader::build_permutation() {
  const auto n = static_cast<std::int64_t>(data_->size());
  permutation_.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) permutation_[static_cast<std::size_t>(i)] = i;
  Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(state_.epoch)));
  for (std::int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(i + 1)));
    std::swap(permutation_[static_cast<std::size_t>(i)], permutation_[static_cast<std::size_t>(j)]);
  }
}

void BatchLoader::restore(const LoaderState& state) {
  if (state.epoch < 0 || state.cursor < 0 || state.cursor > static_cast<std::int64_t>(data_->size())) {
    throw DatasetError("invalid loader state");
  }
  state_ = state;
  build_permutation();
}

Batch BatchLoader::next() {
  if (state_.cursor + batch_size_ > static_cast<std::int64_t>(permutation_.size())) {
    ++state_.epoch;
    state_.cursor = 0;
    build_permutation();
  }
  Batch batch;
  batch.indices.assign(permutation_.begin() + state_.cursor, permutation_.begin() + state_.cursor + batch_size_);
  state_.cursor += batch_size_;
  batch.images = data_->image_batch(batch.indices);
  return batch;
}

}  // namespace genesis::data
