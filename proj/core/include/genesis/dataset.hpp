#pragma once

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "genesis/mask.hpp"
#include "genesis/rng.hpp"

namespace genesis::data {

enum class Shape { square, ellipse, heart };

std::string to_string(Shape shape);
Shape shape_from_string(const std::string& name);

/// Number of equally spaced intensity levels per colour channel.
inline constexpr int kColorLevels = 5;

/// Per-channel index into the intensity grid {0, 0.25, 0.5, 0.75, 1}.
using ColorIndex = std::array<int, 3>;
using Color = std::array<double, 3>;

Color color_from_index(const ColorIndex& index);
ColorIndex sample_color_index(Rng& rng);

struct SpriteSpec {
  Shape shape = Shape::square;
  double scale = 1.0;        // relative to the base size 0.4·min(H, W)
  double orientation = 0.0;  // radians
  double x = 0.5;            // sprite centre, normalized [0,1] image coordinates
  double y = 0.5;
  ColorIndex color_index{0, 0, 0};

  Color color() const { return color_from_index(color_index); }
};

inline constexpr double kMinScale = 0.5;
inline constexpr double kMaxScale = 1.0;
inline constexpr double kBaseSizeFraction = 0.4;
inline constexpr int kMaxSprites = 4;

SpriteSpec sample_sprite(Rng& rng);
/// Same draw sequence as `sample_sprite`, with the colour replaced by `forced`.
SpriteSpec sample_sprite(Rng& rng, const ColorIndex& forced);

/// Pixels covered by a sprite on an H×W canvas, ignoring occlusion.
Mask rasterize(const SpriteSpec& sprite, int height, int width);

struct SceneRecord {
  int height = 0;
  int width = 0;
  std::vector<float> image;  // H×W×3, values in [0,1]
  LabelMap labels;           // 0 = background, k = k-th sprite (back to front)
  ColorIndex background{0, 0, 0};
  std::vector<SpriteSpec> sprites;

  int sprite_count() const { return static_cast<int>(sprites.size()); }
  /// Visible-pixel masks, one per sprite in draw order (possibly empty).
  std::vector<Mask> instance_masks() const;
  Mask background_mask() const { return labels.mask_of(0); }
};

/// Rasterizes sprites back to front over a uniform background.
/// Throws DatasetError for 0 or more than four sprites, or a sprite that covers no pixel.
SceneRecord render_scene(const std::vector<SpriteSpec>& sprites, const ColorIndex& background, int height,
                         int width);

/// The scene for record `index` of a dataset seeded with `seed`.
SceneRecord generate_record(std::uint64_t seed, std::uint64_t index, int height, int width);

enum class Split { train, val, test };

std::string to_string(Split split);
Split split_from_string(const std::string& name);

struct DatasetManifest {
  std::int64_t n_train = 50000;
  std::int64_t n_val = 10000;
  std::int64_t n_test = 10000;
  int height = 64;
  int width = 64;
  std::uint64_t seed = 0;
  int format_version = 1;

  std::int64_t total() const { return n_train + n_val + n_test; }
  std::int64_t count(Split split) const;
  /// Global record index of the first record in `split`.
  std::int64_t offset(Split split) const;
  void validate() const;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
};

inline constexpr int kFormatVersion = 1;

/// Writes manifest.json and one directory per split holding {index:06}.png
/// images, masks/{index:06}.png label maps and annotations.json.
/// Output is a pure function of the manifest; `workers` only affects speed.
void build_dataset(const DatasetManifest& manifest, const std::filesystem::path& out_dir, int workers = 1);

DatasetManifest read_manifest(const std::filesystem::path& dataset_dir);

/// One split held in memory as 8-bit data.
struct SplitData {
  Split split = Split::train;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> images;  // N×H×W×3
  std::vector<std::uint8_t> labels;  // N×H×W
  std::vector<int> sprite_counts;

  std::size_t size() const { return sprite_counts.size(); }
  /// Images `indices` as a float32 [B,3,H,W] tensor scaled to [0,1].
  torch::Tensor image_batch(const std::vector<std::int64_t>& indices) const;
  LabelMap label_map(std::int64_t index) const;
  /// Non-empty foreground instance masks of a record.
  std::vector<Mask> instance_masks(std::int64_t index) const;
};

/// Loads and checks a split; a record that fails to decode or disagrees with
/// the manifest raises DatasetError naming its index.
SplitData load_split(const std::filesystem::path& dataset_dir, Split split, bool with_labels = true);

struct LoaderState {
  std::int64_t epoch = 0;
  std::int64_t cursor = 0;
};

struct Batch {
  torch::Tensor images;  // [B,3,H,W] float32
  std::vector<std::int64_t> indices;
};

/// Shuffled mini-batches without replacement within an epoch. When fewer than
/// batch_size records remain, the epoch ends and a fresh permutation starts.
/// The batch sequence is a pure function of (seed, state).
class BatchLoader {
 public:
  BatchLoader(std::shared_ptr<const SplitData> data, std::int64_t batch_size, std::uint64_t seed);

  Batch next();
  LoaderState state() const { return state_; }
  void restore(const LoaderState& state);
  std::int64_t batch_size() const { return batch_size_; }
  const SplitData& data() const { return *data_; }

 private:
  void build_permutation();

  std::shared_ptr<const SplitData> data_;
  std::int64_t batch_size_;
  std::uint64_t seed_;
  LoaderState state_;
  std::vector<std::int64_t> permutation_;
};

}  // namespace genesis::data
