#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace genesis::png {

/// 8-bit image, row-major, interleaved channels (1 = gray/label map, 3 = RGB).
struct Image8 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<std::uint8_t> data;
};

using TextChunks = std::vector<std::pair<std::string, std::string>>;

/// Encodes deterministically: fixed compression settings, no timestamp chunk.
std::vector<std::uint8_t> encode(const Image8& image, const TextChunks& text = {});
Image8 decode(const std::vector<std::uint8_t>& bytes);

void write(const std::filesystem::path& path, const Image8& image, const TextChunks& text = {});
Image8 read(const std::filesystem::path& path);

/// tEXt chunks of a PNG file, in file order.
TextChunks read_text(const std::filesystem::path& path);

/// Quantizes v ∈ [0,1] to 8 bits (round half up, clamped).
std::uint8_t quantize(double v);

}  // namespace genesis::png
