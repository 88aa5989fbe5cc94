#include "genesis/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

#include "genesis/errors.hpp"

namespace genesis::png {
namespace {

// libpng reports errors via longjmp. The helpers below touch only plain data
// between setjmp and the point of failure; C++ objects live in the callers.

struct WriteSink {
  std::vector<std::uint8_t>* out;
};

void write_cb(png_structp png, png_bytep data, png_size_t length) {
  auto* sink = static_cast<WriteSink*>(png_get_io_ptr(png));
  sink->out->insert(sink->out->end(), data, data + length);
}

void flush_cb(png_structp) {}

struct ReadSource {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};

void read_cb(png_structp png, png_bytep out, png_size_t length) {
  auto* src = static_cast<ReadSource*>(png_get_io_ptr(png));
  if (src->offset + length > src->size) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, src->data + src->offset, length);
  src->offset += length;
}

bool encode_raw(const Image8& image, png_text* texts, int n_texts, WriteSink* sink) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, sink, write_cb, flush_cb);
  const int color_type = image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  if (n_texts > 0) png_set_text(png, info, texts, n_texts);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  for (int row = 0; row < image.height; ++row) {
    png_write_row(png, const_cast<png_bytep>(image.data.data() + row * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

struct DecodeResult {
  png_uint_32 width;
  png_uint_32 height;
  int channels;
};

// Two-phase decode: header first (so the caller can size the buffer), then rows.
bool decode_header(ReadSource* src, DecodeResult* result) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, src, read_cb);
  png_read_info(png, info);
  result->width = png_get_image_width(png, info);
  result->height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  result->channels = (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) ? 1 : 3;
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

bool decode_rows(ReadSource* src, int channels, std::uint8_t* out, std::size_t stride, png_uint_32 height) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, src, read_cb);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  png_set_palette_to_rgb(png);
  if (channels == 3) {
    png_set_gray_to_rgb(png);
  } else {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != stride) png_error(png, "unexpected row size");
  for (png_uint_32 row = 0; row < height; ++row) png_read_row(png, out + row * stride, nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

struct TextSink {
  TextChunks* chunks;
};

bool read_text_raw(ReadSource* src, void (*emit)(void*, const char*, const char*), void* ctx) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, src, read_cb);
  png_read_info(png, info);
  png_textp text = nullptr;
  int n = 0;
  png_get_text(png, info, &text, &n);
  for (int i = 0; i < n; ++i) emit(ctx, text[i].key, text[i].text);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

void emit_text(void* ctx, const char* key, const char* value) {
  static_cast<TextSink*>(ctx)->chunks->emplace_back(key, value);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::uint8_t quantize(double v) {
  const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(scaled);
}

std::vector<std::uint8_t> encode(const Image8& image, const TextChunks& text) {
  if (image.channels != 1 && image.channels != 3) throw Error("PNG encode: channels must be 1 or 3");
  if (image.height <= 0 || image.width <= 0 ||
      image.data.size() != static_cast<std::size_t>(image.height) * image.width * image.channels) {
    throw Error("PNG encode: buffer does not match image geometry");
  }
  std::vector<png_text> texts(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    texts[i] = png_text{};
    texts[i].compression = PNG_TEXT_COMPRESSION_NONE;
    texts[i].key = const_cast<char*>(text[i].first.c_str());
    texts[i].text = const_cast<char*>(text[i].second.c_str());
    texts[i].text_length = text[i].second.size();
  }
  std::vector<std::uint8_t> out;
  WriteSink sink{&out};
  if (!encode_raw(image, texts.data(), static_cast<int>(texts.size()), &sink)) throw Error("PNG encode failed");
  return out;
}

Image8 decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error("not a PNG stream");
  ReadSource header_src{bytes.data(), bytes.size(), 0};
  DecodeResult header{};
  if (!decode_header(&header_src, &header)) throw Error("corrupt PNG header");
  Image8 image;
  image.height = static_cast<int>(header.height);
  image.width = static_cast<int>(header.width);
  image.channels = header.channels;
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  image.data.resize(stride * image.height);
  ReadSource src{bytes.data(), bytes.size(), 0};
  if (!decode_rows(&src, image.channels, image.data.data(), stride, header.height)) throw Error("corrupt PNG data");
  return image;
}

void write(const std::filesystem::path& path, const Image8& image, const TextChunks& text) {
  const auto bytes = encode(image, text);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("short write to " + path.string());
}

Image8 read(const std::filesystem::path& path) { return decode(read_file(path)); }

TextChunks read_text(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error("not a PNG file: " + path.string());
  TextChunks chunks;
  TextSink sink{&chunks};
  ReadSource src{bytes.data(), bytes.size(), 0};
  if (!read_text_raw(&src, emit_text, &sink)) throw Error("corrupt PNG: " + path.string());
  return chunks;
}

}  // namespace genesis::png
