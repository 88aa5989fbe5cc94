#include "genesis/archive.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "genesis/errors.hpp"

namespace genesis {
namespace {

constexpr char kMagic[8] = {'G', 'N', 'S', 'A', 'R', 'C', 'H', '1'};

std::uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32:
      return 0;
    case torch::kFloat64:
      return 1;
    case torch::kInt64:
      return 2;
    case torch::kUInt8:
      return 3;
    default:
      throw CheckpointError("archive: unsupported tensor dtype");
  }
}

torch::ScalarType dtype_from(std::uint8_t code) {
  switch (code) {
    case 0:
      return torch::kFloat32;
    case 1:
      return torch::kFloat64;
    case 2:
      return torch::kInt64;
    case 3:
      return torch::kUInt8;
    default:
      throw CheckpointError("archive: unknown dtype code " + std::to_string(code));
  }
}

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  template <typename T>
  T pod() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - offset_) throw CheckpointError("archive: truncated data");
    const auto* p = data_ + offset_;
    offset_ += n;
    return p;
  }
  bool done() const { return offset_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t offset_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const TensorArchive& archive) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kArchiveVersion);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(archive.tensors.size()));
  w.pod<std::uint64_t>(archive.metadata.size());
  w.bytes(archive.metadata.data(), archive.metadata.size());
  for (const auto& [key, tensor] : archive.tensors) {
    const auto t = tensor.detach().cpu().contiguous();
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(key.size()));
    w.bytes(key.data(), key.size());
    w.pod<std::uint8_t>(dtype_code(t.scalar_type()));
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.dim()));
    for (const auto d : t.sizes()) w.pod<std::int64_t>(d);
    const std::uint64_t nbytes = t.numel() * t.element_size();
    w.pod<std::uint64_t>(nbytes);
    w.bytes(t.data_ptr(), nbytes);
  }
  const std::uint64_t checksum = fnv1a(w.out.data(), w.out.size());
  w.pod<std::uint64_t>(checksum);
  return std::move(w.out);
}

TensorArchive deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("archive: bad magic (not a checkpoint archive)");
  }
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  if (fnv1a(bytes.data(), bytes.size() - 8) != stored) throw CheckpointError("archive: checksum mismatch (corrupt file)");

  Reader r(bytes.data(), bytes.size() - 8);
  r.take(sizeof(kMagic));
  const auto version = r.pod<std::uint32_t>();
  if (version != kArchiveVersion) {
    throw CheckpointError("archive: version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(kArchiveVersion) + ")");
  }
  TensorArchive archive;
  const auto count = r.pod<std::uint32_t>();
  const auto meta_len = r.pod<std::uint64_t>();
  const auto* meta = r.take(meta_len);
  archive.metadata.assign(reinterpret_cast<const char*>(meta), meta_len);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto key_len = r.pod<std::uint32_t>();
    const auto* key = r.take(key_len);
    const auto dtype = dtype_from(r.pod<std::uint8_t>());
    const auto ndim = r.pod<std::uint32_t>();
    std::vector<std::int64_t> dims(ndim);
    for (auto& d : dims) d = r.pod<std::int64_t>();
    const auto nbytes = r.pod<std::uint64_t>();
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    if (static_cast<std::uint64_t>(t.numel() * t.element_size()) != nbytes) {
      throw CheckpointError("archive: entry size does not match its shape");
    }
    std::memcpy(t.data_ptr(), r.take(nbytes), nbytes);
    archive.tensors.emplace(std::string(reinterpret_cast<const char*>(key), key_len), std::move(t));
  }
  if (!r.done()) throw CheckpointError("archive: trailing bytes");
  return archive;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  const auto bytes = serialize(archive);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize(bytes);
}

}  // namespace genesis
