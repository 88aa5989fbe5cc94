#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace genesis {

/// Flat key → tensor archive with a UTF-8 metadata blob.
///
/// Layout (little endian):
///   "GNSARCH1" | u32 version | u32 entry count | u64 metadata length | metadata
///   per entry: u32 key length | key | u8 dtype | u32 ndim | i64 dims[ndim] | u64 nbytes | raw data
///   u64 FNV-1a checksum of every preceding byte
/// Entries are written in key order, so equal archives serialize to equal bytes.
struct TensorArchive {
  std::map<std::string, torch::Tensor> tensors;
  std::string metadata;
};

inline constexpr std::uint32_t kArchiveVersion = 1;

std::vector<std::uint8_t> serialize(const TensorArchive& archive);
/// Throws CheckpointError on bad magic, version mismatch, truncation or checksum failure.
TensorArchive deserialize(const std::vector<std::uint8_t>& bytes);

/// Writes via a temporary file and rename.
void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

}  // namespace genesis
