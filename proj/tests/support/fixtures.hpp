#pragma once

#include <filesystem>
#include <string>

#include "genesis/dataset.hpp"

namespace genesis::testing {

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Builds (once per process) a small dataset at `size`×`size`.
std::filesystem::path small_dataset(int size = 8, std::int64_t n_train = 64, std::int64_t n_eval = 16);

std::string read_file(const std::filesystem::path& p);

}  // namespace genesis::testing
