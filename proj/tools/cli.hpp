#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genesis/png_io.hpp"

namespace genesis::cli {

/// Runs one command line. Returns 0 on success, 2 on a usage error and 1 when
/// the command itself fails.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads a JSON config file into flat dotted keys; nested objects are
/// flattened ({"model": {"k": 5}} is "model.k").
nlohmann::json read_config_file(const std::filesystem::path& path);
nlohmann::json flatten_config(const nlohmann::json& j);

/// Tiles panes [rows, cols, 3, H, W] with values in [0,1] into one RGB image.
/// Throws Error on a non-finite value or a value outside [0,1].
png::Image8 compose_grid(const torch::Tensor& panes);

/// Highest-step ckpt_*.bin in a run directory.
std::filesystem::path latest_checkpoint(const std::filesystem::path& run_dir);

/// GENESIS_DETERMINISTIC=1 in the environment.
bool deterministic_from_env();

}  // namespace genesis::cli
