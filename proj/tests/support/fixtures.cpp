#include "fixtures.hpp"

#include <fstream>
#include <map>
#include <mutex>

#include <unistd.h>

namespace fs = std::filesystem;

namespace genesis::testing {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("genesis_tests_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path small_dataset(int size, std::int64_t n_train, std::int64_t n_eval) {
  static std::mutex mu;
  static std::map<std::string, fs::path> built;
  std::lock_guard lock(mu);
  const std::string key = std::to_string(size) + "_" + std::to_string(n_train) + "_" + std::to_string(n_eval);
  if (auto it = built.find(key); it != built.end()) return it->second;
  data::DatasetManifest m;
  m.n_train = n_train;
  m.n_val = n_eval;
  m.n_test = n_eval;
  m.height = m.width = size;
  m.seed = 21;
  const auto dir = scratch_dir("data_" + key);
  data::build_dataset(m, dir, 2);
  built[key] = dir;
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace genesis::testing
