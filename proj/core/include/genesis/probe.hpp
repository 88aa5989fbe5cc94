#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genesis/dataset.hpp"
#include "genesis/model.hpp"

namespace genesis::probe {

enum class Task { sprite_count };

std::string to_string(Task task);
Task task_from_string(const std::string& name);

struct ProbeConfig {
  int hidden = 512;
  int epochs = 100;
  std::int64_t train_size = 50000;
  std::int64_t batch_size = 128;
  double lr = 1e-4;
  Task task = Task::sprite_count;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

/// One hidden ELU layer over a frozen representation.
class ProbeClassifierImpl : public torch::nn::Module {
 public:
  ProbeClassifierImpl(std::int64_t in_features, int hidden, int classes);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Linear fc_{nullptr};
  torch::nn::Linear out_{nullptr};
};
TORCH_MODULE(ProbeClassifier);

struct ProbeResult {
  ProbeClassifier classifier{nullptr};
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double chance = 0.0;  // frequency of the majority test label
  int classes = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Posterior means of `x` with no gradient into the model: [N, representation_dim].
torch::Tensor extract_representation(model::GenerativeModel& model, const torch::Tensor& x,
                                     std::int64_t batch_size = 64);

/// Cross-entropy training on (train_x, train_y), scored on (test_x, test_y).
/// Labels are class indices 0..C−1; C is inferred from both label sets.
ProbeResult train_probe(const torch::Tensor& train_x, const torch::Tensor& train_y, const torch::Tensor& test_x,
                        const torch::Tensor& test_y, const ProbeConfig& config);

/// Class index per record for the task (sprite count − 1).
torch::Tensor task_labels(const data::SplitData& split, Task task, std::int64_t limit);

/// Extracts representations of the train and test splits under `dataset_dir`
/// and trains the probe.
ProbeResult run_probe(model::GenerativeModel& model, const std::filesystem::path& dataset_dir,
                      const ProbeConfig& config);

}  // namespace genesis::probe
