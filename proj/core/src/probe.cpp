#include "genesis/probe.hpp"

#include <algorithm>
#include <numeric>

#include "genesis/errors.hpp"

namespace genesis::probe {
namespace F = torch::nn::functional;

std::string to_string(Task task) {
  switch (task) {
    case Task::sprite_count:
      return "sprite_count";
  }
  throw ConfigError("unknown probe task");
}

Task task_from_string(const std::string& name) {
  if (name == "sprite_count") return Task::sprite_count;
  throw ConfigError("unknown probe task '" + name + "' (expected sprite_count)");
}

void ProbeConfig::validate() const {
  if (hidden < 1) throw ConfigError("probe hidden units must be positive");
  if (epochs < 1) throw ConfigError("probe epochs must be positive");
  if (train_size < 1) throw ConfigError("probe train_size must be positive");
  if (batch_size < 1) throw ConfigError("probe batch_size must be positive");
  if (!(lr > 0.0)) throw ConfigError("probe lr must be positive");
}

nlohmann::json ProbeConfig::to_json() const {
  return {{"hidden", hidden},         {"epochs", epochs}, {"train_size", train_size},
          {"batch_size", batch_size}, {"lr", lr},         {"task", to_string(task)},
          {"seed", seed}};
}

ProbeClassifierImpl::ProbeClassifierImpl(std::int64_t in_features, int hidden, int classes) {
  fc_ = register_module("fc", torch::nn::Linear(in_features, hidden));
  out_ = register_module("out", torch::nn::Linear(hidden, classes));
}

torch::Tensor ProbeClassifierImpl::forward(const torch::Tensor& x) { return out_->forward(F::elu(fc_->forward(x))); }

nlohmann::json ProbeResult::to_json() const {
  return {{"train_accuracy", train_accuracy},
          {"test_accuracy", test_accuracy},
          {"chance", chance},
          {"classes", classes},
          {"warnings", warnings}};
}

torch::Tensor extract_representation(model::GenerativeModel& model, const torch::Tensor& x,
                                     std::int64_t batch_size) {
  const bool was_training = model.is_training();
  model.eval();
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> parts;
  for (std::int64_t start = 0; start < x.size(0); start += batch_size) {
    const auto end = std::min(x.size(0), start + batch_size);
    parts.push_back(model.representation(x.slice(0, start, end).to(model.options().dtype())));
  }
  model.train(was_training);
  if (parts.empty()) return torch::zeros({0, model.representation_dim()});
  return torch::cat(parts).detach();
}

namespace {

double accuracy(ProbeClassifier& clf, const torch::Tensor& x, const torch::Tensor& y) {
  if (x.size(0) == 0) return 0.0;
  torch::NoGradGuard no_grad;
  const auto pred = clf->forward(x).argmax(1);
  return pred.eq(y).to(torch::kFloat64).mean().item<double>();
}

std::vector<std::int64_t> class_counts(const torch::Tensor& y, int classes) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(classes), 0);
  const auto labels = y.to(torch::kInt64).contiguous();
  const auto* data = labels.data_ptr<std::int64_t>();
  for (std::int64_t i = 0; i < labels.numel(); ++i) ++counts[static_cast<std::size_t>(data[i])];
  return counts;
}

}  // namespace

ProbeResult train_probe(const torch::Tensor& train_x, const torch::Tensor& train_y, const torch::Tensor& test_x,
                        const torch::Tensor& test_y, const ProbeConfig& config) {
  config.validate();
  if (train_x.dim() != 2 || test_x.dim() != 2 || train_x.size(1) != test_x.size(1)) {
    throw ShapeError("probe inputs must be [N, D] with matching D");
  }
  if (train_x.size(0) != train_y.size(0) || test_x.size(0) != test_y.size(0)) {
    throw ShapeError("probe inputs and labels differ in length");
  }
  if (train_x.size(0) == 0) throw Error("probe needs at least one training example");
  const auto ytr = train_y.to(torch::kInt64);
  const auto yte = test_y.to(torch::kInt64);
  if (ytr.min().item<std::int64_t>() < 0 || (yte.numel() > 0 && yte.min().item<std::int64_t>() < 0)) {
    throw Error("probe labels must be non-negative class indices");
  }
  std::int64_t max_label = ytr.max().item<std::int64_t>();
  if (yte.numel() > 0) max_label = std::max(max_label, yte.max().item<std::int64_t>());

  ProbeResult result;
  result.classes = static_cast<int>(max_label + 1);

  const auto train_counts = class_counts(ytr, result.classes);
  const auto [lo, hi] = std::minmax_element(train_counts.begin(), train_counts.end());
  if (*lo == 0) {
    result.warnings.push_back("some classes are absent from the probe training labels");
  } else if (*hi > 2 * *lo) {
    result.warnings.push_back("probe training labels are imbalanced (largest class " + std::to_string(*hi) +
                              ", smallest " + std::to_string(*lo) + ")");
  }
  if (yte.numel() > 0) {
    const auto test_counts = class_counts(yte, result.classes);
    result.chance = static_cast<double>(*std::max_element(test_counts.begin(), test_counts.end())) /
                    static_cast<double>(yte.numel());
  }

  torch::manual_seed(config.seed);
  const auto xtr = train_x.to(torch::kFloat32).detach();
  const auto xte = test_x.to(torch::kFloat32).detach();
  ProbeClassifier clf(xtr.size(1), config.hidden, result.classes);
  torch::optim::Adam optimizer(clf->parameters(), torch::optim::AdamOptions(config.lr));
  auto gen = at::make_generator<at::CPUGeneratorImpl>(config.seed);
  const auto n = xtr.size(0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto order = torch::randperm(n, gen, torch::kInt64);
    for (std::int64_t start = 0; start < n; start += config.batch_size) {
      const auto idx = order.slice(0, start, std::min(n, start + config.batch_size));
      optimizer.zero_grad();
      const auto loss = F::cross_entropy(clf->forward(xtr.index_select(0, idx)), ytr.index_select(0, idx));
      loss.backward();
      optimizer.step();
    }
  }
  clf->eval();
  result.train_accuracy = accuracy(clf, xtr, ytr);
  result.test_accuracy = accuracy(clf, xte, yte);
  result.classifier = clf;
  return result;
}

torch::Tensor task_labels(const data::SplitData& split, Task task, std::int64_t limit) {
  const auto n = std::min<std::int64_t>(limit, static_cast<std::int64_t>(split.size()));
  std::vector<std::int64_t> labels(static_cast<std::size_t>(n));
  switch (task) {
    case Task::sprite_count:
      for (std::int64_t i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = split.sprite_counts[i] - 1;
      break;
  }
  return torch::tensor(labels, torch::kInt64);
}

namespace {

torch::Tensor split_representation(model::GenerativeModel& model, const data::SplitData& split, std::int64_t n) {
  constexpr std::int64_t kChunk = 256;
  std::vector<torch::Tensor> parts;
  for (std::int64_t start = 0; start < n; start += kChunk) {
    std::vector<std::int64_t> idx(static_cast<std::size_t>(std::min(n, start + kChunk) - start));
    std::iota(idx.begin(), idx.end(), start);
    parts.push_back(extract_representation(model, split.image_batch(idx)));
  }
  return torch::cat(parts);
}

}  // namespace

ProbeResult run_probe(model::GenerativeModel& model, const std::filesystem::path& dataset_dir,
                      const ProbeConfig& config) {
  config.validate();
  const auto train = data::load_split(dataset_dir, data::Split::train, false);
  const auto test = data::load_split(dataset_dir, data::Split::test, false);
  const auto n_train = std::min<std::int64_t>(config.train_size, static_cast<std::int64_t>(train.size()));
  const auto n_test = static_cast<std::int64_t>(test.size());
  if (n_train == 0 || n_test == 0) throw DatasetError("probe needs non-empty train and test splits");
  const auto xtr = split_representation(model, train, n_train);
  const auto xte = split_representation(model, test, n_test);
  return train_probe(xtr, task_labels(train, config.task, n_train), xte, task_labels(test, config.task, n_test),
                     config);
}

}  // namespace genesis::probe
