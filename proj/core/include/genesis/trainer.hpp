#pragma once

#include <torch/torch.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "genesis/archive.hpp"
#include "genesis/config.hpp"
#include "genesis/dataset.hpp"
#include "genesis/model.hpp"
#include "genesis/objective.hpp"

namespace genesis::train {

struct TrainConfig {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir = "run";
  std::int64_t batch_size = 32;
  double lr = 1e-4;
  // Reference training runs 5e5 steps at 64×64; desk-scale default.
  std::int64_t max_steps = 10000;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 1000;
  std::int64_t log_every = 10;
  double grad_clip = 5.0;  // global-norm clip; <= 0 disables
  bool deterministic = false;
  ModelConfig model;
  std::optional<objective::GecoState> geco;  // default: goal from the image size, beta = 1
  nlohmann::json run_config = nlohmann::json::object();

  void validate() const;
  nlohmann::json to_json() const;
};

struct StepMetrics {
  std::int64_t step = 0;  // steps completed, including this one
  double recon_ll = 0.0;  // batch mean, per image
  double kl_m = 0.0;
  double kl_c = 0.0;
  double beta = 0.0;      // multiplier used for this step's loss
  double c_ema = 0.0;     // residual average after this step's update
  double recon_err = 0.0; // mean squared error of the reconstruction per pixel-channel
  double loss = 0.0;
  double wall_ms = 0.0;

  nlohmann::ordered_json to_json() const;
};

/// Restorable training state. `state` holds model parameters ("model/…"),
/// buffers ("buffer/…"), ADAM moments ("adam/…") and the noise generator.
struct Checkpoint {
  std::int64_t step = 0;
  ModelConfig model;
  objective::GecoState geco;
  data::LoaderState loader;
  nlohmann::json train_config = nlohmann::json::object();
  TensorArchive state;

  nlohmann::json metadata() const;
};

inline constexpr int kCheckpointFormat = 1;

/// {out_dir}/ckpt_{step:06}.bin
std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, std::int64_t step);

/// Writes the archive and a ckpt_{step}.json metadata sidecar.
void write_checkpoint(const std::filesystem::path& bin_path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& bin_path);
/// As above; throws ConfigError when the stored model config differs from `expected`.
Checkpoint read_checkpoint(const std::filesystem::path& bin_path, const ModelConfig& expected);

/// Copies parameters and buffers; throws CheckpointError on a missing key or shape mismatch.
void load_model_state(model::GenerativeModel& model, const TensorArchive& state);
/// Builds the stored variant and loads its weights (eval mode).
std::shared_ptr<model::GenerativeModel> model_from_checkpoint(const std::filesystem::path& bin_path);

/// Single-owner training loop: batch → posterior pass → ELBO terms → GECO
/// loss → backprop → clip → ADAM → GECO multiplier update.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);
  /// Continues from a checkpoint; its model config must equal config.model.
  Trainer(TrainConfig config, const std::filesystem::path& resume_from);
  ~Trainer();

  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  StepMetrics step();
  /// Steps until config.max_steps, logging to {out_dir}/metrics.jsonl and
  /// checkpointing every checkpoint_every steps and at the end.
  /// `on_log` sees every logged record.
  std::vector<StepMetrics> run(const std::function<void(const StepMetrics&)>& on_log = {});

  Checkpoint checkpoint() const;
  std::filesystem::path save_checkpoint() const;

  std::int64_t steps_done() const { return step_; }
  model::GenerativeModel& model() { return *model_; }
  const objective::GecoState& geco() const { return geco_; }
  const TrainConfig& config() const { return config_; }

 private:
  void init();
  data::Batch take_batch();
  void restore(const Checkpoint& ckpt);

  TrainConfig config_;
  std::shared_ptr<model::GenerativeModel> model_;
  std::unique_ptr<torch::optim::Adam> optimizer_;
  std::shared_ptr<const data::SplitData> data_;
  std::unique_ptr<data::BatchLoader> loader_;
  std::future<data::Batch> pending_;
  data::LoaderState consumed_;
  at::Generator noise_gen_;
  objective::GecoState geco_;
  std::int64_t step_ = 0;
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::vector<StepMetrics> metrics;
};

TrainResult train(const TrainConfig& config, const std::function<void(const StepMetrics&)>& on_log = {});

/// Applies GENESIS_DETERMINISTIC / --deterministic: one intra-op thread and
/// deterministic kernels.
void set_deterministic(bool enabled);

}  // namespace genesis::train
