#include "genesis/trainer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "genesis/errors.hpp"

namespace genesis::train {
namespace fs = std::filesystem;
using nlohmann::json;

void set_deterministic(bool enabled) {
  if (!enabled) return;
  at::set_num_threads(1);
  at::globalContext().setDeterministicAlgorithms(true, false);
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (max_steps < 0) throw ConfigError("train.steps must be non-negative");
  if (checkpoint_every < 1 || log_every < 1) throw ConfigError("checkpoint and log intervals must be positive");
  model.validate();
}

json TrainConfig::to_json() const {
  json j{{"data_dir", data_dir.string()},
         {"out_dir", out_dir.string()},
         {"batch_size", batch_size},
         {"lr", lr},
         {"max_steps", max_steps},
         {"seed", seed},
         {"checkpoint_every", checkpoint_every},
         {"log_every", log_every},
         {"grad_clip", grad_clip},
         {"deterministic", deterministic},
         {"model", model.to_json()}};
  if (geco) j["geco"] = geco->to_json();
  return j;
}

nlohmann::ordered_json StepMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["step"] = step;
  j["recon_ll"] = recon_ll;
  j["kl_m"] = kl_m;
  j["kl_c"] = kl_c;
  j["beta"] = beta;
  j["c_ema"] = c_ema;
  j["recon_err"] = recon_err;
  j["loss"] = loss;
  j["wall_ms"] = wall_ms;
  return j;
}

json Checkpoint::metadata() const {
  return {{"format_version", kCheckpointFormat},
          {"step", step},
          {"model", model.to_json()},
          {"geco", geco.to_json()},
          {"loader", {{"epoch", loader.epoch}, {"cursor", loader.cursor}}},
          {"train", train_config}};
}

fs::path checkpoint_path(const fs::path& out_dir, std::int64_t step) {
  char name[48];
  std::snprintf(name, sizeof(name), "ckpt_%06lld.bin", static_cast<long long>(step));
  return out_dir / name;
}

void write_checkpoint(const fs::path& bin_path, const Checkpoint& ckpt) {
  TensorArchive archive = ckpt.state;
  archive.metadata = ckpt.metadata().dump();
  write_archive(bin_path, archive);
  auto sidecar = bin_path;
  sidecar.replace_extension(".json");
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + sidecar.string());
  json side = ckpt.metadata();
  side["archive"] = bin_path.filename().string();
  out << side.dump(2) << "\n";
}

Checkpoint read_checkpoint(const fs::path& bin_path) {
  TensorArchive archive = read_archive(bin_path);
  Checkpoint ckpt;
  try {
    const json meta = json::parse(archive.metadata);
    const int format = meta.at("format_version").get<int>();
    if (format != kCheckpointFormat) {
      throw CheckpointError("checkpoint format " + std::to_string(format) + " is not supported");
    }
    ckpt.step = meta.at("step").get<std::int64_t>();
    ckpt.model = ModelConfig::from_json(meta.at("model"));
    ckpt.geco = objective::GecoState::from_json(meta.at("geco"));
    ckpt.loader.epoch = meta.at("loader").at("epoch").get<std::int64_t>();
    ckpt.loader.cursor = meta.at("loader").at("cursor").get<std::int64_t>();
    ckpt.train_config = meta.at("train");
  } catch (const json::exception& e) {
    throw CheckpointError("corrupt checkpoint metadata in " + bin_path.string() + ": " + e.what());
  }
  archive.metadata.clear();
  ckpt.state = std::move(archive);
  return ckpt;
}

Checkpoint read_checkpoint(const fs::path& bin_path, const ModelConfig& expected) {
  Checkpoint ckpt = read_checkpoint(bin_path);
  if (!(ckpt.model == expected)) {
    throw ConfigError("checkpoint " + bin_path.string() + " was written for model config " +
                      ckpt.model.to_json().dump() + ", expected " + expected.to_json().dump());
  }
  return ckpt;
}

void load_model_state(model::GenerativeModel& model, const TensorArchive& state) {
  torch::NoGradGuard no_grad;
  auto copy = [&](const std::string& key, torch::Tensor& target) {
    const auto it = state.tensors.find(key);
    if (it == state.tensors.end()) throw CheckpointError("checkpoint lacks " + key);
    if (it->second.sizes() != target.sizes()) throw CheckpointError("shape mismatch for " + key);
    target.copy_(it->second);
  };
  for (auto& item : model.named_parameters()) copy("model/" + item.key(), item.value());
  for (auto& item : model.named_buffers()) copy("buffer/" + item.key(), item.value());
}

std::shared_ptr<model::GenerativeModel> model_from_checkpoint(const fs::path& bin_path) {
  const Checkpoint ckpt = read_checkpoint(bin_path);
  auto m = model::make_model(ckpt.model);
  load_model_state(*m, ckpt.state);
  m->eval();
  return m;
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  init();
}

Trainer::Trainer(TrainConfig config, const fs::path& resume_from) : config_(std::move(config)) {
  init();
  restore(read_checkpoint(resume_from, config_.model));
}

Trainer::~Trainer() {
  if (pending_.valid()) pending_.wait();
}

void Trainer::init() {
  config_.validate();
  set_deterministic(config_.deterministic);
  fs::create_directories(config_.out_dir);

  data_ = std::make_shared<const data::SplitData>(data::load_split(config_.data_dir, data::Split::train, false));
  if (data_->height != config_.model.height || data_->width != config_.model.width) {
    throw ConfigError("dataset images are " + std::to_string(data_->height) + "x" + std::to_string(data_->width) +
                      " but the model expects " + std::to_string(config_.model.height) + "x" +
                      std::to_string(config_.model.width));
  }
  loader_ = std::make_unique<data::BatchLoader>(data_, config_.batch_size, derive_seed(config_.seed, 2));
  consumed_ = loader_->state();

  torch::manual_seed(derive_seed(config_.seed, 0));
  model_ = model::make_model(config_.model);
  model_->train();
  optimizer_ = std::make_unique<torch::optim::Adam>(
      model_->parameters(), torch::optim::AdamOptions(config_.lr).betas({0.9, 0.999}).eps(1e-8));
  noise_gen_ = at::make_generator<at::CPUGeneratorImpl>(derive_seed(config_.seed, 1));
  geco_ = config_.geco ? *config_.geco : objective::GecoState::for_image(config_.model.height, config_.model.width, 3);
}

data::Batch Trainer::take_batch() {
  if (config_.deterministic) {
    auto batch = loader_->next();
    consumed_ = loader_->state();
    return batch;
  }
  if (!pending_.valid()) pending_ = std::async(std::launch::async, [this] { return loader_->next(); });
  auto batch = pending_.get();
  consumed_ = loader_->state();
  pending_ = std::async(std::launch::async, [this] { return loader_->next(); });
  return batch;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.step = step_;
  ckpt.model = config_.model;
  ckpt.geco = geco_;
  ckpt.loader = consumed_;
  ckpt.train_config = config_.to_json();
  ckpt.train_config["run_config"] = config_.run_config;
  for (const auto& item : model_->named_parameters()) {
    ckpt.state.tensors["model/" + item.key()] = item.value().detach().clone();
    const auto& states = optimizer_->state();
    const auto it = states.find(item.value().unsafeGetTensorImpl());
    if (it == states.end()) continue;
    const auto& adam = static_cast<const torch::optim::AdamParamState&>(*it->second);
    ckpt.state.tensors["adam/" + item.key() + "/exp_avg"] = adam.exp_avg().detach().clone();
    ckpt.state.tensors["adam/" + item.key() + "/exp_avg_sq"] = adam.exp_avg_sq().detach().clone();
    ckpt.state.tensors["adam/" + item.key() + "/step"] = torch::tensor({adam.step()}, torch::kInt64);
  }
  for (const auto& item : model_->named_buffers()) {
    ckpt.state.tensors["buffer/" + item.key()] = item.value().detach().clone();
  }
  ckpt.state.tensors["rng/noise"] = noise_gen_.get_state();
  return ckpt;
}

void Trainer::restore(const Checkpoint& ckpt) {
  if (pending_.valid()) pending_.wait();
  pending_ = {};
  load_model_state(*model_, ckpt.state);
  auto& states = optimizer_->state();
  states.clear();
  for (const auto& item : model_->named_parameters()) {
    const auto prefix = "adam/" + item.key();
    const auto avg = ckpt.state.tensors.find(prefix + "/exp_avg");
    if (avg == ckpt.state.tensors.end()) continue;
    auto adam = std::make_unique<torch::optim::AdamParamState>();
    adam->exp_avg(avg->second.clone());
    adam->exp_avg_sq(ckpt.state.tensors.at(prefix + "/exp_avg_sq").clone());
    adam->step(ckpt.state.tensors.at(prefix + "/step").item<std::int64_t>());
    states[item.value().unsafeGetTensorImpl()] = std::move(adam);
  }
  const auto rng = ckpt.state.tensors.find("rng/noise");
  if (rng == ckpt.state.tensors.end()) throw CheckpointError("checkpoint lacks the noise generator state");
  noise_gen_.set_state(rng->second);
  geco_ = ckpt.geco;
  loader_->restore(ckpt.loader);
  consumed_ = ckpt.loader;
  step_ = ckpt.step;
}

fs::path Trainer::save_checkpoint() const {
  const auto path = checkpoint_path(config_.out_dir, step_);
  write_checkpoint(path, checkpoint());
  return path;
}

StepMetrics Trainer::step() {
  const auto start = std::chrono::steady_clock::now();
  const auto batch = take_batch();
  const auto x = batch.images.to(model_->options().dtype());

  StepMetrics m;
  torch::Tensor loss;
  objective::ElboTerms terms;
  model::ForwardPass pass;
  try {
    pass = model_->forward_pass(x, model_->draw_noise(x.size(0), noise_gen_));
    terms = objective::elbo_terms(pass);
    loss = objective::geco_loss(terms, geco_);
    if (!std::isfinite(loss.item<double>())) throw NumericalError("loss is not finite");
    optimizer_->zero_grad();
    loss.backward();
    const double max_norm = config_.grad_clip > 0.0 ? config_.grad_clip : std::numeric_limits<double>::infinity();
    const double norm = torch::nn::utils::clip_grad_norm_(model_->parameters(), max_norm);
    if (!std::isfinite(norm)) throw NumericalError("gradient is not finite");
  } catch (const NumericalError& e) {
    // Parameters are still those of the last completed step.
    optimizer_->zero_grad();
    const auto last_good = save_checkpoint();
    throw NumericalError(std::string(e.what()) + " at step " + std::to_string(step_ + 1) +
                         "; last good state saved to " + last_good.string());
  }
  optimizer_->step();

  m.beta = geco_.beta;
  m.recon_ll = terms.recon_ll.mean().item<double>();
  m.kl_m = terms.kl_mask.mean().item<double>();
  m.kl_c = terms.kl_component.mean().item<double>();
  m.loss = loss.item<double>();
  m.recon_err = (pass.reconstruction.detach() - x).square().mean().item<double>();
  geco_ = objective::geco_update(geco_, m.recon_ll);
  m.c_ema = geco_.c_ema;
  m.step = ++step_;
  if (!config_.deterministic) {
    m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  return m;
}

std::vector<StepMetrics> Trainer::run(const std::function<void(const StepMetrics&)>& on_log) {
  const fs::path log_path = config_.out_dir / "metrics.jsonl";
  // Keep records up to the current step so a resumed run continues one log.
  std::vector<std::string> kept;
  if (step_ > 0 && fs::exists(log_path)) {
    std::ifstream in(log_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto rec = json::parse(line, nullptr, false);
      if (!rec.is_discarded() && rec.contains("step") && rec["step"].get<std::int64_t>() <= step_) kept.push_back(line);
    }
  }
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw Error("cannot write " + log_path.string());
  for (const auto& line : kept) log << line << "\n";

  {
    std::ofstream rc(config_.out_dir / "run_config.json", std::ios::trunc);
    json resolved = config_.to_json();
    resolved["run_config"] = config_.run_config;
    rc << resolved.dump(2) << "\n";
  }

  std::vector<StepMetrics> history;
  if (step_ == 0 && config_.max_steps == 0) save_checkpoint();
  while (step_ < config_.max_steps) {
    const StepMetrics m = step();
    history.push_back(m);
    if (m.step % config_.log_every == 0) {
      log << m.to_json().dump() << "\n" << std::flush;
      if (on_log) on_log(m);
    }
    if (m.step % config_.checkpoint_every == 0 || m.step == config_.max_steps) save_checkpoint();
  }
  return history;
}

TrainResult train(const TrainConfig& config, const std::function<void(const StepMetrics&)>& on_log) {
  Trainer trainer(config);
  TrainResult result;
  result.metrics = trainer.run(on_log);
  result.final_checkpoint = checkpoint_path(config.out_dir, trainer.steps_done());
  return result;
}

}  // namespace genesis::train
