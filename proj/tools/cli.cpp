#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "genesis/config.hpp"
#include "genesis/dataset.hpp"
#include "genesis/errors.hpp"
#include "genesis/metrics.hpp"
#include "genesis/model.hpp"
#include "genesis/probe.hpp"
#include "genesis/rng.hpp"
#include "genesis/trainer.hpp"

namespace genesis::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void flatten_into(const json& j, const std::string& prefix, json& out) {
  for (const auto& [key, value] : j.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten_into(value, name, out);
    } else {
      out[name] = value;
    }
  }
}

bool same_kind(const json& expected, const json& given) {
  if (expected.is_boolean()) return given.is_boolean();
  if (expected.is_number_float()) return given.is_number();
  if (expected.is_number()) return given.is_number_integer() || given.is_number_unsigned();
  if (expected.is_string()) return given.is_string();
  if (expected.is_array()) return given.is_array();
  return true;
}

/// Flag and config-file values resolved into flat dotted keys. Defaults come
/// first, then the config file, then explicitly given flags.
class Settings {
 public:
  template <typename T>
  CLI::Option* option(CLI::App* app, const std::string& flag, const std::string& key, T fallback,
                      const std::string& help) {
    values_[key] = fallback;
    auto holder = std::make_shared<T>(fallback);
    CLI::Option* opt = app->add_option(flag, *holder, help);
    if constexpr (!std::is_same_v<T, std::vector<std::string>>) opt->default_val(fallback);
    overrides_.push_back([this, holder, opt, key] {
      if (opt->count() > 0) values_[key] = *holder;
    });
    return opt;
  }

  CLI::Option* flag(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    values_[key] = false;
    auto holder = std::make_shared<bool>(false);
    CLI::Option* opt = app->add_flag(flag, *holder, help);
    overrides_.push_back([this, holder, opt, key] {
      if (opt->count() > 0) values_[key] = *holder;
    });
    return opt;
  }

  void add_config_option(CLI::App* app) { app->add_option("--config", config_path_, "JSON config with dotted keys"); }

  /// Applies the config file and explicit flags. Keys from sections this
  /// command does not use are ignored; unknown keys in its sections are errors.
  void resolve() {
    if (!config_path_.empty()) {
      std::set<std::string> sections;
      for (const auto& [key, _] : values_.items()) sections.insert(key.substr(0, key.find('.')));
      const json file = read_config_file(config_path_);
      for (const auto& [key, value] : file.items()) {
        const auto section = key.substr(0, key.find('.'));
        if (!sections.count(section)) continue;
        if (!values_.contains(key)) throw ConfigError("unknown config key '" + key + "' in " + config_path_);
        if (!same_kind(values_[key], value)) throw ConfigError("config key '" + key + "' has the wrong type");
        values_[key] = value;
      }
    }
    for (auto& apply : overrides_) apply();
  }

  template <typename T>
  T get(const std::string& key) const {
    return values_.at(key).get<T>();
  }

  std::string path(const std::string& key) const { return get<std::string>(key); }

  const json& values() const { return values_; }

 private:
  json values_ = json::object();
  std::vector<std::function<void()>> overrides_;
  std::string config_path_;
};

void add_model_options(Settings& s, CLI::App* app) {
  const ModelConfig d;
  s.option<std::string>(app, "--variant", "model.variant", to_string(d.variant), "genesis, genesis_s, bd_vae or dc_vae");
  s.option<int>(app, "--k", "model.k", d.k, "number of components");
  s.option<double>(app, "--width-scale", "model.width_scale", d.width_scale, "multiplier on conv filter counts");
  s.option<int>(app, "--mask-latent", "model.mask_latent", d.mask_latent, "mask latent size");
  s.option<int>(app, "--comp-latent", "model.comp_latent", d.comp_latent, "component latent size");
  s.option<int>(app, "--vae-latent", "model.vae_latent", d.vae_latent, "baseline VAE latent size");
  s.option<double>(app, "--sigma-x", "model.sigma_x", d.sigma_x, "pixel likelihood std");
  s.option<int>(app, "--feature-dim", "model.feature_dim", d.feature_dim, "image encoder feature size");
  s.option<int>(app, "--broadcast-filters", "model.broadcast_filters", d.broadcast_filters,
                "broadcast decoder filters");
  s.option<int>(app, "--prior-hidden", "model.prior_hidden", d.prior_hidden, "prior LSTM units");
  s.option<int>(app, "--mlp-hidden", "model.mlp_hidden", d.mlp_hidden, "MLP hidden units");
}

ModelConfig model_config(const Settings& s, int height, int width) {
  ModelConfig c;
  c.variant = variant_from_string(s.get<std::string>("model.variant"));
  c.k = s.get<int>("model.k");
  c.width_scale = s.get<double>("model.width_scale");
  c.mask_latent = s.get<int>("model.mask_latent");
  c.comp_latent = s.get<int>("model.comp_latent");
  c.vae_latent = s.get<int>("model.vae_latent");
  c.sigma_x = s.get<double>("model.sigma_x");
  c.feature_dim = s.get<int>("model.feature_dim");
  c.broadcast_filters = s.get<int>("model.broadcast_filters");
  c.prior_hidden = s.get<int>("model.prior_hidden");
  c.mlp_hidden = s.get<int>("model.mlp_hidden");
  c.height = height;
  c.width = width;
  c.validate();
  return c;
}

std::vector<std::int64_t> parse_counts(const std::string& text) {
  std::vector<std::int64_t> counts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v < 0) throw std::invalid_argument(part);
      counts.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--counts expects three non-negative integers 'train,val,test', got '" + text + "'");
    }
  }
  if (counts.size() != 3) throw ConfigError("--counts expects three values 'train,val,test', got '" + text + "'");
  return counts;
}

bool deterministic(const Settings& s) { return s.get<bool>("run.deterministic") || deterministic_from_env(); }

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

// An untrained model is built with the same init stream the trainer uses.
std::shared_ptr<model::GenerativeModel> load_or_init(const std::string& ckpt, const ModelConfig& fresh,
                                                     std::uint64_t seed) {
  if (!ckpt.empty()) return train::model_from_checkpoint(ckpt);
  torch::manual_seed(derive_seed(seed, 0));
  auto m = model::make_model(fresh);
  m->eval();
  return m;
}

png::TextChunks provenance(const json& run_config, const std::string& layout) {
  return {{"genesis.run_config", run_config.dump()}, {"genesis.layout", layout}};
}

// ---- data gen -------------------------------------------------------------

struct DataGen {
  Settings s;
  void setup(CLI::App* app) {
    s.add_config_option(app);
    s.option<std::string>(app, "--out", "data.out", "", "output dataset directory")->required();
    s.option<std::uint64_t>(app, "--seed", "data.seed", 0, "dataset seed");
    s.option<int>(app, "--size", "data.size", 64, "image height and width");
    s.option<std::string>(app, "--counts", "data.counts", "50000,10000,10000", "records per split train,val,test");
    s.option<int>(app, "--workers", "data.workers", static_cast<int>(std::max(1u, std::thread::hardware_concurrency())),
                  "generator threads (output does not depend on it)");
  }
  int exec(std::ostream& out) {
    s.resolve();
    const auto counts = parse_counts(s.get<std::string>("data.counts"));
    data::DatasetManifest m;
    m.n_train = counts[0];
    m.n_val = counts[1];
    m.n_test = counts[2];
    m.height = m.width = s.get<int>("data.size");
    m.seed = s.get<std::uint64_t>("data.seed");
    m.validate();
    const fs::path dir = s.path("data.out");
    data::build_dataset(m, dir, s.get<int>("data.workers"));
    json rc = s.values();
    rc.erase("data.workers");
    write_json(dir / "run_config.json", rc);
    out << "wrote " << m.total() << " records to " << dir.string() << "\n";
    return 0;
  }
};

// ---- train ----------------------------------------------------------------

struct Train {
  Settings s;
  void setup(CLI::App* app) {
    const train::TrainConfig d;
    s.add_config_option(app);
    s.option<std::string>(app, "--data", "train.data", "", "dataset directory")->required();
    s.option<std::string>(app, "--out", "train.out", d.out_dir.string(), "run directory");
    s.option<std::int64_t>(app, "--steps", "train.steps", d.max_steps, "total optimizer steps");
    s.option<std::int64_t>(app, "--batch-size", "train.batch_size", d.batch_size, "mini-batch size");
    s.option<double>(app, "--lr", "train.lr", d.lr, "ADAM learning rate");
    s.option<std::uint64_t>(app, "--seed", "train.seed", d.seed, "run seed");
    s.option<std::int64_t>(app, "--checkpoint-every", "train.checkpoint_every", d.checkpoint_every,
                           "steps between checkpoints");
    s.option<std::int64_t>(app, "--log-every", "train.log_every", d.log_every, "steps between log records");
    s.option<double>(app, "--grad-clip", "train.grad_clip", d.grad_clip, "global gradient norm clip (<=0 off)");
    s.option<std::string>(app, "--resume", "train.resume", "", "checkpoint file or run directory to continue");
    s.flag(app, "--deterministic", "run.deterministic", "single-threaded deterministic kernels");
    s.flag(app, "--quiet", "run.quiet", "no progress output");
    add_model_options(s, app);
  }
  int exec(std::ostream& out) {
    s.resolve();
    train::TrainConfig c;
    c.data_dir = s.path("train.data");
    c.out_dir = s.path("train.out");
    c.max_steps = s.get<std::int64_t>("train.steps");
    c.batch_size = s.get<std::int64_t>("train.batch_size");
    c.lr = s.get<double>("train.lr");
    c.seed = s.get<std::uint64_t>("train.seed");
    c.checkpoint_every = s.get<std::int64_t>("train.checkpoint_every");
    c.log_every = s.get<std::int64_t>("train.log_every");
    c.grad_clip = s.get<double>("train.grad_clip");
    c.deterministic = deterministic(s);
    const auto manifest = data::read_manifest(c.data_dir);
    c.model = model_config(s, manifest.height, manifest.width);
    c.run_config = s.values();
    c.run_config["run.deterministic"] = c.deterministic;
    fs::create_directories(c.out_dir);

    const bool quiet = s.get<bool>("run.quiet");
    auto progress = [&](const train::StepMetrics& m) {
      if (quiet) return;
      out << "step " << m.step << " recon_ll " << m.recon_ll << " kl_m " << m.kl_m << " kl_c " << m.kl_c << " beta "
          << m.beta << " recon_err " << m.recon_err << "\n"
          << std::flush;
    };
    train::set_deterministic(c.deterministic);
    const std::string resume = s.path("train.resume");
    std::unique_ptr<train::Trainer> trainer;
    if (resume.empty()) {
      trainer = std::make_unique<train::Trainer>(c);
    } else {
      const fs::path from = fs::is_directory(resume) ? latest_checkpoint(resume) : fs::path(resume);
      trainer = std::make_unique<train::Trainer>(c, from);
      if (!quiet) out << "resumed from " << from.string() << " at step " << trainer->steps_done() << "\n";
    }
    trainer->run(progress);
    out << "final checkpoint " << train::checkpoint_path(c.out_dir, trainer->steps_done()).string() << "\n";
    return 0;
  }
};

// ---- sample ---------------------------------------------------------------

struct Sample {
  Settings s;
  void setup(CLI::App* app) {
    s.add_config_option(app);
    s.option<std::string>(app, "--ckpt", "sample.ckpt", "", "checkpoint; omitted means an untrained model");
    s.option<std::int64_t>(app, "--n", "sample.n", 8, "number of scenes (grid rows)");
    s.option<std::uint64_t>(app, "--seed", "sample.seed", 0, "sampling seed");
    s.option<std::string>(app, "--out", "sample.out", "samples.png", "output PNG");
    s.option<int>(app, "--size", "model.size", 64, "image size of an untrained model");
    s.flag(app, "--deterministic", "run.deterministic", "single-threaded deterministic kernels");
    add_model_options(s, app);
  }
  int exec(std::ostream& out) {
    s.resolve();
    train::set_deterministic(deterministic(s));
    const int size = s.get<int>("model.size");
    const auto seed = s.get<std::uint64_t>("sample.seed");
    const auto n = s.get<std::int64_t>("sample.n");
    if (n < 1) throw ConfigError("--n must be at least 1");
    const std::string ckpt = s.path("sample.ckpt");
    auto m = load_or_init(ckpt, ckpt.empty() ? model_config(s, size, size) : ModelConfig{}, seed);
    m->eval();
    torch::NoGradGuard no_grad;
    auto gen = at::make_generator<at::CPUGeneratorImpl>(derive_seed(seed, 1));
    const auto scene = m->generate(n, gen);
    const auto pi = scene.mix.pi().unsqueeze(2);
    const auto panes = torch::cat({scene.composite.unsqueeze(1), pi * scene.components}, 1);
    json rc = s.values();
    rc.erase("sample.out");
    rc["model"] = m->config().to_json();
    png::write(s.path("sample.out"), compose_grid(panes), provenance(rc, "rows=scenes; cols=composite,pi_k*x_k"));
    out << "wrote " << n << "x" << panes.size(1) << " grid to " << s.path("sample.out") << "\n";
    return 0;
  }
};

// ---- decompose ------------------------------------------------------------

struct Decompose {
  Settings s;
  void setup(CLI::App* app) {
    s.add_config_option(app);
    s.option<std::string>(app, "--ckpt", "decompose.ckpt", "", "checkpoint; omitted means an untrained model");
    s.option<std::string>(app, "--data", "decompose.data", "", "dataset directory")->required();
    s.option<std::string>(app, "--split", "decompose.split", "test", "train, val or test");
    s.option<std::int64_t>(app, "--start", "decompose.start", 0, "first record");
    s.option<std::int64_t>(app, "--n", "decompose.n", 8, "number of records (grid rows)");
    s.option<std::uint64_t>(app, "--seed", "decompose.seed", 0, "init seed of an untrained model");
    s.option<std::string>(app, "--out", "decompose.out", "decompose.png", "output PNG");
    s.flag(app, "--deterministic", "run.deterministic", "single-threaded deterministic kernels");
    add_model_options(s, app);
  }
  int exec(std::ostream& out) {
    s.resolve();
    train::set_deterministic(deterministic(s));
    const fs::path dir = s.path("decompose.data");
    const auto manifest = data::read_manifest(dir);
    const auto split = data::load_split(dir, data::split_from_string(s.get<std::string>("decompose.split")), false);
    const auto start = s.get<std::int64_t>("decompose.start");
    const auto n = s.get<std::int64_t>("decompose.n");
    if (n < 1 || start < 0 || start + n > static_cast<std::int64_t>(split.size())) {
      throw ConfigError("records [start, start+n) must lie inside the split");
    }
    const std::string ckpt = s.path("decompose.ckpt");
    auto m = load_or_init(ckpt, ckpt.empty() ? model_config(s, manifest.height, manifest.width) : ModelConfig{},
                          s.get<std::uint64_t>("decompose.seed"));
    m->eval();
    torch::NoGradGuard no_grad;
    std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), start);
    const auto x = split.image_batch(idx).to(m->options().dtype());
    const auto pass = m->decompose(x);
    const auto pi = pass.mix.pi().unsqueeze(2);
    const auto panes =
        torch::cat({x.unsqueeze(1), pass.reconstruction.unsqueeze(1), pi * pass.components}, 1);
    json rc = s.values();
    rc.erase("decompose.out");
    rc["model"] = m->config().to_json();
    png::write(s.path("decompose.out"), compose_grid(panes),
               provenance(rc, "rows=records; cols=input,reconstruction,pi_k*x_k"));
    out << "wrote " << n << "x" << panes.size(1) << " grid to " << s.path("decompose.out") << "\n";
    return 0;
  }
};

// ---- eval-seg -------------------------------------------------------------

struct EvalSeg {
  Settings s;
  void setup(CLI::App* app) {
    s.add_config_option(app);
    s.option<std::vector<std::string>>(app, "--ckpt", "eval.ckpt", {}, "checkpoint(s), one per training seed")
        ->required();
    s.option<std::string>(app, "--data", "eval.data", "", "dataset directory")->required();
    s.option<std::string>(app, "--split", "eval.split", "test", "train, val or test");
    s.option<std::int64_t>(app, "--n", "eval.n", 300, "number of random images");
    s.option<std::uint64_t>(app, "--seed", "eval.seed", 0, "image selection seed");
    s.option<std::string>(app, "--masks", "eval.masks", "argmax", "predicted masks for SC: argmax or threshold");
    s.option<std::string>(app, "--out", "eval.out", "scores.json", "output JSON");
    s.flag(app, "--deterministic", "run.deterministic", "single-threaded deterministic kernels");
  }
  int exec(std::ostream& out) {
    s.resolve();
    train::set_deterministic(deterministic(s));
    const auto mode_name = s.get<std::string>("eval.masks");
    metrics::PredictedMasks mode;
    if (mode_name == "argmax") {
      mode = metrics::PredictedMasks::argmax;
    } else if (mode_name == "threshold") {
      mode = metrics::PredictedMasks::threshold;
    } else {
      throw ConfigError("--masks must be argmax or threshold");
    }
    const fs::path dir = s.path("eval.data");
    const auto split = data::load_split(dir, data::split_from_string(s.get<std::string>("eval.split")), true);
    std::vector<metrics::NamedModel> models;
    for (const auto& path : s.get<std::vector<std::string>>("eval.ckpt")) {
      models.push_back({path, train::model_from_checkpoint(path)});
    }
    const auto n = std::min<std::int64_t>(s.get<std::int64_t>("eval.n"), static_cast<std::int64_t>(split.size()));
    const auto report = metrics::evaluate_segmentation(models, split, n, s.get<std::uint64_t>("eval.seed"), mode);
    json j = report.to_json();
    j["n_images"] = n;
    j["run_config"] = s.values();
    write_json(s.path("eval.out"), j);
    out << "ARI " << report.ari.mean << " ± " << report.ari.std << "  SC " << report.sc.mean << " ± "
        << report.sc.std << "  mSC " << report.msc.mean << " ± " << report.msc.std << "\n";
    return 0;
  }
};

// ---- probe ----------------------------------------------------------------

struct Probe {
  Settings s;
  void setup(CLI::App* app) {
    const probe::ProbeConfig d;
    s.add_config_option(app);
    s.option<std::string>(app, "--ckpt", "probe.ckpt", "", "checkpoint")->required();
    s.option<std::string>(app, "--data", "probe.data", "", "dataset directory")->required();
    s.option<std::string>(app, "--task", "probe.task", probe::to_string(d.task), "probe task (sprite_count)");
    s.option<std::string>(app, "--out", "probe.out", "probe.json", "output JSON");
    s.option<int>(app, "--epochs", "probe.epochs", d.epochs, "training epochs");
    s.option<std::int64_t>(app, "--train-size", "probe.train_size", d.train_size, "labelled training examples");
    s.option<int>(app, "--hidden", "probe.hidden", d.hidden, "hidden units");
    s.option<std::int64_t>(app, "--batch-size", "probe.batch_size", d.batch_size, "mini-batch size");
    s.option<double>(app, "--lr", "probe.lr", d.lr, "ADAM learning rate");
    s.option<std::uint64_t>(app, "--seed", "probe.seed", d.seed, "probe seed");
    s.flag(app, "--deterministic", "run.deterministic", "single-threaded deterministic kernels");
  }
  int exec(std::ostream& out, std::ostream& err) {
    s.resolve();
    train::set_deterministic(deterministic(s));
    probe::ProbeConfig c;
    c.task = probe::task_from_string(s.get<std::string>("probe.task"));
    c.epochs = s.get<int>("probe.epochs");
    c.train_size = s.get<std::int64_t>("probe.train_size");
    c.hidden = s.get<int>("probe.hidden");
    c.batch_size = s.get<std::int64_t>("probe.batch_size");
    c.lr = s.get<double>("probe.lr");
    c.seed = s.get<std::uint64_t>("probe.seed");
    auto m = train::model_from_checkpoint(s.path("probe.ckpt"));
    const auto result = probe::run_probe(*m, s.path("probe.data"), c);
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    json j = result.to_json();
    j["representation_dim"] = m->representation_dim();
    j["config"] = c.to_json();
    j["run_config"] = s.values();
    write_json(s.path("probe.out"), j);
    out << "test accuracy " << result.test_accuracy << " (chance " << result.chance << ")\n";
    return 0;
  }
};

}  // namespace

json flatten_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  json flat = json::object();
  flatten_into(j, "", flat);
  return flat;
}

json read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("config file " + path.string() + " is not valid JSON");
  return flatten_config(j);
}

png::Image8 compose_grid(const torch::Tensor& panes) {
  if (panes.dim() != 5 || panes.size(2) != 3) throw ShapeError("grid panes must be [rows, cols, 3, H, W]");
  const auto p = panes.detach().to(torch::kFloat64).contiguous();
  if (!torch::isfinite(p).all().item<bool>()) throw NumericalError("image panes contain non-finite values");
  if (p.min().item<double>() < 0.0 || p.max().item<double>() > 1.0) {
    throw NumericalError("image panes leave [0,1]");
  }
  const auto rows = p.size(0);
  const auto cols = p.size(1);
  const auto h = p.size(3);
  const auto w = p.size(4);
  // [rows, H, cols, W, 3]
  const auto tiled = p.permute({0, 3, 1, 4, 2}).contiguous();
  const auto* v = tiled.data_ptr<double>();
  png::Image8 image;
  image.height = static_cast<int>(rows * h);
  image.width = static_cast<int>(cols * w);
  image.channels = 3;
  image.data.resize(static_cast<std::size_t>(tiled.numel()));
  for (std::size_t i = 0; i < image.data.size(); ++i) image.data[i] = png::quantize(v[i]);
  return image;
}

fs::path latest_checkpoint(const fs::path& run_dir) {
  static const std::regex pattern(R"(ckpt_(\d+)\.bin)");
  fs::path best;
  long long best_step = -1;
  for (const auto& entry : fs::directory_iterator(run_dir)) {
    std::smatch match;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, match, pattern)) {
      const long long step = std::stoll(match[1].str());
      if (step > best_step) {
        best_step = step;
        best = entry.path();
      }
    }
  }
  if (best.empty()) throw CheckpointError("no checkpoint in " + run_dir.string());
  return best;
}

bool deterministic_from_env() {
  const char* v = std::getenv("GENESIS_DETERMINISTIC");
  return v != nullptr && std::string(v) == "1";
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"GENESIS generative scene model: data, training, sampling and evaluation", "genesis"};
  app.require_subcommand(1);

  DataGen data_gen;
  Train train_cmd;
  Sample sample;
  Decompose decompose;
  EvalSeg eval_seg;
  Probe probe_cmd;

  auto* data = app.add_subcommand("data", "dataset commands");
  data->require_subcommand(1);
  auto* gen = data->add_subcommand("gen", "generate a Multi-dSprites dataset");
  data_gen.setup(gen);
  auto* train_app = app.add_subcommand("train", "train a model");
  train_cmd.setup(train_app);
  auto* sample_app = app.add_subcommand("sample", "draw scenes from the generative model");
  sample.setup(sample_app);
  auto* decompose_app = app.add_subcommand("decompose", "step-by-step decomposition of dataset images");
  decompose.setup(decompose_app);
  auto* eval_app = app.add_subcommand("eval-seg", "foreground ARI, SC and mSC of trained models");
  eval_seg.setup(eval_app);
  auto* probe_app = app.add_subcommand("probe", "train a probe classifier on frozen representations");
  probe_cmd.setup(probe_app);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (gen->parsed()) return data_gen.exec(out);
    if (train_app->parsed()) return train_cmd.exec(out);
    if (sample_app->parsed()) return sample.exec(out);
    if (decompose_app->parsed()) return decompose.exec(out);
    if (eval_app->parsed()) return eval_seg.exec(out);
    if (probe_app->parsed()) return probe_cmd.exec(out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace genesis::cli
