#include "genesis/model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "genesis/baselines.hpp"
#include "genesis/errors.hpp"

namespace genesis::model {
namespace F = torch::nn::functional;

MixingProbs stick_breaking(const torch::Tensor& logits) {
  if (logits.dim() != 4) throw ShapeError("stick_breaking expects [B, K-1, H, W] logits");
  const auto b = logits.size(0);
  const auto steps = logits.size(1);
  auto log_scope = torch::zeros({b, 1, logits.size(2), logits.size(3)}, logits.options());
  std::vector<torch::Tensor> log_pi;
  std::vector<torch::Tensor> scopes;
  log_pi.reserve(static_cast<std::size_t>(steps + 1));
  scopes.reserve(static_cast<std::size_t>(steps + 1));
  for (std::int64_t k = 0; k < steps; ++k) {
    const auto l = logits.narrow(1, k, 1);
    scopes.push_back(log_scope);
    log_pi.push_back((log_scope + F::logsigmoid(l)).clamp_min(kLogClamp));
    log_scope = (log_scope + F::logsigmoid(-l)).clamp_min(kLogClamp);
  }
  scopes.push_back(log_scope);
  log_pi.push_back(log_scope);
  return {torch::cat(log_pi, 1), torch::cat(scopes, 1)};
}

torch::Tensor mixture_log_likelihood(const torch::Tensor& x, const torch::Tensor& log_pi,
                                     const torch::Tensor& components, double sigma_x) {
  if (x.dim() != 4 || components.dim() != 5 || log_pi.dim() != 4) {
    throw ShapeError("mixture_log_likelihood expects x [B,C,H,W], log_pi [B,K,H,W], components [B,K,C,H,W]");
  }
  const double log_norm = std::log(sigma_x) + 0.5 * std::log(2.0 * std::numbers::pi);
  const auto residual = (x.unsqueeze(1) - components) / sigma_x;
  const auto log_normal = -0.5 * residual.square() - log_norm;
  const auto per_channel = torch::logsumexp(log_pi.unsqueeze(2) + log_normal, 1);
  return per_channel.sum({1, 2, 3});
}

torch::Tensor composite(const MixingProbs& mix, const torch::Tensor& components) {
  return (mix.pi().unsqueeze(2) * components).sum(1);
}

torch::Tensor hard_segmentation(const MixingProbs& mix) { return mix.log_pi.argmax(1); }

GenerativeModel::GenerativeModel(const ModelConfig& config) : config_(config) { config_.validate(); }

torch::TensorOptions GenerativeModel::options() const {
  const auto params = parameters();
  if (params.empty()) return torch::TensorOptions().dtype(torch::kFloat32);
  return params.front().options().requires_grad(false);
}

ForwardNoise GenerativeModel::zero_noise(std::int64_t batch) const {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(0);
  ForwardNoise noise = draw_noise(batch, gen);
  if (noise.mask.defined()) noise.mask.zero_();
  if (noise.component.defined()) noise.component.zero_();
  return noise;
}

ForwardPass GenerativeModel::decompose(const torch::Tensor& x) { return forward_pass(x, zero_noise(x.size(0))); }

void GenerativeModel::check_image(const torch::Tensor& x) const {
  if (x.dim() != 4 || x.size(1) != 3 || x.size(2) != config_.height || x.size(3) != config_.width) {
    std::ostringstream ss;
    ss << "expected images [B, 3, " << config_.height << ", " << config_.width << "], got " << x.sizes();
    throw ShapeError(ss.str());
  }
}

namespace {

void check_finite(const nets::Gaussian& g, const char* chain, std::int64_t step) {
  if (!torch::isfinite(g.mean).all().item<bool>() || !torch::isfinite(g.std).all().item<bool>()) {
    throw NumericalError(std::string("non-finite ") + chain + " posterior parameters at step " +
                         std::to_string(step + 1));
  }
}

LatentChain stack_chain(const std::vector<torch::Tensor>& means, const std::vector<torch::Tensor>& stds,
                        const std::vector<torch::Tensor>& samples) {
  LatentChain chain{torch::stack(means), torch::stack(stds), {}};
  if (!samples.empty()) chain.sample = torch::stack(samples);
  return chain;
}

}  // namespace

GenesisModel::GenesisModel(const ModelConfig& config) : GenerativeModel(config) {
  if (config_.variant != Variant::genesis && config_.variant != Variant::genesis_s) {
    throw ConfigError("GenesisModel built with a VAE variant");
  }
  const auto& c = config_;
  const int dm = c.mask_latent;
  image_encoder_ = register_module("image_encoder", nets::GatedConvEncoder(3, c.height, c.width, c.feature_dim,
                                                                           c.width_scale));
  posterior_cell_ = register_module("posterior_cell", nets::RecurrentCell(c.feature_dim + dm, 2 * dm));
  posterior_head_ = register_module("posterior_head", nets::GaussianHead(2 * dm, dm));
  mask_decoder_ = register_module("mask_decoder", nets::GatedConvDecoder(dm, 1, c.height, c.width, c.width_scale));
  const int appearance_latent = single_chain() ? dm : c.comp_latent;
  component_decoder_ = register_module(
      "component_decoder", nets::BroadcastDecoder(appearance_latent, 3, nets::scaled_filters(c.broadcast_filters, c.width_scale),
                                                  c.broadcast_layers, c.height, c.width));
  if (!single_chain()) {
    component_encoder_ = register_module(
        "component_encoder", nets::ComponentEncoder(4, c.height, c.width, c.comp_latent, c.mlp_hidden, c.width_scale));
    component_prior_ = register_module("component_prior", nets::LatentHeadMLP(dm, c.mlp_hidden, c.comp_latent));
  }
  prior_cell_ = register_module("prior_cell", nets::RecurrentCell(dm, c.prior_hidden));
  prior_head_ = register_module("prior_head", nets::GaussianHead(c.prior_hidden, dm));
  prior_h0_ = register_parameter("prior_h0", torch::zeros({1, c.prior_hidden}));
  prior_c0_ = register_parameter("prior_c0", torch::zeros({1, c.prior_hidden}));
}

ForwardNoise GenesisModel::draw_noise(std::int64_t batch, at::Generator& gen) const {
  const auto opts = options();
  ForwardNoise noise;
  noise.mask = torch::randn({config_.k, batch, config_.mask_latent}, gen, opts);
  if (!single_chain()) noise.component = torch::randn({config_.k, batch, config_.comp_latent}, gen, opts);
  return noise;
}

LatentChain GenesisModel::infer_mask_chain(const torch::Tensor& x, const torch::Tensor& eps) {
  check_image(x);
  const auto b = x.size(0);
  if (eps.dim() != 3 || eps.size(0) < 1 || eps.size(1) != b || eps.size(2) != config_.mask_latent) {
    throw ShapeError("mask noise must be [steps, B, D_m]");
  }
  const auto features = image_encoder_->forward(x);
  auto state = posterior_cell_->zero_state(b, features.options());
  auto previous = torch::zeros({b, config_.mask_latent}, features.options());
  std::vector<torch::Tensor> means, stds, samples;
  for (std::int64_t k = 0; k < eps.size(0); ++k) {
    auto [out, next] = posterior_cell_->step(torch::cat({features, previous}, 1), state);
    state = next;
    const auto q = posterior_head_->forward(out);
    check_finite(q, "mask", k);
    previous = q.mean + q.std * eps[k];
    means.push_back(q.mean);
    stds.push_back(q.std);
    samples.push_back(previous);
  }
  return stack_chain(means, stds, samples);
}

torch::Tensor GenesisModel::decode_mask_logits(const torch::Tensor& mask_samples) {
  const auto k = mask_samples.size(0);
  const auto b = mask_samples.size(1);
  if (k < 2) return torch::zeros({b, 0, config_.height, config_.width}, mask_samples.options());
  const auto logits = mask_decoder_->forward(mask_samples.narrow(0, 0, k - 1).reshape({(k - 1) * b, -1}));
  return logits.view({k - 1, b, config_.height, config_.width}).permute({1, 0, 2, 3});
}

LatentChain GenesisModel::infer_component_chain(const torch::Tensor& x, const MixingProbs& mix,
                                                const torch::Tensor& eps) {
  if (single_chain()) throw ConfigError("GENESIS-S has no component chain");
  check_image(x);
  const auto b = x.size(0);
  const auto k = mix.components();
  if (eps.dim() != 3 || eps.size(0) != k || eps.size(1) != b) throw ShapeError("component noise must be [K, B, D_c]");
  const auto masks = config_.log_mask_input ? mix.log_pi : mix.pi();
  const auto inputs =
      torch::cat({x.repeat({k, 1, 1, 1}), masks.permute({1, 0, 2, 3}).reshape({k * b, 1, config_.height, config_.width})},
                 1);
  const auto q = component_encoder_->forward(inputs);
  for (std::int64_t step = 0; step < k; ++step) {
    check_finite({q.mean.narrow(0, step * b, b), q.std.narrow(0, step * b, b)}, "component", step);
  }
  LatentChain chain{q.mean.view({k, b, -1}), q.std.view({k, b, -1}), {}};
  chain.sample = chain.mean + chain.std * eps;
  return chain;
}

torch::Tensor GenesisModel::decode_components(const torch::Tensor& samples) {
  const auto k = samples.size(0);
  const auto b = samples.size(1);
  const auto out = torch::sigmoid(component_decoder_->forward(samples.reshape({k * b, -1})));
  return out.view({k, b, 3, config_.height, config_.width}).permute({1, 0, 2, 3, 4});
}

LatentChain GenesisModel::prior_mask_chain(const torch::Tensor& mask_samples) {
  const auto k = mask_samples.size(0);
  const auto b = mask_samples.size(1);
  nets::CellState state{prior_h0_.expand({b, config_.prior_hidden}), prior_c0_.expand({b, config_.prior_hidden})};
  auto hidden = state.h;
  std::vector<torch::Tensor> means, stds;
  for (std::int64_t step = 0; step < k; ++step) {
    if (step > 0) {
      auto [out, next] = prior_cell_->step(mask_samples[step - 1], state);
      state = next;
      hidden = out;
    }
    const auto p = prior_head_->forward(hidden);
    means.push_back(p.mean);
    stds.push_back(p.std);
  }
  return stack_chain(means, stds, {});
}

LatentChain GenesisModel::component_prior(const torch::Tensor& mask_samples) {
  if (single_chain()) throw ConfigError("GENESIS-S has no component prior");
  const auto k = mask_samples.size(0);
  const auto b = mask_samples.size(1);
  const auto p = component_prior_->forward(mask_samples.reshape({k * b, -1}));
  return {p.mean.view({k, b, -1}), p.std.view({k, b, -1}), {}};
}

std::vector<LatentChain> GenesisModel::prior_rollout(std::int64_t n, int k, at::Generator& gen) {
  if (k < 1) throw ConfigError("prior rollout needs at least one step");
  const auto opts = options();
  nets::CellState state{prior_h0_.expand({n, config_.prior_hidden}), prior_c0_.expand({n, config_.prior_hidden})};
  auto hidden = state.h;
  std::vector<torch::Tensor> means, stds, samples;
  for (int step = 0; step < k; ++step) {
    if (step > 0) {
      auto [out, next] = prior_cell_->step(samples.back(), state);
      state = next;
      hidden = out;
    }
    const auto p = prior_head_->forward(hidden);
    means.push_back(p.mean);
    stds.push_back(p.std);
    samples.push_back(p.mean + p.std * torch::randn({n, config_.mask_latent}, gen, opts));
  }
  std::vector<LatentChain> chains{stack_chain(means, stds, samples)};
  if (!single_chain()) {
    LatentChain comp = component_prior(chains.front().sample);
    comp.sample = comp.mean + comp.std * torch::randn(comp.mean.sizes(), gen, opts);
    chains.push_back(comp);
  }
  return chains;
}

ForwardPass GenesisModel::forward_pass(const torch::Tensor& x, const ForwardNoise& noise) {
  check_image(x);
  if (!noise.mask.defined() || noise.mask.size(0) != config_.k) throw ShapeError("mask noise must have K steps");
  ForwardPass pass;
  LatentChain mask = infer_mask_chain(x, noise.mask);
  pass.mix = stick_breaking(decode_mask_logits(mask.sample));
  LatentChain mask_prior = prior_mask_chain(mask.sample);
  if (single_chain()) {
    pass.components = decode_components(mask.sample);
    pass.chains.push_back({"mask", std::move(mask), std::move(mask_prior)});
  } else {
    LatentChain comp = infer_component_chain(x, pass.mix, noise.component);
    pass.components = decode_components(comp.sample);
    LatentChain comp_prior = component_prior(mask.sample);
    pass.chains.push_back({"mask", std::move(mask), std::move(mask_prior)});
    pass.chains.push_back({"component", std::move(comp), std::move(comp_prior)});
  }
  pass.recon_ll = mixture_log_likelihood(x, pass.mix.log_pi, pass.components, config_.sigma_x);
  pass.reconstruction = composite(pass.mix, pass.components);
  return pass;
}

SceneSample GenesisModel::generate(std::int64_t n, at::Generator& gen, int k) {
  if (k == 0) k = config_.k;
  SceneSample s;
  s.latents = prior_rollout(n, k, gen);
  s.mix = stick_breaking(decode_mask_logits(s.latents.front().sample));
  s.components = decode_components(s.latents.back().sample);
  s.composite = composite(s.mix, s.components);
  return s;
}

torch::Tensor GenesisModel::representation(const torch::Tensor& x) {
  torch::NoGradGuard no_grad;
  const ForwardPass pass = decompose(x);
  std::vector<torch::Tensor> parts;
  const auto k = pass.chains.front().posterior.steps();
  for (std::int64_t step = 0; step < k; ++step) {
    for (const auto& chain : pass.chains) parts.push_back(chain.posterior.mean[step]);
  }
  return torch::cat(parts, 1);
}

std::int64_t GenesisModel::representation_dim() const {
  return static_cast<std::int64_t>(config_.k) *
         (single_chain() ? config_.mask_latent : config_.mask_latent + config_.comp_latent);
}

std::shared_ptr<GenerativeModel> make_model(const ModelConfig& config) {
  config.validate();
  switch (config.variant) {
    case Variant::genesis:
    case Variant::genesis_s:
      return std::make_shared<GenesisModel>(config);
    case Variant::bd_vae:
    case Variant::dc_vae:
      return std::make_shared<baselines::VaeModel>(config);
  }
  throw ConfigError("unknown variant");
}

}  // namespace genesis::model
