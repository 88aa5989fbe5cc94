#include "genesis/baselines.hpp"

#include "genesis/errors.hpp"

namespace genesis::baselines {

VaeModel::VaeModel(const ModelConfig& config) : GenerativeModel(config) {
  const auto& c = config_;
  if (c.variant != Variant::bd_vae && c.variant != Variant::dc_vae) {
    throw ConfigError("VaeModel built with a GENESIS variant");
  }
  encoder_ = register_module("image_encoder", nets::GatedConvEncoder(3, c.height, c.width, c.feature_dim, c.width_scale));
  head_ = register_module("posterior_head", nets::GaussianHead(c.feature_dim, c.vae_latent));
  if (c.variant == Variant::bd_vae) {
    broadcast_ = register_module(
        "decoder", nets::BroadcastDecoder(c.vae_latent, 3, 2 * nets::scaled_filters(c.broadcast_filters, c.width_scale),
                                          c.broadcast_layers, c.height, c.width));
  } else {
    deconv_ = register_module("decoder", nets::GatedConvDecoder(c.vae_latent, 3, c.height, c.width, c.width_scale));
  }
}

model::ForwardNoise VaeModel::draw_noise(std::int64_t batch, at::Generator& gen) const {
  model::ForwardNoise noise;
  noise.component = torch::randn({1, batch, config_.vae_latent}, gen, options());
  return noise;
}

nets::Gaussian VaeModel::posterior(const torch::Tensor& x) {
  check_image(x);
  auto q = head_->forward(encoder_->forward(x));
  if (!torch::isfinite(q.mean).all().item<bool>() || !torch::isfinite(q.std).all().item<bool>()) {
    throw NumericalError("non-finite VAE posterior parameters at step 1");
  }
  return q;
}

torch::Tensor VaeModel::decode(const torch::Tensor& z) {
  return torch::sigmoid(broadcast_ ? broadcast_->forward(z) : deconv_->forward(z));
}

model::ForwardPass VaeModel::forward_pass(const torch::Tensor& x, const model::ForwardNoise& noise) {
  const auto b = x.size(0);
  if (!noise.component.defined() || noise.component.dim() != 3 || noise.component.size(1) != b) {
    throw ShapeError("VAE noise must be [1, B, D]");
  }
  const auto q = posterior(x);
  model::LatentChain post{q.mean.unsqueeze(0), q.std.unsqueeze(0), {}};
  post.sample = post.mean + post.std * noise.component;
  model::LatentChain prior{torch::zeros_like(post.mean), torch::ones_like(post.std), {}};

  model::ForwardPass pass;
  pass.reconstruction = decode(post.sample[0]);
  pass.components = pass.reconstruction.unsqueeze(1);
  const auto zeros = torch::zeros({b, 1, config_.height, config_.width}, x.options());
  pass.mix = {zeros, zeros};
  pass.recon_ll = model::mixture_log_likelihood(x, pass.mix.log_pi, pass.components, config_.sigma_x);
  pass.chains.push_back({"component", std::move(post), std::move(prior)});
  return pass;
}

model::SceneSample VaeModel::generate(std::int64_t n, at::Generator& gen, int) {
  model::SceneSample s;
  const auto z = torch::randn({n, config_.vae_latent}, gen, options());
  s.composite = decode(z);
  s.components = s.composite.unsqueeze(1);
  const auto zeros = torch::zeros({n, 1, config_.height, config_.width}, options());
  s.mix = {zeros, zeros};
  s.latents.push_back({torch::zeros_like(z).unsqueeze(0), torch::ones_like(z).unsqueeze(0), z.unsqueeze(0)});
  return s;
}

torch::Tensor VaeModel::representation(const torch::Tensor& x) {
  torch::NoGradGuard no_grad;
  return posterior(x).mean;
}

}  // namespace genesis::baselines
