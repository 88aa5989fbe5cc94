#pragma once

#include "genesis/model.hpp"

namespace genesis::baselines {

/// Single-latent VAE with a standard-normal prior and the same gated image
/// encoder as GENESIS. BD-VAE decodes with a spatial broadcast decoder of
/// twice the GENESIS filter count; DC-VAE with the gated deconvolutional
/// decoder. Both use the Gaussian likelihood with std sigma_x, exposed as a
/// one-component mixture so the GENESIS objective applies unchanged.
class VaeModel : public model::GenerativeModel {
 public:
  explicit VaeModel(const ModelConfig& config);

  model::ForwardNoise draw_noise(std::int64_t batch, at::Generator& gen) const override;
  model::ForwardPass forward_pass(const torch::Tensor& x, const model::ForwardNoise& noise) override;
  model::SceneSample generate(std::int64_t n, at::Generator& gen, int k = 0) override;
  torch::Tensor representation(const torch::Tensor& x) override;
  std::int64_t representation_dim() const override { return config_.vae_latent; }
  nets::GatedConvEncoder& image_encoder() override { return encoder_; }

  nets::Gaussian posterior(const torch::Tensor& x);
  /// Decoder means in [0,1] for latents [N, D].
  torch::Tensor decode(const torch::Tensor& z);

 private:
  nets::GatedConvEncoder encoder_{nullptr};
  nets::GaussianHead head_{nullptr};
  nets::BroadcastDecoder broadcast_{nullptr};
  nets::GatedConvDecoder deconv_{nullptr};
};

}  // namespace genesis::baselines
