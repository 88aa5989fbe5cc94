#pragma once

#include <torch/torch.h>

#include <memory>
#include <string>
#include <vector>

#include "genesis/config.hpp"
#include "genesis/nets.hpp"

namespace genesis::model {

/// Floor applied to log mixing probabilities and log scopes.
inline constexpr double kLogClamp = -1e10;

/// An ordered chain of diagonal Gaussians, step-major: [K, B, D].
/// `sample` is undefined for prior chains evaluated along posterior samples.
struct LatentChain {
  torch::Tensor mean;
  torch::Tensor std;
  torch::Tensor sample;

  std::int64_t steps() const { return mean.defined() ? mean.size(0) : 0; }
};

/// Per-pixel mixing probabilities in log space, [B, K, H, W].
struct MixingProbs {
  torch::Tensor log_pi;
  /// log(1 − Σ_{j<k} π_j): the mass still unallocated before step k.
  torch::Tensor log_scope;

  torch::Tensor pi() const { return log_pi.exp(); }
  std::int64_t components() const { return log_pi.size(1); }
};

/// Stick-breaking over K−1 logit maps [B, K−1, H, W] → K mixing probabilities:
/// π_1 = σ(l_1), π_k = (1 − Σ_{j<k} π_j)·σ(l_k), π_K = 1 − Σ_{j<K} π_j.
MixingProbs stick_breaking(const torch::Tensor& logits);

/// Σ over pixels and channels of log Σ_k π_k N(x; x_k, σ²) for each image.
/// x: [B,C,H,W], log_pi: [B,K,H,W], components: [B,K,C,H,W] → [B].
torch::Tensor mixture_log_likelihood(const torch::Tensor& x, const torch::Tensor& log_pi,
                                     const torch::Tensor& components, double sigma_x);

/// Σ_k π_k x_k, the expected image under the mixture: [B,C,H,W].
torch::Tensor composite(const MixingProbs& mix, const torch::Tensor& components);

/// Hard segmentation argmax_k π_k: [B,H,W] int64.
torch::Tensor hard_segmentation(const MixingProbs& mix);

struct ChainPair {
  std::string name;  // "mask" or "component"
  LatentChain posterior;
  LatentChain prior;  // conditioned on the posterior samples
};

/// Reparameterization noise for one forward pass; ε ~ N(0, I), step-major.
struct ForwardNoise {
  torch::Tensor mask;       // [K, B, D_m] (GENESIS-S: the single chain)
  torch::Tensor component;  // [K, B, D_c] (GENESIS), [1, B, D] (VAEs)
};

struct ForwardPass {
  MixingProbs mix;
  torch::Tensor components;      // [B, K, 3, H, W], values in [0,1]
  torch::Tensor reconstruction;  // [B, 3, H, W]
  torch::Tensor recon_ll;        // [B]
  std::vector<ChainPair> chains;
};

struct SceneSample {
  MixingProbs mix;
  torch::Tensor components;  // [N, K, 3, H, W]
  torch::Tensor composite;   // [N, 3, H, W]
  std::vector<LatentChain> latents;
};

/// Interface shared by GENESIS, GENESIS-S and the VAE baselines.
class GenerativeModel : public torch::nn::Module {
 public:
  explicit GenerativeModel(const ModelConfig& config);
  ~GenerativeModel() override = default;

  const ModelConfig& config() const { return config_; }
  torch::TensorOptions options() const;

  virtual ForwardNoise draw_noise(std::int64_t batch, at::Generator& gen) const = 0;
  ForwardNoise zero_noise(std::int64_t batch) const;

  /// Posterior pass with the given noise, including prior terms along the
  /// sampled chain, mixture likelihood and reconstruction.
  virtual ForwardPass forward_pass(const torch::Tensor& x, const ForwardNoise& noise) = 0;

  /// Posterior-mean pass (zero noise) in the module's current mode.
  ForwardPass decompose(const torch::Tensor& x);

  /// Ancestral sampling of n scenes with `k` components (0 → config k).
  virtual SceneSample generate(std::int64_t n, at::Generator& gen, int k = 0) = 0;

  /// Concatenated posterior means, one row per image, no gradient.
  virtual torch::Tensor representation(const torch::Tensor& x) = 0;
  virtual std::int64_t representation_dim() const = 0;

  /// Image encoder parameters shapes are comparable across variants.
  virtual nets::GatedConvEncoder& image_encoder() = 0;

 protected:
  void check_image(const torch::Tensor& x) const;

  ModelConfig config_;
};

/// GENESIS (separate mask and component chains) and GENESIS-S (one chain
/// driving a mask decoder and an appearance decoder).
class GenesisModel : public GenerativeModel {
 public:
  explicit GenesisModel(const ModelConfig& config);

  ForwardNoise draw_noise(std::int64_t batch, at::Generator& gen) const override;
  ForwardPass forward_pass(const torch::Tensor& x, const ForwardNoise& noise) override;
  SceneSample generate(std::int64_t n, at::Generator& gen, int k = 0) override;
  torch::Tensor representation(const torch::Tensor& x) override;
  std::int64_t representation_dim() const override;
  nets::GatedConvEncoder& image_encoder() override { return image_encoder_; }

  bool single_chain() const { return config_.variant == Variant::genesis_s; }

  /// q(z^m_k | x, z^m_{1:k−1}): one step per row of `eps` ([steps, B, D_m]).
  LatentChain infer_mask_chain(const torch::Tensor& x, const torch::Tensor& eps);
  /// Mask logit maps for the first K−1 latents: [K, B, D] → [B, K−1, H, W].
  torch::Tensor decode_mask_logits(const torch::Tensor& mask_samples);
  /// q(z^c_k | x, π_k) for every k, batched over k.
  LatentChain infer_component_chain(const torch::Tensor& x, const MixingProbs& mix, const torch::Tensor& eps);
  /// Broadcast-decodes [K, B, D] latents to component means [B, K, 3, H, W].
  torch::Tensor decode_components(const torch::Tensor& samples);
  /// p(z^m_k | z^m_{1:k−1}) along the given samples (teacher forcing).
  LatentChain prior_mask_chain(const torch::Tensor& mask_samples);
  /// p(z^c_k | z^m_k) for every k.
  LatentChain component_prior(const torch::Tensor& mask_samples);
  /// Ancestral rollout: [mask chain] or [mask chain, component chain].
  std::vector<LatentChain> prior_rollout(std::int64_t n, int k, at::Generator& gen);

  nets::GatedConvDecoder& mask_decoder() { return mask_decoder_; }
  nets::BroadcastDecoder& component_decoder() { return component_decoder_; }

 private:
  nets::GatedConvEncoder image_encoder_{nullptr};
  nets::RecurrentCell posterior_cell_{nullptr};
  nets::GaussianHead posterior_head_{nullptr};
  nets::GatedConvDecoder mask_decoder_{nullptr};
  nets::ComponentEncoder component_encoder_{nullptr};
  nets::BroadcastDecoder component_decoder_{nullptr};
  nets::RecurrentCell prior_cell_{nullptr};
  nets::GaussianHead prior_head_{nullptr};
  nets::LatentHeadMLP component_prior_{nullptr};
  torch::Tensor prior_h0_;
  torch::Tensor prior_c0_;
};

/// Builds the model selected by config.variant (see baselines.hpp for VAEs).
std::shared_ptr<GenerativeModel> make_model(const ModelConfig& config);

}  // namespace genesis::model
