#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace genesis {

enum class Variant { genesis, genesis_s, bd_vae, dc_vae };

std::string to_string(Variant variant);
Variant variant_from_string(const std::string& name);

/// Architecture and likelihood settings shared by every model variant.
///
/// Defaults reproduce the published GENESIS configuration for 64×64
/// Multi-dSprites. `width_scale` multiplies every convolutional filter count
/// and exists for reduced-cost runs; 1.0 is the reference architecture.
struct ModelConfig {
  Variant variant = Variant::genesis;
  int k = 5;                  // max components (5 Multi-dSprites, 7 GQN-like, 9 ShapeStacks-like)
  int mask_latent = 64;       // D_m; also the single latent size of GENESIS-S
  int comp_latent = 64;       // D_c
  int vae_latent = 64;        // BD-VAE / DC-VAE latent size
  double sigma_x = 0.7;
  int height = 64;
  int width = 64;
  int feature_dim = 256;      // gated encoder FC bottleneck
  double width_scale = 1.0;
  int broadcast_filters = 64; // doubled for BD-VAE
  int broadcast_layers = 4;
  int prior_hidden = 256;     // prior LSTM units
  int mlp_hidden = 256;       // p(z^c | z^m) MLP and component-encoder MLP
  bool log_mask_input = true; // component encoder sees log π_k instead of π_k

  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace genesis
