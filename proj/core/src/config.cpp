#include "genesis/config.hpp"

#include "genesis/errors.hpp"

namespace genesis {

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::genesis:
      return "genesis";
    case Variant::genesis_s:
      return "genesis_s";
    case Variant::bd_vae:
      return "bd_vae";
    case Variant::dc_vae:
      return "dc_vae";
  }
  return "genesis";
}

Variant variant_from_string(const std::string& name) {
  if (name == "genesis") return Variant::genesis;
  if (name == "genesis_s") return Variant::genesis_s;
  if (name == "bd_vae") return Variant::bd_vae;
  if (name == "dc_vae") return Variant::dc_vae;
  throw ConfigError("unknown model variant '" + name + "' (expected genesis, genesis_s, bd_vae or dc_vae)");
}

void ModelConfig::validate() const {
  const bool mixture = variant == Variant::genesis || variant == Variant::genesis_s;
  if (mixture && k < 2) throw ConfigError("model.k must be at least 2");
  if (!(sigma_x > 0.0)) throw ConfigError("model.sigma_x must be positive");
  if (height <= 0 || width <= 0 || height % 4 != 0 || width % 4 != 0) {
    throw ConfigError("image size must be positive and divisible by 4");
  }
  if (mask_latent < 1 || comp_latent < 1 || vae_latent < 1 || feature_dim < 1) {
    throw ConfigError("latent and feature sizes must be positive");
  }
  if (!(width_scale > 0.0)) throw ConfigError("model.width_scale must be positive");
  if (broadcast_filters < 1 || broadcast_layers < 1 || prior_hidden < 1 || mlp_hidden < 1) {
    throw ConfigError("layer widths must be positive");
  }
}

nlohmann::json ModelConfig::to_json() const {
  return {{"variant", to_string(variant)},
          {"k", k},
          {"mask_latent", mask_latent},
          {"comp_latent", comp_latent},
          {"vae_latent", vae_latent},
          {"sigma_x", sigma_x},
          {"height", height},
          {"width", width},
          {"feature_dim", feature_dim},
          {"width_scale", width_scale},
          {"broadcast_filters", broadcast_filters},
          {"broadcast_layers", broadcast_layers},
          {"prior_hidden", prior_hidden},
          {"mlp_hidden", mlp_hidden},
          {"log_mask_input", log_mask_input}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.k = j.at("k").get<int>();
    c.mask_latent = j.at("mask_latent").get<int>();
    c.comp_latent = j.at("comp_latent").get<int>();
    c.vae_latent = j.at("vae_latent").get<int>();
    c.sigma_x = j.at("sigma_x").get<double>();
    c.height = j.at("height").get<int>();
    c.width = j.at("width").get<int>();
    c.feature_dim = j.at("feature_dim").get<int>();
    c.width_scale = j.at("width_scale").get<double>();
    c.broadcast_filters = j.at("broadcast_filters").get<int>();
    c.broadcast_layers = j.at("broadcast_layers").get<int>();
    c.prior_hidden = j.at("prior_hidden").get<int>();
    c.mlp_hidden = j.at("mlp_hidden").get<int>();
    c.log_mask_input = j.at("log_mask_input").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace genesis
