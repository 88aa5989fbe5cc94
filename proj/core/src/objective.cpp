#include "genesis/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "genesis/errors.hpp"

namespace genesis::objective {

torch::Tensor gaussian_kl(const torch::Tensor& mean_q, const torch::Tensor& std_q, const torch::Tensor& mean_p,
                          const torch::Tensor& std_p) {
  const auto var_ratio = (std_q / std_p).square();
  const auto mean_term = ((mean_q - mean_p) / std_p).square();
  return 0.5 * (var_ratio + mean_term - 1.0) - torch::log(std_q / std_p);
}

torch::Tensor kl_chain(const model::LatentChain& posterior, const model::LatentChain& prior, const std::string& name) {
  if (posterior.mean.sizes() != prior.mean.sizes() || posterior.std.sizes() != prior.std.sizes()) {
    throw ShapeError("KL of " + name + " chain: posterior and prior shapes differ");
  }
  const auto per_step = gaussian_kl(posterior.mean, posterior.std, prior.mean, prior.std).sum(-1);  // [K, B]
  const auto finite = torch::isfinite(per_step).all(1);
  if (!finite.all().item<bool>()) {
    const auto bad = (~finite).nonzero()[0][0].item<std::int64_t>();
    throw NumericalError("KL of " + name + " chain is not finite at step " + std::to_string(bad + 1));
  }
  return per_step.sum(0);
}

ElboTerms elbo_terms(const model::ForwardPass& pass) {
  ElboTerms terms;
  terms.recon_ll = pass.recon_ll;
  terms.kl_mask = torch::zeros_like(pass.recon_ll);
  terms.kl_component = torch::zeros_like(pass.recon_ll);
  for (const auto& chain : pass.chains) {
    const auto kl = kl_chain(chain.posterior, chain.prior, chain.name);
    if (chain.name == "mask") {
      terms.kl_mask = terms.kl_mask + kl;
    } else {
      terms.kl_component = terms.kl_component + kl;
    }
  }
  return terms;
}

ElboTerms elbo(model::GenerativeModel& model, const torch::Tensor& x, const model::ForwardNoise& noise) {
  return elbo_terms(model.forward_pass(x, noise));
}

torch::Tensor log_density_ratio(const model::ForwardPass& pass) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  auto total = torch::zeros_like(pass.recon_ll);
  auto log_normal = [&](const torch::Tensor& z, const torch::Tensor& mean, const torch::Tensor& std) {
    return (-0.5 * ((z - mean) / std).square() - torch::log(std) - half_log_2pi).sum({0, 2});
  };
  for (const auto& chain : pass.chains) {
    const auto& z = chain.posterior.sample;
    total = total + log_normal(z, chain.posterior.mean, chain.posterior.std) - log_normal(z, chain.prior.mean, chain.prior.std);
  }
  return total;
}

GecoState GecoState::for_image(int height, int width, int channels, double per_pixel_channel) {
  GecoState s;
  s.goal = per_pixel_channel * height * width * channels;
  return s;
}

nlohmann::json GecoState::to_json() const {
  return {{"beta", beta},           {"c_ema", c_ema},         {"initialized", initialized}, {"alpha", alpha},
          {"step_slow", step_slow}, {"step_fast", step_fast}, {"goal", goal}};
}

GecoState GecoState::from_json(const nlohmann::json& j) {
  GecoState s;
  try {
    s.beta = j.at("beta").get<double>();
    s.c_ema = j.at("c_ema").get<double>();
    s.initialized = j.at("initialized").get<bool>();
    s.alpha = j.at("alpha").get<double>();
    s.step_slow = j.at("step_slow").get<double>();
    s.step_fast = j.at("step_fast").get<double>();
    s.goal = j.at("goal").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("GECO state: ") + e.what());
  }
  if (!(s.beta > 0.0) || !(s.alpha > 0.0 && s.alpha < 1.0)) throw ConfigError("GECO state: beta > 0 and alpha in (0,1)");
  return s;
}

torch::Tensor geco_loss(const ElboTerms& terms, const GecoState& state) {
  return (terms.kl_total() + state.beta * (-state.goal - terms.recon_ll)).mean();
}

double geco_residual(const GecoState& state, double recon_ll) { return -state.goal - recon_ll; }

GecoState geco_update(const GecoState& state, double recon_ll) {
  if (!std::isfinite(recon_ll)) throw NumericalError("GECO update received a non-finite reconstruction term");
  GecoState next = state;
  const double r = geco_residual(state, recon_ll);
  next.c_ema = state.initialized ? state.alpha * state.c_ema + (1.0 - state.alpha) * r : r;
  next.initialized = true;
  const double step = next.c_ema > 0.0 ? state.step_slow : state.step_fast;
  next.beta = std::clamp(state.beta * std::exp(step * next.c_ema), kBetaMin, kBetaMax);
  return next;
}

}  // namespace genesis::objective
