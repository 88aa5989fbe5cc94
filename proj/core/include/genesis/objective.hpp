#pragma once

#include <torch/torch.h>

#include <nlohmann/json.hpp>

#include "genesis/model.hpp"

namespace genesis::objective {

/// Closed-form KL(N(mq, sq²) ‖ N(mp, sp²)), elementwise.
torch::Tensor gaussian_kl(const torch::Tensor& mean_q, const torch::Tensor& std_q, const torch::Tensor& mean_p,
                          const torch::Tensor& std_p);

/// Σ_k Σ_d KL(q_k ‖ p_k) per batch row → [B]. The prior chain must be
/// evaluated along the posterior samples. Throws NumericalError naming the
/// chain and step when a term is not finite.
torch::Tensor kl_chain(const model::LatentChain& posterior, const model::LatentChain& prior,
                       const std::string& name = "latent");

/// Per-image ELBO terms, each [B].
struct ElboTerms {
  torch::Tensor recon_ll;
  torch::Tensor kl_mask;
  torch::Tensor kl_component;

  torch::Tensor kl_total() const { return kl_mask + kl_component; }
  torch::Tensor elbo() const { return recon_ll - kl_total(); }
};

/// Splits the pass's KL over its "mask" and "component" chains.
ElboTerms elbo_terms(const model::ForwardPass& pass);
ElboTerms elbo(model::GenerativeModel& model, const torch::Tensor& x, const model::ForwardNoise& noise);

/// log q(z|x) − log p(z) summed along every chain's sample, per image [B];
/// with recon_ll this yields an importance weight log p(x,z) − log q(z|x).
torch::Tensor log_density_ratio(const model::ForwardPass& pass);

inline constexpr double kGoalPerPixelChannel = 0.5655;

/// Lagrange-multiplier state for minimizing KL subject to
/// E[−log p(x|z)] ≤ goal. `goal` is the reconstruction-error target in
/// negative log-likelihood units (the constraint bound on recon_ll is −goal).
struct GecoState {
  double beta = 1.0;
  double c_ema = 0.0;
  bool initialized = false;  // c_ema holds a value once the first residual arrives
  double alpha = 0.99;
  double step_slow = 1e-5;   // while the constraint is violated
  double step_fast = 1e-4;   // while it is satisfied
  double goal = 0.0;

  static GecoState for_image(int height, int width, int channels, double per_pixel_channel = kGoalPerPixelChannel);

  nlohmann::json to_json() const;
  static GecoState from_json(const nlohmann::json& j);
  bool operator==(const GecoState&) const = default;
};

inline constexpr double kBetaMin = 1e-10;
inline constexpr double kBetaMax = 1e10;

/// Batch mean of kl_total + β·(−goal − recon_ll); β enters as a constant.
torch::Tensor geco_loss(const ElboTerms& terms, const GecoState& state);

/// Constraint residual r = (−goal) − recon_ll: positive while violated.
double geco_residual(const GecoState& state, double recon_ll);

/// c_ema ← α·c_ema + (1−α)·r (initialised to the first r), then
/// β ← clamp(β·exp(step·c_ema)), step = step_slow if c_ema > 0 else step_fast.
GecoState geco_update(const GecoState& state, double recon_ll);

}  // namespace genesis::objective
