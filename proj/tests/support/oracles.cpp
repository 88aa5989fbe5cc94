#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>

namespace genesis::testing {

std::vector<double> stick_breaking_direct(const std::vector<double>& logits) {
  std::vector<double> pi;
  double used = 0.0;
  for (double l : logits) {
    const double s = 1.0 / (1.0 + std::exp(-l));
    double remaining = 1.0;
    for (double p : pi) remaining -= p;
    pi.push_back(remaining * s);
    used += pi.back();
  }
  pi.push_back(1.0 - used);
  return pi;
}

double mixture_ll_direct(const torch::Tensor& x, const torch::Tensor& pi, const torch::Tensor& mu, double sigma) {
  const auto xa = x.accessor<double, 3>();
  const auto pa = pi.accessor<double, 3>();
  const auto ma = mu.accessor<double, 4>();
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  double total = 0.0;
  for (int c = 0; c < x.size(0); ++c) {
    for (int i = 0; i < x.size(1); ++i) {
      for (int j = 0; j < x.size(2); ++j) {
        double density = 0.0;
        for (int k = 0; k < pi.size(0); ++k) {
          const double d = xa[c][i][j] - ma[k][c][i][j];
          density += pa[k][i][j] * norm * std::exp(-d * d / (2.0 * sigma * sigma));
        }
        total += std::log(density);
      }
    }
  }
  return total;
}

double kl_quadrature(double mq, double sq, double mp, double sp) {
  const double lo = mq - 14.0 * sq;
  const double hi = mq + 14.0 * sq;
  const int n = 40000;
  const double h = (hi - lo) / n;
  auto f = [&](double z) {
    const double lq = -0.5 * std::pow((z - mq) / sq, 2) - std::log(sq) - 0.5 * std::log(2.0 * std::numbers::pi);
    const double lp = -0.5 * std::pow((z - mp) / sp, 2) - std::log(sp) - 0.5 * std::log(2.0 * std::numbers::pi);
    return std::exp(lq) * (lq - lp);
  };
  double sum = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * f(lo + i * h);
  return sum * h / 3.0;
}

double ari_pair_counting(const std::vector<int>& a, const std::vector<int>& b) {
  double ss = 0, sd = 0, ds = 0, dd = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j];
      const bool sb = b[i] == b[j];
      if (sa && sb) ++ss;
      else if (sa) ++sd;
      else if (sb) ++ds;
      else ++dd;
    }
  }
  const double denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
  if (denom == 0.0) return 1.0;
  return 2.0 * (ss * dd - sd * ds) / denom;
}

namespace {

std::set<int> pixels(const Mask& m) {
  std::set<int> s;
  for (std::size_t p = 0; p < m.bits.size(); ++p) {
    if (m.bits[p]) s.insert(static_cast<int>(p));
  }
  return s;
}

double set_iou(const std::set<int>& a, const std::set<int>& b) {
  std::vector<int> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(uni));
  return uni.empty() ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

}  // namespace

double sc_bruteforce(const std::vector<Mask>& gt, const std::vector<Mask>& pred) {
  double num = 0.0, den = 0.0;
  for (const auto& r : gt) {
    const auto rs = pixels(r);
    if (rs.empty()) continue;
    double best = 0.0;
    for (const auto& p : pred) best = std::max(best, set_iou(rs, pixels(p)));
    num += static_cast<double>(rs.size()) * best;
    den += static_cast<double>(rs.size());
  }
  return num / den;
}

double msc_bruteforce(const std::vector<Mask>& gt, const std::vector<Mask>& pred) {
  double num = 0.0;
  int count = 0;
  for (const auto& r : gt) {
    const auto rs = pixels(r);
    if (rs.empty()) continue;
    double best = 0.0;
    for (const auto& p : pred) best = std::max(best, set_iou(rs, pixels(p)));
    num += best;
    ++count;
  }
  return num / count;
}

GradCheck gradcheck(const std::function<torch::Tensor()>& loss, const std::vector<torch::Tensor>& params,
                    double step, std::int64_t max_per_tensor, std::uint64_t seed) {
  for (auto p : params) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
  loss().backward();
  std::vector<torch::Tensor> grads;
  for (const auto& p : params) grads.push_back(p.grad().defined() ? p.grad().clone() : torch::zeros_like(p));

  std::mt19937_64 rng(seed);
  GradCheck result;
  torch::NoGradGuard no_grad;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto flat = params[t].view({-1});
    const auto n = flat.numel();
    std::vector<std::int64_t> coords;
    if (n <= max_per_tensor) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      std::uniform_int_distribution<std::int64_t> pick(0, n - 1);
      for (std::int64_t i = 0; i < max_per_tensor; ++i) coords.push_back(pick(rng));
    }
    const auto g = grads[t].view({-1});
    for (auto i : coords) {
      const double original = flat[i].item<double>();
      flat[i].fill_(original + step);
      const double up = loss().item<double>();
      flat[i].fill_(original - step);
      const double down = loss().item<double>();
      flat[i].fill_(original);
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = g[i].item<double>();
      const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-5});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(numeric - analytic) / scale);
      ++result.checked;
    }
  }
  return result;
}

ModelConfig tiny_config(Variant variant, int size, int k, int latent) {
  ModelConfig c;
  c.variant = variant;
  c.k = variant == Variant::genesis || variant == Variant::genesis_s ? k : 1;
  c.mask_latent = latent;
  c.comp_latent = latent;
  c.vae_latent = latent;
  c.height = size;
  c.width = size;
  c.feature_dim = 6;
  c.width_scale = 0.125;
  c.broadcast_filters = 4;
  c.broadcast_layers = 2;
  c.prior_hidden = 6;
  c.mlp_hidden = 6;
  return c;
}

}  // namespace genesis::testing
