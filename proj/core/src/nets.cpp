#include "genesis/nets.hpp"

#include <array>
#include <cmath>
#include <sstream>

#include "genesis/errors.hpp"

namespace genesis::nets {
namespace F = torch::nn::functional;

namespace {

constexpr std::array<int, 5> kEncoderFilters{32, 32, 64, 64, 64};
constexpr std::array<int, 5> kDecoderFilters{64, 32, 32, 32, 32};
constexpr std::array<int, 5> kStrides{1, 2, 1, 2, 1};
constexpr std::array<int, 4> kComponentFilters{32, 32, 64, 64};

// Momentum 0.9 on the running statistics (torch counts the new-sample weight).
constexpr double kBatchNormMomentum = 0.1;

std::string shape_string(const torch::Tensor& t) {
  std::ostringstream ss;
  ss << t.sizes();
  return ss.str();
}

int conv_out(int size) { return (size + 2 - 3) / 2 + 1; }

}  // namespace

Gaussian gaussian_from_raw(const torch::Tensor& raw) {
  const auto parts = raw.chunk(2, -1);
  return {parts[0], F::softplus(parts[1]) + kStdFloor};
}

int scaled_filters(int base, double scale) {
  return std::max(1, static_cast<int>(std::lround(base * scale)));
}

GatedConvImpl::GatedConvImpl(int in_channels, int out_channels, int stride, bool transposed) {
  if (transposed && stride > 1) {
    deconv_ = register_module("deconv", torch::nn::ConvTranspose2d(
                                            torch::nn::ConvTranspose2dOptions(in_channels, 2 * out_channels, 5)
                                                .stride(stride)
                                                .padding(2)
                                                .output_padding(stride - 1)));
  } else {
    conv_ = register_module(
        "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, 2 * out_channels, 5).stride(stride).padding(2)));
  }
  bn_ = register_module("bn", torch::nn::BatchNorm2d(
                                  torch::nn::BatchNorm2dOptions(2 * out_channels).momentum(kBatchNormMomentum)));
}

torch::Tensor GatedConvImpl::forward(const torch::Tensor& x) {
  const auto pre = conv_ ? conv_->forward(x) : deconv_->forward(x);
  return F::glu(bn_->forward(pre), F::GLUFuncOptions(1));
}

GatedConvEncoderImpl::GatedConvEncoderImpl(int in_channels, int height, int width, int feature_dim,
                                           double width_scale)
    : in_channels_(in_channels), height_(height), width_(width), feature_dim_(feature_dim) {
  if (height % 4 != 0 || width % 4 != 0) throw ShapeError("gated encoder needs H and W divisible by 4");
  int channels = in_channels;
  for (std::size_t i = 0; i < kEncoderFilters.size(); ++i) {
    const int filters = scaled_filters(kEncoderFilters[i], width_scale);
    stages_.push_back(register_module("stage" + std::to_string(i), GatedConv(channels, filters, kStrides[i], false)));
    channels = filters;
  }
  last_filters_ = channels;
  fc_ = register_module("fc", torch::nn::Linear(channels * (height / 4) * (width / 4), 2 * feature_dim));
}

void GatedConvEncoderImpl::check_input(const torch::Tensor& x) const {
  if (x.dim() != 4 || x.size(1) != in_channels_ || x.size(2) != height_ || x.size(3) != width_) {
    throw ShapeError("gated encoder expects [B, " + std::to_string(in_channels_) + ", " + std::to_string(height_) +
                     ", " + std::to_string(width_) + "], got " + shape_string(x));
  }
}

std::vector<torch::Tensor> GatedConvEncoderImpl::forward_stages(const torch::Tensor& x) {
  check_input(x);
  std::vector<torch::Tensor> outputs;
  auto h = x;
  for (auto& stage : stages_) {
    h = stage->forward(h);
    outputs.push_back(h);
  }
  return outputs;
}

torch::Tensor GatedConvEncoderImpl::forward(const torch::Tensor& x) {
  const auto h = forward_stages(x).back();
  return F::glu(fc_->forward(h.flatten(1)), F::GLUFuncOptions(1));
}

GatedConvDecoderImpl::GatedConvDecoderImpl(int latent_dim, int out_channels, int height, int width,
                                           double width_scale)
    : latent_dim_(latent_dim), height_(height), width_(width) {
  if (height % 4 != 0 || width % 4 != 0) throw ShapeError("gated decoder needs H and W divisible by 4");
  first_filters_ = scaled_filters(kDecoderFilters[0], width_scale);
  fc_ = register_module("fc", torch::nn::Linear(latent_dim, 2 * first_filters_ * (height / 4) * (width / 4)));
  int channels = first_filters_;
  for (std::size_t i = 0; i < kDecoderFilters.size(); ++i) {
    const int filters = scaled_filters(kDecoderFilters[i], width_scale);
    stages_.push_back(register_module("stage" + std::to_string(i), GatedConv(channels, filters, kStrides[i], true)));
    channels = filters;
  }
  out_ = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, out_channels, 1)));
}

torch::Tensor GatedConvDecoderImpl::forward(const torch::Tensor& z) {
  if (z.dim() != 2 || z.size(1) != latent_dim_) {
    throw ShapeError("gated decoder expects [N, " + std::to_string(latent_dim_) + "], got " + shape_string(z));
  }
  auto h = F::glu(fc_->forward(z), F::GLUFuncOptions(1)).view({z.size(0), first_filters_, height_ / 4, width_ / 4});
  for (auto& stage : stages_) h = stage->forward(h);
  return out_->forward(h);
}

BroadcastDecoderImpl::BroadcastDecoderImpl(int latent_dim, int out_channels, int filters, int layers, int height,
                                           int width)
    : latent_dim_(latent_dim), height_(height), width_(width) {
  int channels = latent_dim + 2;
  for (int i = 0; i < layers; ++i) {
    convs_.push_back(register_module("conv" + std::to_string(i),
                                     torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, filters, 3).padding(1))));
    channels = filters;
  }
  out_ = register_module("out", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, out_channels, 1)));
}

torch::Tensor BroadcastDecoderImpl::coordinates(const torch::TensorOptions& options) const {
  auto axis = [&](int n) {
    return n == 1 ? torch::zeros({1}, options) : torch::linspace(-1.0, 1.0, n, options);
  };
  const auto ys = axis(height_).view({height_, 1}).expand({height_, width_});
  const auto xs = axis(width_).view({1, width_}).expand({height_, width_});
  return torch::stack({xs, ys});
}

torch::Tensor BroadcastDecoderImpl::forward(const torch::Tensor& z) {
  if (z.dim() != 2 || z.size(1) != latent_dim_) {
    throw ShapeError("broadcast decoder expects [N, " + std::to_string(latent_dim_) + "], got " + shape_string(z));
  }
  const auto n = z.size(0);
  const auto tiled = z.view({n, latent_dim_, 1, 1}).expand({n, latent_dim_, height_, width_});
  const auto coords = coordinates(z.options()).unsqueeze(0).expand({n, 2, height_, width_});
  auto h = torch::cat({tiled, coords}, 1);
  for (auto& conv : convs_) h = F::elu(conv->forward(h));
  return out_->forward(h);
}

ComponentEncoderImpl::ComponentEncoderImpl(int in_channels, int height, int width, int latent_dim, int hidden,
                                           double width_scale)
    : in_channels_(in_channels), height_(height), width_(width) {
  int channels = in_channels;
  int h = height;
  int w = width;
  for (std::size_t i = 0; i < kComponentFilters.size(); ++i) {
    const int filters = scaled_filters(kComponentFilters[i], width_scale);
    convs_.push_back(register_module(
        "conv" + std::to_string(i),
        torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, filters, 3).stride(2).padding(1))));
    channels = filters;
    h = conv_out(h);
    w = conv_out(w);
  }
  hidden_ = register_module("hidden", torch::nn::Linear(channels * h * w, hidden));
  head_ = register_module("head", torch::nn::Linear(hidden, 2 * latent_dim));
}

Gaussian ComponentEncoderImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != in_channels_ || x.size(2) != height_ || x.size(3) != width_) {
    throw ShapeError("component encoder expects [N, " + std::to_string(in_channels_) + ", " +
                     std::to_string(height_) + ", " + std::to_string(width_) + "], got " + shape_string(x));
  }
  auto h = x;
  for (auto& conv : convs_) h = F::elu(conv->forward(h));
  return gaussian_from_raw(head_->forward(F::elu(hidden_->forward(h.flatten(1)))));
}

RecurrentCellImpl::RecurrentCellImpl(int input_size, int hidden_size)
    : input_size_(input_size), hidden_size_(hidden_size) {
  lstm_ = register_module("lstm", torch::nn::LSTMCell(torch::nn::LSTMCellOptions(input_size, hidden_size)));
}

std::pair<torch::Tensor, CellState> RecurrentCellImpl::step(const torch::Tensor& input, const CellState& state) {
  if (input.dim() != 2 || input.size(1) != input_size_) {
    throw ShapeError("recurrent cell expects [B, " + std::to_string(input_size_) + "], got " + shape_string(input));
  }
  auto [h, c] = lstm_->forward(input, std::make_tuple(state.h, state.c));
  return {h, CellState{h, c}};
}

CellState RecurrentCellImpl::zero_state(std::int64_t batch, const torch::TensorOptions& options) const {
  return {torch::zeros({batch, hidden_size_}, options), torch::zeros({batch, hidden_size_}, options)};
}

GaussianHeadImpl::GaussianHeadImpl(int in_features, int latent_dim) {
  linear_ = register_module("linear", torch::nn::Linear(in_features, 2 * latent_dim));
}

Gaussian GaussianHeadImpl::forward(const torch::Tensor& features) {
  return gaussian_from_raw(linear_->forward(features));
}

LatentHeadMLPImpl::LatentHeadMLPImpl(int in_features, int hidden, int latent_dim) {
  fc1_ = register_module("fc1", torch::nn::Linear(in_features, hidden));
  fc2_ = register_module("fc2", torch::nn::Linear(hidden, hidden));
  head_ = register_module("head", GaussianHead(hidden, latent_dim));
}

Gaussian LatentHeadMLPImpl::forward(const torch::Tensor& features) {
  return head_->forward(F::elu(fc2_->forward(F::elu(fc1_->forward(features)))));
}

}  // namespace genesis::nets
