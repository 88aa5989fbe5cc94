#pragma once

#include <torch/torch.h>

#include <utility>
#include <vector>

namespace genesis::nets {

/// Lower bound added to every emitted standard deviation.
inline constexpr double kStdFloor = 1e-4;

/// Diagonal Gaussian parameters; both tensors share the shape [..., D].
struct Gaussian {
  torch::Tensor mean;
  torch::Tensor std;
};

/// Splits raw [..., 2D] head output into mean and std = softplus(raw) + floor.
Gaussian gaussian_from_raw(const torch::Tensor& raw);

/// max(1, round(base · scale)).
int scaled_filters(int base, double scale);

/// Convolution (or transposed convolution) → batch norm → GLU over channels.
class GatedConvImpl : public torch::nn::Module {
 public:
  GatedConvImpl(int in_channels, int out_channels, int stride, bool transposed);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Conv2d conv_{nullptr};
  torch::nn::ConvTranspose2d deconv_{nullptr};
  torch::nn::BatchNorm2d bn_{nullptr};
};
TORCH_MODULE(GatedConv);

/// Five gated 5×5 stages (strides 1,2,1,2,1; filters 32,32,64,64,64) and a
/// gated fully connected layer at quarter resolution.
class GatedConvEncoderImpl : public torch::nn::Module {
 public:
  GatedConvEncoderImpl(int in_channels, int height, int width, int feature_dim, double width_scale = 1.0);

  /// [B, C, H, W] → [B, feature_dim]. Throws ShapeError on geometry mismatch.
  torch::Tensor forward(const torch::Tensor& x);
  /// Output of every convolutional stage, in order.
  std::vector<torch::Tensor> forward_stages(const torch::Tensor& x);

  int in_channels() const { return in_channels_; }
  int feature_dim() const { return feature_dim_; }

 private:
  void check_input(const torch::Tensor& x) const;

  int in_channels_;
  int height_;
  int width_;
  int feature_dim_;
  int last_filters_;
  std::vector<GatedConv> stages_;
  torch::nn::Linear fc_{nullptr};
};
TORCH_MODULE(GatedConvEncoder);

/// Mirror of the encoder: gated FC to quarter resolution, then five gated 5×5
/// stages (strides 1,2,1,2,1; filters 64,32,32,32,32) and a 1×1 output layer.
class GatedConvDecoderImpl : public torch::nn::Module {
 public:
  GatedConvDecoderImpl(int latent_dim, int out_channels, int height, int width, double width_scale = 1.0);

  /// [N, latent] → [N, out_channels, H, W] logits.
  torch::Tensor forward(const torch::Tensor& z);

 private:
  int latent_dim_;
  int height_;
  int width_;
  int first_filters_;
  torch::nn::Linear fc_{nullptr};
  std::vector<GatedConv> stages_;
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(GatedConvDecoder);

/// Spatial broadcast decoder: the latent is tiled over the grid, two
/// coordinate channels spanning [-1,1] are appended, then `layers` 3×3
/// size-preserving convolutions with ELU and a 1×1 output convolution.
class BroadcastDecoderImpl : public torch::nn::Module {
 public:
  BroadcastDecoderImpl(int latent_dim, int out_channels, int filters, int layers, int height, int width);

  /// [N, latent] → [N, out_channels, H, W], unsquashed.
  torch::Tensor forward(const torch::Tensor& z);
  /// Coordinate channels [2, H, W] (x varies along width, y along height).
  torch::Tensor coordinates(const torch::TensorOptions& options) const;

 private:
  int latent_dim_;
  int height_;
  int width_;
  std::vector<torch::nn::Conv2d> convs_;
  torch::nn::Conv2d out_{nullptr};
};
TORCH_MODULE(BroadcastDecoder);

/// Component VAE encoder: four 3×3 stride-2 convolutions with ELU
/// (filters 32,32,64,64) and an MLP head emitting a diagonal Gaussian.
class ComponentEncoderImpl : public torch::nn::Module {
 public:
  ComponentEncoderImpl(int in_channels, int height, int width, int latent_dim, int hidden, double width_scale = 1.0);
  Gaussian forward(const torch::Tensor& x);

 private:
  int in_channels_;
  int height_;
  int width_;
  std::vector<torch::nn::Conv2d> convs_;
  torch::nn::Linear hidden_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ComponentEncoder);

struct CellState {
  torch::Tensor h;
  torch::Tensor c;
};

/// LSTM cell; the emitted output is the new hidden state h.
class RecurrentCellImpl : public torch::nn::Module {
 public:
  RecurrentCellImpl(int input_size, int hidden_size);

  std::pair<torch::Tensor, CellState> step(const torch::Tensor& input, const CellState& state);
  CellState zero_state(std::int64_t batch, const torch::TensorOptions& options) const;
  int hidden_size() const { return hidden_size_; }
  torch::nn::LSTMCell& lstm() { return lstm_; }

 private:
  int input_size_;
  int hidden_size_;
  torch::nn::LSTMCell lstm_{nullptr};
};
TORCH_MODULE(RecurrentCell);

/// Single linear layer emitting a diagonal Gaussian.
class GaussianHeadImpl : public torch::nn::Module {
 public:
  GaussianHeadImpl(int in_features, int latent_dim);
  Gaussian forward(const torch::Tensor& features);
  torch::nn::Linear& linear() { return linear_; }

 private:
  torch::nn::Linear linear_{nullptr};
};
TORCH_MODULE(GaussianHead);

/// Two ELU hidden layers followed by a Gaussian output layer.
class LatentHeadMLPImpl : public torch::nn::Module {
 public:
  LatentHeadMLPImpl(int in_features, int hidden, int latent_dim);
  Gaussian forward(const torch::Tensor& features);

 private:
  torch::nn::Linear fc1_{nullptr};
  torch::nn::Linear fc2_{nullptr};
  GaussianHead head_{nullptr};
};
TORCH_MODULE(LatentHeadMLP);

}  // namespace genesis::nets
