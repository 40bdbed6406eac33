#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "ifqa/facedata.hpp"

namespace ifqa {

enum class DiscriminatorHead { PerPixel, SingleOutput };
enum class NormKind { None, Instance };

const char* to_string(DiscriminatorHead h) noexcept;
const char* to_string(NormKind n) noexcept;

/// Architecture description shared by the three networks. Defaults are the
/// reference 256x256 configuration; `toy()` is the narrow 64x64 variant used
/// for desk-scale training.
struct NetConfig {
  int resolution = 256;
  /// Generator encoder width; channels double per down block.
  int base_width = 64;
  int depth_down = 5;
  int depth_up = 6;
  DiscriminatorHead discriminator_head = DiscriminatorHead::PerPixel;
  bool skip_connections = true;
  NormKind generator_norm = NormKind::Instance;

  /// Discriminator encoder ladder is {2,4,8,8} x disc_width.
  int disc_width = 64;
  /// 3x3 convolutions per discriminator encoder block (VGG-19 split gives 4).
  int disc_block_convs = 4;

  /// Feature pyramid ladder is {1,2,4,8,8} x feature_width.
  int feature_width = 64;
  /// Convolutions per feature stage; 0 selects the VGG-19 layout {2,2,4,4,4}.
  int feature_convs = 0;
  int feature_stages = 5;
  bool feature_max_pool = true;
  /// Optional pretrained weights archive for the feature extractor.
  std::string feature_weights;

  static NetConfig reference() { return {}; }
  static NetConfig toy();

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;

  std::string to_json() const;
  static NetConfig from_json(const std::string& text);
  bool operator==(const NetConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// Pre-activation residual block: [norm] lrelu conv3x3 [norm] lrelu conv3x3,
/// with a 1x1 projection shortcut when channel counts differ. `Down` average
/// pools both paths by 2; `Up` nearest-upsamples both paths by 2 first.
enum class Resample { None, Down, Up };

class ResBlockImpl : public torch::nn::Module {
 public:
  ResBlockImpl(int in_channels, int out_channels, Resample resample, NormKind norm, bool norm_input = true);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  Resample resample_;
  torch::nn::InstanceNorm2d norm1_{nullptr}, norm2_{nullptr};
  torch::nn::Conv2d conv1_{nullptr}, conv2_{nullptr}, shortcut_{nullptr};
};
TORCH_MODULE(ResBlock);

// ---------------------------------------------------------------------------
// Networks
// ---------------------------------------------------------------------------

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const NetConfig& cfg);
  /// N x 3 x H x W in [-1,1] -> N x 3 x H x W in [-1,1].
  torch::Tensor forward(const torch::Tensor& x);
  /// Encoder outputs, deepest last.
  std::vector<torch::Tensor> encode(const torch::Tensor& x);

  const NetConfig& config() const { return cfg_; }

 private:
  NetConfig cfg_;
  torch::nn::ModuleList encoder_, decoder_;
};
TORCH_MODULE(Generator);

class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const NetConfig& cfg);
  /// Per-pixel head: N x 1 x H x W in (0,1). Single-output head: N x 1.
  torch::Tensor forward(const torch::Tensor& x);
  /// Pre-sigmoid output.
  torch::Tensor logits(const torch::Tensor& x);

  DiscriminatorHead head() const { return cfg_.discriminator_head; }
  const NetConfig& config() const { return cfg_; }

  /// The final 3x3 convolution (per-pixel) or linear layer (single output).
  torch::nn::Module& output_layer();

 private:
  std::vector<torch::Tensor> encode(const torch::Tensor& x);

  NetConfig cfg_;
  torch::nn::ModuleList encoder_, decoder_;
  torch::nn::Linear scalar_head_{nullptr};
};
TORCH_MODULE(Discriminator);

class FeatureExtractorImpl : public torch::nn::Module {
 public:
  explicit FeatureExtractorImpl(const NetConfig& cfg);
  /// Feature map after each stage's pooling, shallowest first.
  std::vector<torch::Tensor> forward(const torch::Tensor& x);
  int stages() const { return static_cast<int>(stages_->size()); }

 private:
  torch::nn::ModuleList stages_;
  bool max_pool_;
  torch::Tensor mean_, std_;
};
TORCH_MODULE(FeatureExtractor);

/// Builders are deterministic in (cfg, seed): every parameter is drawn from a
/// private generator seeded with `seed`, never from the global torch RNG.
Generator build_generator(const NetConfig& cfg, std::uint64_t seed);
Discriminator build_discriminator(const NetConfig& cfg, std::uint64_t seed);
/// Loads `cfg.feature_weights` when set (LoadError on any key or shape
/// mismatch); otherwise uses seeded random weights. Always frozen, eval mode.
FeatureExtractor build_feature_extractor(const NetConfig& cfg, std::uint64_t seed);

/// Re-draws all parameters of `module` from a private generator.
void init_parameters(torch::nn::Module& module, std::uint64_t seed);

std::int64_t count_parameters(const torch::nn::Module& module);

/// Saves `module`'s parameters to a standalone archive usable as
/// `NetConfig::feature_weights`.
void save_module_weights(torch::nn::Module& module, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Raster <-> tensor
// ---------------------------------------------------------------------------

/// Stacks images into N x 3 x H x W float32 in [-1,1]; byte255 inputs are
/// converted on the way.
torch::Tensor images_to_tensor(std::span<const ImageBuffer> images);
torch::Tensor image_to_tensor(const ImageBuffer& image);
/// Inverse of images_to_tensor for one batch entry, clamped to [-1,1].
ImageBuffer tensor_to_image(const torch::Tensor& batch, std::int64_t index, ImageRole role);

/// N x 1 x H x W float32 with values 0/1.
torch::Tensor masks_to_tensor(std::span<const MaskMap> masks);
torch::Tensor mask_to_tensor(const MaskMap& mask);
torch::Tensor score_maps_to_tensor(std::span<const ScoreMap> maps);
ScoreMap tensor_to_score_map(const torch::Tensor& batch, std::int64_t index);

}  // namespace ifqa
