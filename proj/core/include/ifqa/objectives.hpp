#pragma once

#include <functional>
#include <vector>

#include <torch/torch.h>

#include "ifqa/networks.hpp"

namespace ifqa {

/// Scaling of the pixel and perceptual terms in the generator objective.
struct LossWeights {
  double lambda_pix = 50.0;
  double lambda_vgg_style = 5.0;

  void validate() const;
};

/// How the pixel term reads ||RF - HQ||_2.
enum class PixelNorm {
  /// Mean squared error per element (default).
  MeanSquared,
  /// Per-image Euclidean norm, averaged over the batch.
  Euclidean,
};

/// Least-squares generator term: mean of (d - 1)^2 over batch and pixels.
torch::Tensor adv_g_loss(const torch::Tensor& d_map);

torch::Tensor pixel_loss(const torch::Tensor& rf, const torch::Tensor& hq, PixelNorm norm = PixelNorm::MeanSquared);

using FeatureFn = std::function<std::vector<torch::Tensor>(const torch::Tensor&)>;

/// Sum over stages of the mean absolute feature difference.
torch::Tensor perceptual_loss(const torch::Tensor& rf, const torch::Tensor& hq, const FeatureFn& features);
torch::Tensor perceptual_loss(const torch::Tensor& rf, const torch::Tensor& hq, FeatureExtractor& feat);

/// mean((d_real - real_target)^2) + mean(d_fake^2). `real_target` must be
/// binary and shaped like `d_real`; the real pool may mix pure HQ images with
/// region-swapped images carrying partial targets.
torch::Tensor adv_d_loss(const torch::Tensor& d_real, const torch::Tensor& real_target, const torch::Tensor& d_fake);

/// adv + lambda_pix * pix + lambda_vgg_style * perc.
torch::Tensor total_g_loss(const torch::Tensor& adv, const torch::Tensor& pix, const torch::Tensor& perc,
                           const LossWeights& w = {});
double total_g_loss(double adv, double pix, double perc, const LossWeights& w = {});

/// Generator-side realness under a trained per-pixel discriminator, for use
/// as a training objective in other restoration pipelines. Gradients flow to
/// `images`; the discriminator is only read.
torch::Tensor ifqa_realness_loss(const torch::Tensor& images, Discriminator& discriminator);

}  // namespace ifqa
