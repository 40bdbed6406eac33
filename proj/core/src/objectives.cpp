#include "ifqa/objectives.hpp"

#include "ifqa/errors.hpp"

namespace ifqa {

void LossWeights::validate() const {
  if (!(lambda_pix >= 0 && lambda_vgg_style >= 0)) throw ConfigError("loss weights must be >= 0");
}

torch::Tensor adv_g_loss(const torch::Tensor& d_map) {
  if (!d_map.defined() || d_map.numel() == 0) throw ParameterError("adversarial loss needs a non-empty batch");
  return (d_map - 1).pow(2).mean();
}

torch::Tensor pixel_loss(const torch::Tensor& rf, const torch::Tensor& hq, PixelNorm norm) {
  if (rf.sizes() != hq.sizes()) throw ShapeError("pixel loss operands differ in shape");
  if (rf.numel() == 0) throw ParameterError("pixel loss needs a non-empty batch");
  const torch::Tensor diff = rf - hq;
  if (norm == PixelNorm::MeanSquared) return diff.pow(2).mean();
  // sqrt is not differentiable at 0; the epsilon keeps rf == hq finite.
  return (diff.pow(2).flatten(1).sum(1) + 1e-12).sqrt().mean();
}

torch::Tensor perceptual_loss(const torch::Tensor& rf, const torch::Tensor& hq, const FeatureFn& features) {
  if (rf.sizes() != hq.sizes()) throw ShapeError("perceptual loss operands differ in shape");
  const auto fa = features(rf);
  const auto fb = features(hq);
  if (fa.empty() || fa.size() != fb.size()) throw ParameterError("feature extractor returned no stages");
  torch::Tensor total = torch::zeros({}, rf.options());
  for (std::size_t i = 0; i < fa.size(); ++i) total = total + (fa[i] - fb[i]).abs().mean();
  return total;
}

torch::Tensor perceptual_loss(const torch::Tensor& rf, const torch::Tensor& hq, FeatureExtractor& feat) {
  return perceptual_loss(rf, hq, [&](const torch::Tensor& x) { return feat->forward(x); });
}

torch::Tensor adv_d_loss(const torch::Tensor& d_real, const torch::Tensor& real_target, const torch::Tensor& d_fake) {
  if (d_real.numel() == 0 || d_fake.numel() == 0) throw ParameterError("discriminator loss needs non-empty pools");
  if (d_real.sizes() != real_target.sizes()) throw ShapeError("real target shape differs from discriminator output");
  {
    torch::NoGradGuard no_grad;
    if (!((real_target == 0) | (real_target == 1)).all().item<bool>()) {
      throw ParameterError("real target must be binary");
    }
  }
  return (d_real - real_target).pow(2).mean() + d_fake.pow(2).mean();
}

torch::Tensor total_g_loss(const torch::Tensor& adv, const torch::Tensor& pix, const torch::Tensor& perc,
                           const LossWeights& w) {
  return adv + w.lambda_pix * pix + w.lambda_vgg_style * perc;
}

double total_g_loss(double adv, double pix, double perc, const LossWeights& w) {
  return adv + w.lambda_pix * pix + w.lambda_vgg_style * perc;
}

torch::Tensor ifqa_realness_loss(const torch::Tensor& images, Discriminator& discriminator) {
  if (discriminator->head() != DiscriminatorHead::PerPixel) {
    throw UnsupportedHeadError("realness loss requires a per-pixel discriminator");
  }
  return adv_g_loss(discriminator->forward(images));
}

}  // namespace ifqa
