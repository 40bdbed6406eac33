#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ifqa/facedata.hpp"
#include "ifqa/random.hpp"

namespace ifqa {

enum class KernelKind { Identity, Gaussian, Motion };

/// Square, odd-sized, non-negative blur kernel normalized to unit sum.
struct Kernel {
  KernelKind kind = KernelKind::Identity;
  int size = 1;
  std::vector<double> weights{1.0};  // row-major size*size
  // Construction parameters, recorded for manifests.
  double sigma = 0;
  int length = 0;
  double angle_deg = 0;

  double at(int row, int col) const { return weights[static_cast<std::size_t>(row) * size + col]; }
  double sum() const;
  Kernel transposed() const;
};

Kernel identity_kernel();
Kernel gaussian_kernel(int size, double sigma);
Kernel motion_kernel(int length, double angle_deg);

/// Sampling ranges; every upper bound is exclusive.
struct DegradationRanges {
  double r_min = 0.4, r_max = 0.9;
  double sigma_min = 50, sigma_max = 250;
  int q_min = 5, q_max = 50;
  bool jpeg = true;
  double blur_sigma_min = 0.2, blur_sigma_max = 3.0;
  int motion_length_min = 3, motion_length_max = 16;

  void validate() const;
};

struct DegradationParams {
  Kernel kernel;
  double scale_r = 1.0;
  double noise_sigma = 0.0;
  std::optional<int> jpeg_q;
  std::uint64_t seed = 0;

  void validate() const;
  /// One-line JSON record (kernel descriptor, not weights).
  std::string to_json() const;
};

/// Draws kernel type ~ Bernoulli(0.5), then r, sigma and q uniformly from
/// their ranges, then a fresh noise seed.
DegradationParams sample_params(Rng& rng, const DegradationRanges& ranges = {});

/// blur (reflect-101 padding) -> bicubic down to round(r*H) x round(r*W)
/// -> additive Gaussian noise on the 0..255 scale, clipped -> JPEG at q ->
/// bicubic back to H x W. Stages whose parameters are degenerate are skipped
/// exactly, so identity parameters reproduce the input bit for bit.
ImageBuffer degrade(const ImageBuffer& img, const DegradationParams& params);

/// Codec identification recorded in manifests.
std::string jpeg_codec_name();

}  // namespace ifqa
