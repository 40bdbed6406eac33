#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "ifqa/facedata.hpp"
#include "ifqa/random.hpp"

namespace ifqa {

/// Which facial primary regions to swap. Must be non-empty.
struct SwapSpec {
  std::vector<Region> selected_regions;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Uniformly random non-empty subset of the four regions.
SwapSpec random_swap_spec(Rng& rng);

struct SupervisedPair {
  ImageBuffer image;
  ScoreMap target;
};

/// Union of the selected boxes, rasterized by pixel-center inclusion:
/// column j is inside [x0, x1) iff x0*W <= j + 0.5 < x1*W.
MaskMap region_mask(const RegionBoxSet& regions, const SwapSpec& spec, int height, int width);

/// Returns (M*hq + (1-M)*other, M*other + (1-M)*hq), both tagged Mixed.
std::pair<ImageBuffer, ImageBuffer> fprs_swap(const ImageBuffer& hq, const ImageBuffer& other,
                                              const MaskMap& mask);

/// Real (1) exactly where the pixel comes from the HQ image and lies on the
/// face. `hq_inside_mask` states which side of `mask_fprs` carries HQ content.
ScoreMap supervision_target(const MaskMap& mask_fprs, const MaskMap& face_mask, bool hq_inside_mask);

/// Targets for unmixed images: HQ -> face mask, LQ/RF -> zeros.
ScoreMap pure_target(ImageRole role, const MaskMap& face_mask);

/// Both Eq.-style mixed images of a swap together with their targets.
std::pair<SupervisedPair, SupervisedPair> make_fprs_pairs(const ImageBuffer& hq, const ImageBuffer& other,
                                                          const MaskMap& mask, const MaskMap& face_mask);

/// RoIAlign-style crop: out_size x out_size bilinear samples at bin centres
/// inside the box, no coordinate rounding, borders clamped.
struct Patch {
  int size = 0;
  std::vector<float> values;  // size*size*3, channel-interleaved
  float at(int y, int x, int c) const {
    return values[(static_cast<std::size_t>(y) * size + x) * 3 + c];
  }
};
Patch crop_region_roialign(const ImageBuffer& img, const RegionBox& box, int out_size);

/// Rectangular CutMix box with area ratio lambda (drawn ~U(0,1) when not
/// given) at a uniformly random position fully inside the frame.
MaskMap cutmix_mask(int height, int width, Rng& rng, std::optional<double> lambda = std::nullopt);

/// Mixed image M*other + (1-M)*hq and its patch mask M.
std::pair<ImageBuffer, MaskMap> cutmix_swap(const ImageBuffer& hq, const ImageBuffer& other, Rng& rng,
                                            std::optional<double> lambda = std::nullopt);

}  // namespace ifqa
