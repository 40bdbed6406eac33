#include "ifqa/fprs.hpp"

#include <algorithm>
#include <cmath>

#include "ifqa/errors.hpp"

namespace ifqa {

void SwapSpec::validate() const {
  if (selected_regions.empty()) throw ParameterError("swap selection must be non-empty");
}

SwapSpec random_swap_spec(Rng& rng) {
  // Subsets 1..15 of the four-bit region set, uniformly.
  const auto bits = static_cast<unsigned>(uniform_int(rng, 1, 16));
  SwapSpec spec;
  for (Region r : kAllRegions) {
    if (bits & (1u << static_cast<int>(r))) spec.selected_regions.push_back(r);
  }
  spec.seed = rng();
  return spec;
}

MaskMap region_mask(const RegionBoxSet& regions, const SwapSpec& spec, int height, int width) {
  spec.validate();
  if (height <= 0 || width <= 0) throw ShapeError("mask shape must be positive");
  std::vector<std::uint8_t> m(static_cast<std::size_t>(height) * width, 0);
  for (Region r : spec.selected_regions) {
    const RegionBox& b = regions[r];
    const double x0 = b.x0 * width, x1 = b.x1 * width, y0 = b.y0 * height, y1 = b.y1 * height;
    for (int y = 0; y < height; ++y) {
      const double cy = y + 0.5;
      if (cy < y0 || cy >= y1) continue;
      for (int x = 0; x < width; ++x) {
        const double cx = x + 0.5;
        if (cx >= x0 && cx < x1) m[static_cast<std::size_t>(y) * width + x] = 1;
      }
    }
  }
  return MaskMap(height, width, std::move(m));
}

namespace {

void require_same_shape(const ImageBuffer& a, const ImageBuffer& b, const MaskMap& m) {
  if (a.height() != b.height() || a.width() != b.width() || a.height() != m.height() || a.width() != m.width()) {
    throw ShapeError("images and mask must share one spatial shape");
  }
  if (a.domain() != b.domain()) throw DomainError("images to mix must share a value domain");
}

void require_same_shape(const MaskMap& a, const MaskMap& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ShapeError("masks must share one spatial shape");
}

// M*inside + (1-M)*outside.
ImageBuffer select(const MaskMap& m, const ImageBuffer& inside, const ImageBuffer& outside) {
  std::vector<float> out(inside.size());
  auto a = inside.values(), b = outside.values();
  auto mv = m.values();
  for (std::size_t p = 0; p < mv.size(); ++p) {
    for (std::size_t c = 0; c < 3; ++c) out[p * 3 + c] = mv[p] ? a[p * 3 + c] : b[p * 3 + c];
  }
  return ImageBuffer(inside.height(), inside.width(), inside.domain(), ImageRole::Mixed, std::move(out));
}

}  // namespace

std::pair<ImageBuffer, ImageBuffer> fprs_swap(const ImageBuffer& hq, const ImageBuffer& other, const MaskMap& mask) {
  require_same_shape(hq, other, mask);
  return {select(mask, hq, other), select(mask, other, hq)};
}

ScoreMap supervision_target(const MaskMap& mask_fprs, const MaskMap& face_mask, bool hq_inside_mask) {
  require_same_shape(mask_fprs, face_mask);
  std::vector<float> t(face_mask.values().size());
  auto m = mask_fprs.values();
  auto f = face_mask.values();
  for (std::size_t i = 0; i < t.size(); ++i) {
    const bool from_hq = hq_inside_mask ? m[i] == 1 : m[i] == 0;
    t[i] = (from_hq && f[i] == 1) ? 1.f : 0.f;
  }
  return ScoreMap(face_mask.height(), face_mask.width(), std::move(t));
}

ScoreMap pure_target(ImageRole role, const MaskMap& face_mask) {
  switch (role) {
    case ImageRole::HQ: return ScoreMap::from_mask(face_mask);
    case ImageRole::LQ:
    case ImageRole::RF: return ScoreMap::filled(face_mask.height(), face_mask.width(), 0.f);
    case ImageRole::Mixed: break;
  }
  throw ParameterError("mixed images need an explicit swap mask for their target");
}

std::pair<SupervisedPair, SupervisedPair> make_fprs_pairs(const ImageBuffer& hq, const ImageBuffer& other,
                                                          const MaskMap& mask, const MaskMap& face_mask) {
  auto [hq_in, other_in] = fprs_swap(hq, other, mask);
  return {SupervisedPair{std::move(hq_in), supervision_target(mask, face_mask, true)},
          SupervisedPair{std::move(other_in), supervision_target(mask, face_mask, false)}};
}

Patch crop_region_roialign(const ImageBuffer& img, const RegionBox& box, int out_size) {
  if (out_size < 1) throw ParameterError("patch size must be >= 1");
  if (!(box.x1 > box.x0 && box.y1 > box.y0)) throw ParameterError("crop box has zero area");
  if (!(box.x0 >= 0 && box.y0 >= 0 && box.x1 <= 1 && box.y1 <= 1)) throw ParameterError("crop box must lie inside [0,1]^2");
  const int h = img.height(), w = img.width();
  // Continuous pixel coordinates with pixel k's centre at k.
  const double bx0 = box.x0 * w - 0.5, by0 = box.y0 * h - 0.5;
  const double bin_w = (box.x1 - box.x0) * w / out_size, bin_h = (box.y1 - box.y0) * h / out_size;

  Patch p;
  p.size = out_size;
  p.values.resize(static_cast<std::size_t>(out_size) * out_size * 3);
  for (int v = 0; v < out_size; ++v) {
    const double y = std::clamp(by0 + (v + 0.5) * bin_h, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = y - y0;
    for (int u = 0; u < out_size; ++u) {
      const double x = std::clamp(bx0 + (u + 0.5) * bin_w, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = x - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = (1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c);
        const double bot = (1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c);
        p.values[(static_cast<std::size_t>(v) * out_size + u) * 3 + c] = static_cast<float>((1 - fy) * top + fy * bot);
      }
    }
  }
  return p;
}

MaskMap cutmix_mask(int height, int width, Rng& rng, std::optional<double> lambda) {
  const double lam = lambda ? std::clamp(*lambda, 0.0, 1.0) : uniform01(rng);
  const double side = std::sqrt(lam);
  const int bh = static_cast<int>(std::lround(side * height));
  const int bw = static_cast<int>(std::lround(side * width));
  const int y0 = static_cast<int>(uniform_int(rng, 0, height - bh + 1));
  const int x0 = static_cast<int>(uniform_int(rng, 0, width - bw + 1));
  std::vector<std::uint8_t> m(static_cast<std::size_t>(height) * width, 0);
  for (int y = y0; y < y0 + bh; ++y)
    for (int x = x0; x < x0 + bw; ++x) m[static_cast<std::size_t>(y) * width + x] = 1;
  return MaskMap(height, width, std::move(m));
}

std::pair<ImageBuffer, MaskMap> cutmix_swap(const ImageBuffer& hq, const ImageBuffer& other, Rng& rng,
                                            std::optional<double> lambda) {
  if (hq.height() != other.height() || hq.width() != other.width()) throw ShapeError("cutmix images must share a shape");
  MaskMap m = cutmix_mask(hq.height(), hq.width(), rng, lambda);
  auto [inside_hq, inside_other] = fprs_swap(hq, other, m);
  return {std::move(inside_other), std::move(m)};
}

}  // namespace ifqa
