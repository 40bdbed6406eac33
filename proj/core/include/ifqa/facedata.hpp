#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ifqa {

enum class ValueDomain { Byte255, SignedUnit };
enum class ImageRole { HQ, LQ, RF, Mixed };

const char* to_string(ValueDomain d) noexcept;
const char* to_string(ImageRole r) noexcept;

/// H x W x 3 raster stored row-major, channel-interleaved (RGB).
///
/// Byte255 buffers hold integer values in [0, 255]; SignedUnit buffers hold
/// reals in [-1, 1]. Both are stored as float so that mixing and resizing
/// code paths are shared; the domain invariant is checked on construction.
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;

  ImageBuffer() = default;
  ImageBuffer(int height, int width, ValueDomain domain, ImageRole role,
              std::vector<float> values);

  static ImageBuffer filled(int height, int width, ValueDomain domain,
                            ImageRole role, float value);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return kChannels; }
  ValueDomain domain() const noexcept { return domain_; }
  ImageRole role() const noexcept { return role_; }
  bool empty() const noexcept { return values_.empty(); }
  std::size_t size() const noexcept { return values_.size(); }

  float at(int y, int x, int c) const {
    return values_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  std::span<const float> values() const noexcept { return values_; }

  ImageBuffer with_role(ImageRole role) const;

  /// Throws DomainError if any value violates the declared domain.
  void validate() const;

  bool operator==(const ImageBuffer&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  ValueDomain domain_ = ValueDomain::Byte255;
  ImageRole role_ = ImageRole::HQ;
  std::vector<float> values_;
};

/// Binary H x W map; 1 marks membership.
class MaskMap {
 public:
  MaskMap() = default;
  MaskMap(int height, int width, std::vector<std::uint8_t> values);
  static MaskMap filled(int height, int width, std::uint8_t value);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::uint8_t at(int y, int x) const {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::span<const std::uint8_t> values() const noexcept { return values_; }

  std::size_t area() const noexcept;
  double area_fraction() const noexcept;
  MaskMap complement() const;

  bool operator==(const MaskMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> values_;
};

/// H x W map of reals in [0, 1]. Used both for discriminator output and
/// for pixel-level real/fake supervision.
class ScoreMap {
 public:
  ScoreMap() = default;
  ScoreMap(int height, int width, std::vector<float> values);
  static ScoreMap filled(int height, int width, float value);
  static ScoreMap from_mask(const MaskMap& mask);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return values_.empty(); }
  float at(int y, int x) const {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }
  std::span<const float> values() const noexcept { return values_; }

  bool is_binary() const noexcept;
  bool operator==(const ScoreMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> values_;
};

enum class Region : int { LeftEye = 0, RightEye = 1, Nose = 2, Mouth = 3 };
inline constexpr std::array<Region, 4> kAllRegions = {
    Region::LeftEye, Region::RightEye, Region::Nose, Region::Mouth};

std::string_view region_name(Region r) noexcept;

/// Axis-aligned box in normalized image coordinates.
struct RegionBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool valid() const noexcept {
    return 0.0 <= x0 && x0 < x1 && x1 <= 1.0 && 0.0 <= y0 && y0 < y1 && y1 <= 1.0;
  }
  double center_x() const noexcept { return 0.5 * (x0 + x1); }
  double center_y() const noexcept { return 0.5 * (y0 + y1); }
  bool operator==(const RegionBox&) const = default;
};

struct RegionBoxSet {
  std::array<RegionBox, 4> boxes{};

  const RegionBox& operator[](Region r) const { return boxes[static_cast<int>(r)]; }
  RegionBox& operator[](Region r) { return boxes[static_cast<int>(r)]; }

  void validate() const;
  bool operator==(const RegionBoxSet&) const = default;
};

struct Point2 {
  double x = 0, y = 0;
};

/// Converts 68-point (iBUG layout) landmarks in pixel coordinates to region
/// boxes: bounding box per component, dilated by 10% of its extent per side
/// and clamped to the frame.
RegionBoxSet regions_from_landmarks(std::span<const Point2> landmarks, int width,
                                    int height);

struct FaceSample {
  std::string id;
  ImageBuffer image;
  RegionBoxSet regions;
  MaskMap face_mask;

  /// Checks shape agreement, box validity, box/mask intersection and that
  /// the mask covers a proper fraction of the frame.
  void validate() const;
};

// -- domain conversion ------------------------------------------------------

/// Affine 0..255 -> -1..1.
ImageBuffer to_signed_unit(const ImageBuffer& img);
/// Affine -1..1 -> 0..255, rounding half away from zero and clamping.
ImageBuffer from_signed_unit(const ImageBuffer& img);

// -- resampling -------------------------------------------------------------

/// Bicubic resize; byte255 inputs are rounded and clamped back to integers.
ImageBuffer resize_image(const ImageBuffer& img, int height, int width);
/// Bilinear resize of the 0/1 mask followed by a 0.5 threshold.
MaskMap resize_mask(const MaskMap& mask, int height, int width);

// -- on-disk format ---------------------------------------------------------

ImageBuffer read_image_png(const std::filesystem::path& path,
                           ImageRole role = ImageRole::HQ);
void write_image_png(const std::filesystem::path& path, const ImageBuffer& img);
MaskMap read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const MaskMap& mask);
RegionBoxSet read_regions_json(const std::filesystem::path& path);
void write_regions_json(const std::filesystem::path& path, const RegionBoxSet& regions);

/// Writes `<root>/<id>.png`, `<root>/<id>.regions.json`, `<root>/<id>.mask.png`.
void save_sample(const std::filesystem::path& root, const FaceSample& sample);
void save_dataset(const std::filesystem::path& root, std::span<const FaceSample> samples);

struct SampleError {
  std::string id;
  std::string reason;
};

struct LoadResult {
  std::vector<FaceSample> samples;
  std::vector<SampleError> errors;
  std::size_t warnings = 0;
};

/// Loads every `<id>.png` under root (non-recursive) in lexicographic id
/// order. Missing sidecars become per-sample errors, unreadable images are
/// skipped and counted as warnings.
LoadResult load_dataset(const std::filesystem::path& root, int resolution);

/// Image ids (file stems of `<id>.png`, excluding `.mask.png`) in
/// lexicographic order.
std::vector<std::string> list_image_ids(const std::filesystem::path& root);

// -- synthetic corpus -------------------------------------------------------

inline constexpr std::array<int, 4> kSynthResolutions = {32, 64, 128, 256};

/// Procedural faces with exact region boxes and face masks. Output is a pure
/// function of (seed, index, resolution), so a prefix of a larger corpus is
/// identical to a smaller one.
std::vector<FaceSample> synth_faces(std::uint64_t seed, int count, int resolution);
FaceSample synth_face(std::uint64_t seed, int index, int resolution);

/// Splits a dataset into (train, validation) by a deterministic shuffle.
struct DatasetSplit {
  std::vector<FaceSample> train;
  std::vector<FaceSample> validation;
};
DatasetSplit split_dataset(std::vector<FaceSample> samples, double train_fraction,
                           std::uint64_t seed);

}  // namespace ifqa
