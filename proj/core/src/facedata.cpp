#include "ifqa/facedata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cv_bridge.hpp"
#include "ifqa/errors.hpp"
#include "ifqa/fsutil.hpp"
#include "ifqa/random.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ifqa {

const char* to_string(ValueDomain d) noexcept {
  return d == ValueDomain::Byte255 ? "byte255" : "signed-unit";
}

const char* to_string(ImageRole r) noexcept {
  switch (r) {
    case ImageRole::HQ: return "HQ";
    case ImageRole::LQ: return "LQ";
    case ImageRole::RF: return "RF";
    case ImageRole::Mixed: return "MIXED";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// ImageBuffer / MaskMap / ScoreMap
// ---------------------------------------------------------------------------

ImageBuffer::ImageBuffer(int height, int width, ValueDomain domain, ImageRole role,
                         std::vector<float> values)
    : height_(height), width_(width), domain_(domain), role_(role), values_(std::move(values)) {
  if (height < 0 || width < 0) throw ShapeError("negative image extent");
  if (values_.size() != static_cast<std::size_t>(height) * width * kChannels) {
    throw ShapeError("image value count does not match " + std::to_string(height) + "x" +
                     std::to_string(width) + "x3");
  }
  validate();
}

ImageBuffer ImageBuffer::filled(int height, int width, ValueDomain domain, ImageRole role,
                                float value) {
  return ImageBuffer(height, width, domain, role,
                     std::vector<float>(static_cast<std::size_t>(height) * width * kChannels, value));
}

ImageBuffer ImageBuffer::with_role(ImageRole role) const {
  ImageBuffer out = *this;
  out.role_ = role;
  return out;
}

void ImageBuffer::validate() const {
  if (domain_ == ValueDomain::Byte255) {
    for (float v : values_) {
      if (!(v >= 0.f && v <= 255.f) || v != std::floor(v)) {
        throw DomainError("byte255 image holds non-integer or out-of-range value " +
                          std::to_string(v));
      }
    }
  } else {
    for (float v : values_) {
      if (!(v >= -1.f && v <= 1.f)) {
        throw DomainError("signed-unit image holds out-of-range value " + std::to_string(v));
      }
    }
  }
}

MaskMap::MaskMap(int height, int width, std::vector<std::uint8_t> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("mask value count does not match extent");
  }
  for (auto v : values_) {
    if (v > 1) throw DomainError("mask is not binary");
  }
}

MaskMap MaskMap::filled(int height, int width, std::uint8_t value) {
  return MaskMap(height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, value));
}

std::size_t MaskMap::area() const noexcept {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{1}));
}

double MaskMap::area_fraction() const noexcept {
  return values_.empty() ? 0.0 : static_cast<double>(area()) / static_cast<double>(values_.size());
}

MaskMap MaskMap::complement() const {
  std::vector<std::uint8_t> out(values_.size());
  std::transform(values_.begin(), values_.end(), out.begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(1 - v); });
  return MaskMap(height_, width_, std::move(out));
}

ScoreMap::ScoreMap(int height, int width, std::vector<float> values)
    : height_(height), width_(width), values_(std::move(values)) {
  if (values_.size() != static_cast<std::size_t>(height) * width) {
    throw ShapeError("score map value count does not match extent");
  }
  for (float v : values_) {
    if (!(v >= 0.f && v <= 1.f)) throw DomainError("score outside [0,1]: " + std::to_string(v));
  }
}

ScoreMap ScoreMap::filled(int height, int width, float value) {
  return ScoreMap(height, width, std::vector<float>(static_cast<std::size_t>(height) * width, value));
}

ScoreMap ScoreMap::from_mask(const MaskMap& mask) {
  std::vector<float> v(mask.values().begin(), mask.values().end());
  return ScoreMap(mask.height(), mask.width(), std::move(v));
}

bool ScoreMap::is_binary() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](float v) { return v == 0.f || v == 1.f; });
}

// ---------------------------------------------------------------------------
// Regions
// ---------------------------------------------------------------------------

std::string_view region_name(Region r) noexcept {
  switch (r) {
    case Region::LeftEye: return "left_eye";
    case Region::RightEye: return "right_eye";
    case Region::Nose: return "nose";
    case Region::Mouth: return "mouth";
  }
  return "?";
}

void RegionBoxSet::validate() const {
  for (Region r : kAllRegions) {
    if (!(*this)[r].valid()) {
      throw ValidationError("region box '" + std::string(region_name(r)) + "' is degenerate or outside [0,1]");
    }
  }
}

RegionBoxSet regions_from_landmarks(std::span<const Point2> landmarks, int width, int height) {
  if (landmarks.size() != 68) throw ParameterError("expected 68 landmarks");
  if (width <= 0 || height <= 0) throw ParameterError("frame must be non-empty");
  struct Range {
    Region region;
    int first, last;
  };
  // iBUG-68: 36-41 and 42-47 are the eyes in image-left/right order,
  // 27-35 the nose, 48-67 the mouth.
  constexpr Range ranges[] = {{Region::LeftEye, 36, 41},
                              {Region::RightEye, 42, 47},
                              {Region::Nose, 27, 35},
                              {Region::Mouth, 48, 67}};
  RegionBoxSet out;
  for (const auto& rg : ranges) {
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (int i = rg.first; i <= rg.last; ++i) {
      x0 = std::min(x0, landmarks[i].x);
      x1 = std::max(x1, landmarks[i].x);
      y0 = std::min(y0, landmarks[i].y);
      y1 = std::max(y1, landmarks[i].y);
    }
    const double dx = 0.1 * (x1 - x0), dy = 0.1 * (y1 - y0);
    RegionBox b{std::clamp((x0 - dx) / width, 0.0, 1.0), std::clamp((y0 - dy) / height, 0.0, 1.0),
                std::clamp((x1 + dx) / width, 0.0, 1.0), std::clamp((y1 + dy) / height, 0.0, 1.0)};
    if (!b.valid()) {
      throw ValidationError("landmarks for '" + std::string(region_name(rg.region)) + "' span no area");
    }
    out[rg.region] = b;
  }
  return out;
}

namespace {

bool box_intersects_mask(const RegionBox& b, const MaskMap& mask) {
  const int w = mask.width(), h = mask.height();
  const int xa = std::clamp(static_cast<int>(std::floor(b.x0 * w)), 0, w - 1);
  const int xb = std::clamp(static_cast<int>(std::ceil(b.x1 * w)), 1, w);
  const int ya = std::clamp(static_cast<int>(std::floor(b.y0 * h)), 0, h - 1);
  const int yb = std::clamp(static_cast<int>(std::ceil(b.y1 * h)), 1, h);
  for (int y = ya; y < yb; ++y)
    for (int x = xa; x < xb; ++x)
      if (mask.at(y, x)) return true;
  return false;
}

}  // namespace

void FaceSample::validate() const {
  if (image.height() != face_mask.height() || image.width() != face_mask.width()) {
    throw ShapeError("sample '" + id + "': mask shape differs from image shape");
  }
  regions.validate();
  const double frac = face_mask.area_fraction();
  if (!(frac > 0.0 && frac < 1.0)) {
    throw ValidationError("sample '" + id + "': face mask must cover a proper fraction of the frame");
  }
  for (Region r : kAllRegions) {
    if (!box_intersects_mask(regions[r], face_mask)) {
      throw ValidationError("sample '" + id + "': region '" + std::string(region_name(r)) +
                            "' does not intersect the face mask");
    }
  }
}

// ---------------------------------------------------------------------------
// Domain conversion and resampling
// ---------------------------------------------------------------------------

ImageBuffer to_signed_unit(const ImageBuffer& img) {
  if (img.domain() != ValueDomain::Byte255) throw DomainError("to_signed_unit expects a byte255 image");
  std::vector<float> out(img.size());
  auto src = img.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(src[i]) / 127.5 - 1.0);
  }
  return ImageBuffer(img.height(), img.width(), ValueDomain::SignedUnit, img.role(), std::move(out));
}

ImageBuffer from_signed_unit(const ImageBuffer& img) {
  if (img.domain() != ValueDomain::SignedUnit) throw DomainError("from_signed_unit expects a signed-unit image");
  std::vector<float> out(img.size());
  auto src = img.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = (static_cast<double>(src[i]) + 1.0) * 127.5;
    out[i] = static_cast<float>(std::clamp<long>(std::lround(v), 0, 255));
  }
  return ImageBuffer(img.height(), img.width(), ValueDomain::Byte255, img.role(), std::move(out));
}

namespace detail {

cv::Mat to_mat_f32(const ImageBuffer& img) {
  cv::Mat m(img.height(), img.width(), CV_32FC3);
  std::copy(img.values().begin(), img.values().end(), m.ptr<float>());
  return m;
}

ImageBuffer from_mat_f32(const cv::Mat& m, ValueDomain domain, ImageRole role) {
  CV_Assert(m.type() == CV_32FC3);
  cv::Mat c = m.isContinuous() ? m : m.clone();
  const float* p = c.ptr<float>();
  std::vector<float> v(p, p + static_cast<std::size_t>(c.rows) * c.cols * 3);
  if (domain == ValueDomain::Byte255) {
    for (float& x : v) x = std::clamp(std::round(x), 0.f, 255.f);
  } else {
    for (float& x : v) x = std::clamp(x, -1.f, 1.f);
  }
  return ImageBuffer(c.rows, c.cols, domain, role, std::move(v));
}

cv::Mat to_mat_bgr8(const ImageBuffer& img) {
  if (img.domain() != ValueDomain::Byte255) throw DomainError("codec path expects a byte255 image");
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  auto v = img.values();
  for (int y = 0; y < img.height(); ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * img.width() + x) * 3;
      row[x] = cv::Vec3b(static_cast<uchar>(v[i + 2]), static_cast<uchar>(v[i + 1]),
                         static_cast<uchar>(v[i]));
    }
  }
  return m;
}

ImageBuffer from_mat_bgr8(const cv::Mat& m, ImageRole role) {
  CV_Assert(m.type() == CV_8UC3);
  std::vector<float> v(static_cast<std::size_t>(m.rows) * m.cols * 3);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) {
      const std::size_t i = (static_cast<std::size_t>(y) * m.cols + x) * 3;
      v[i] = row[x][2];
      v[i + 1] = row[x][1];
      v[i + 2] = row[x][0];
    }
  }
  return ImageBuffer(m.rows, m.cols, ValueDomain::Byte255, role, std::move(v));
}

cv::Mat to_mat_u8(const MaskMap& mask) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  std::copy(mask.values().begin(), mask.values().end(), m.ptr<uchar>());
  return m;
}

}  // namespace detail

ImageBuffer resize_image(const ImageBuffer& img, int height, int width) {
  if (height <= 0 || width <= 0) throw ParameterError("resize target must be positive");
  if (img.height() == height && img.width() == width) return img;
  cv::Mat out;
  cv::resize(detail::to_mat_f32(img), out, cv::Size(width, height), 0, 0, cv::INTER_CUBIC);
  return detail::from_mat_f32(out, img.domain(), img.role());
}

MaskMap resize_mask(const MaskMap& mask, int height, int width) {
  if (mask.height() == height && mask.width() == width) return mask;
  cv::Mat src;
  detail::to_mat_u8(mask).convertTo(src, CV_32F);
  cv::Mat out;
  cv::resize(src, out, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
  std::vector<std::uint8_t> v(static_cast<std::size_t>(height) * width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      v[static_cast<std::size_t>(y) * width + x] = out.at<float>(y, x) >= 0.5f ? 1 : 0;
  return MaskMap(height, width, std::move(v));
}

// ---------------------------------------------------------------------------
// On-disk format
// ---------------------------------------------------------------------------

namespace {

void write_encoded(const fs::path& path, const cv::Mat& m) {
  std::vector<uchar> buf;
  if (!cv::imencode(".png", m, buf)) throw IoError("png encode failed for " + path.string());
  atomic_write(path, std::span<const unsigned char>(buf.data(), buf.size()));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ImageBuffer read_image_png(const fs::path& path, ImageRole role) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (m.empty()) throw IoError("cannot decode image " + path.string());
  return detail::from_mat_bgr8(m, role);
}

void write_image_png(const fs::path& path, const ImageBuffer& img) {
  const ImageBuffer& bytes = img.domain() == ValueDomain::Byte255 ? img : from_signed_unit(img);
  write_encoded(path, detail::to_mat_bgr8(bytes));
}

MaskMap read_mask_png(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw IoError("cannot decode mask " + path.string());
  std::vector<std::uint8_t> v(static_cast<std::size_t>(m.rows) * m.cols);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) v[static_cast<std::size_t>(y) * m.cols + x] = m.at<uchar>(y, x) >= 128 ? 1 : 0;
  return MaskMap(m.rows, m.cols, std::move(v));
}

void write_mask_png(const fs::path& path, const MaskMap& mask) {
  cv::Mat m = detail::to_mat_u8(mask) * 255;
  write_encoded(path, m);
}

RegionBoxSet read_regions_json(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw LoadError("malformed region file " + path.string() + ": " + e.what());
  }
  RegionBoxSet out;
  for (Region r : kAllRegions) {
    const std::string key(region_name(r));
    if (!j.contains(key) || !j[key].is_array() || j[key].size() != 4) {
      throw LoadError("region file " + path.string() + " lacks a 4-element '" + key + "' entry");
    }
    const auto& a = j[key];
    out[r] = RegionBox{a[0].get<double>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>()};
  }
  out.validate();
  return out;
}

void write_regions_json(const fs::path& path, const RegionBoxSet& regions) {
  json j = json::object();
  for (Region r : kAllRegions) {
    const auto& b = regions[r];
    j[std::string(region_name(r))] = {b.x0, b.y0, b.x1, b.y1};
  }
  atomic_write(path, j.dump() + "\n");
}

void save_sample(const fs::path& root, const FaceSample& sample) {
  write_image_png(root / (sample.id + ".png"), sample.image);
  write_regions_json(root / (sample.id + ".regions.json"), sample.regions);
  write_mask_png(root / (sample.id + ".mask.png"), sample.face_mask);
}

void save_dataset(const fs::path& root, std::span<const FaceSample> samples) {
  fs::create_directories(root);
  for (const auto& s : samples) save_sample(root, s);
}

std::vector<std::string> list_image_ids(const fs::path& root) {
  std::vector<std::string> ids;
  if (!fs::is_directory(root)) return ids;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    constexpr std::string_view kPng = ".png", kMask = ".mask.png";
    if (name.size() <= kPng.size() || !name.ends_with(kPng) || name.ends_with(kMask)) continue;
    if (name.front() == '.') continue;
    ids.push_back(name.substr(0, name.size() - kPng.size()));
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

LoadResult load_dataset(const fs::path& root, int resolution) {
  if (resolution <= 0) throw ConfigError("resolution must be positive");
  LoadResult result;
  for (const auto& id : list_image_ids(root)) {
    const fs::path regions_path = root / (id + ".regions.json");
    const fs::path mask_path = root / (id + ".mask.png");
    std::vector<std::string> missing;
    if (!fs::exists(regions_path)) missing.push_back(regions_path.filename().string());
    if (!fs::exists(mask_path)) missing.push_back(mask_path.filename().string());
    if (!missing.empty()) {
      std::string reason = "missing sidecar:";
      for (const auto& m : missing) reason += " " + m;
      result.errors.push_back({id, reason});
      continue;
    }
    ImageBuffer image;
    try {
      image = read_image_png(root / (id + ".png"));
    } catch (const IoError&) {
      ++result.warnings;
      continue;
    }
    try {
      FaceSample s;
      s.id = id;
      s.regions = read_regions_json(regions_path);
      MaskMap mask = read_mask_png(mask_path);
      if (mask.height() != image.height() || mask.width() != image.width()) {
        mask = resize_mask(mask, image.height(), image.width());
      }
      s.image = resize_image(image, resolution, resolution);
      s.face_mask = resize_mask(mask, resolution, resolution);
      s.validate();
      result.samples.push_back(std::move(s));
    } catch (const Error& e) {
      result.errors.push_back({id, e.what()});
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Synthetic faces
// ---------------------------------------------------------------------------

namespace {

struct Canvas {
  int res;
  std::vector<double> rgb;  // res*res*3

  void set(int y, int x, double r, double g, double b) {
    const std::size_t i = (static_cast<std::size_t>(y) * res + x) * 3;
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  }
  void add(int y, int x, double d) {
    const std::size_t i = (static_cast<std::size_t>(y) * res + x) * 3;
    rgb[i] += d;
    rgb[i + 1] += d;
    rgb[i + 2] += d;
  }
};

struct Color {
  double r, g, b;
};

Color jitter(Rng& rng, Color c, double amount) {
  return {c.r + uniform(rng, -amount, amount), c.g + uniform(rng, -amount, amount),
          c.b + uniform(rng, -amount, amount)};
}

}  // namespace

FaceSample synth_face(std::uint64_t seed, int index, int resolution) {
  if (std::find(kSynthResolutions.begin(), kSynthResolutions.end(), resolution) == kSynthResolutions.end()) {
    throw ConfigError("synthetic faces support resolutions 32, 64, 128, 256; got " + std::to_string(resolution));
  }
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  const int n = resolution;
  const double inv = 1.0 / n;
  Canvas canvas{n, std::vector<double>(static_cast<std::size_t>(n) * n * 3)};

  // Background: two oriented sinusoids plus fine grain.
  const Color bg = jitter(rng, {110, 120, 130}, 60);
  const double f1 = uniform(rng, 2, 6), f2 = uniform(rng, 3, 9);
  const double a1 = uniform(rng, 0, std::numbers::pi), a2 = uniform(rng, 0, std::numbers::pi);
  const double p1 = uniform(rng, 0, 2 * std::numbers::pi), p2 = uniform(rng, 0, 2 * std::numbers::pi);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double u = (x + 0.5) * inv, v = (y + 0.5) * inv;
      const double t = 18 * std::sin(2 * std::numbers::pi * f1 * (u * std::cos(a1) + v * std::sin(a1)) + p1) +
                       10 * std::sin(2 * std::numbers::pi * f2 * (u * std::cos(a2) + v * std::sin(a2)) + p2);
      const double grain = uniform(rng, -8, 8);
      canvas.set(y, x, bg.r + t + grain, bg.g + 0.8 * t + grain, bg.b + 0.6 * t + grain);
    }
  }

  // Head ellipse.
  const double cx = 0.5 + uniform(rng, -0.05, 0.05);
  const double cy = 0.52 + uniform(rng, -0.04, 0.04);
  const double rx = uniform(rng, 0.28, 0.36);
  const double ry = uniform(rng, 0.36, 0.44);
  const Color skin = jitter(rng, {205, 160, 130}, 35);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(n) * n, 0);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double du = ((x + 0.5) * inv - cx) / rx, dv = ((y + 0.5) * inv - cy) / ry;
      const double r2 = du * du + dv * dv;
      if (r2 > 1.0) continue;
      mask[static_cast<std::size_t>(y) * n + x] = 1;
      const double shade = 1.0 - 0.18 * r2;
      // Skin micro-texture is the high-frequency detail degradation destroys.
      const double pore = uniform(rng, -14, 14);
      canvas.set(y, x, skin.r * shade + pore, skin.g * shade + pore, skin.b * shade + pore);
    }
  }

  auto fill_disk = [&](double ex, double ey, double rad, Color c) {
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const double du = (x + 0.5) * inv - ex, dv = (y + 0.5) * inv - ey;
        if (du * du + dv * dv <= rad * rad) canvas.set(y, x, c.r, c.g, c.b);
      }
  };

  RegionBoxSet regions;
  // Eyes: sclera disk, iris disk and a pupil.
  const double eye_r = rx * uniform(rng, 0.16, 0.2);
  const double eye_dx = rx * uniform(rng, 0.36, 0.44);
  const double eye_y = cy - ry * uniform(rng, 0.18, 0.26);
  const Color iris = jitter(rng, {70, 90, 60}, 40);
  for (int side = 0; side < 2; ++side) {
    const double ex = side == 0 ? cx - eye_dx : cx + eye_dx;
    fill_disk(ex, eye_y, eye_r, {240, 240, 235});
    fill_disk(ex, eye_y, eye_r * 0.55, iris);
    fill_disk(ex, eye_y, eye_r * 0.25, {15, 15, 15});
    regions[side == 0 ? Region::LeftEye : Region::RightEye] =
        RegionBox{ex - eye_r, eye_y - eye_r, ex + eye_r, eye_y + eye_r};
  }

  // Nose wedge: apex above, base below, darker than skin.
  const double nose_top = cy - ry * 0.08, nose_bot = cy + ry * uniform(rng, 0.2, 0.28);
  const double nose_hw = rx * uniform(rng, 0.12, 0.17);
  for (int y = 0; y < n; ++y) {
    const double v = (y + 0.5) * inv;
    if (v < nose_top || v > nose_bot) continue;
    const double half = nose_hw * (v - nose_top) / (nose_bot - nose_top);
    for (int x = 0; x < n; ++x) {
      const double u = (x + 0.5) * inv;
      if (std::abs(u - cx) <= half) canvas.add(y, x, -45);
    }
  }
  regions[Region::Nose] = RegionBox{cx - nose_hw, nose_top, cx + nose_hw, nose_bot};

  // Mouth bar.
  const double mouth_y = cy + ry * uniform(rng, 0.46, 0.54);
  const double mouth_hw = rx * uniform(rng, 0.3, 0.4), mouth_hh = ry * uniform(rng, 0.04, 0.07);
  const Color lips = jitter(rng, {170, 60, 70}, 25);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double u = (x + 0.5) * inv, v = (y + 0.5) * inv;
      if (std::abs(u - cx) <= mouth_hw && std::abs(v - mouth_y) <= mouth_hh) canvas.set(y, x, lips.r, lips.g, lips.b);
    }
  regions[Region::Mouth] = RegionBox{cx - mouth_hw, mouth_y - mouth_hh, cx + mouth_hw, mouth_y + mouth_hh};

  std::vector<float> values(canvas.rgb.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<float>(std::clamp(std::round(canvas.rgb[i]), 0.0, 255.0));
  }

  FaceSample s;
  s.id = "synth_" + std::to_string(seed) + "_" + [&] {
    std::string idx = std::to_string(index);
    return std::string(idx.size() < 6 ? 6 - idx.size() : 0, '0') + idx;
  }();
  s.image = ImageBuffer(n, n, ValueDomain::Byte255, ImageRole::HQ, std::move(values));
  s.regions = regions;
  s.face_mask = MaskMap(n, n, std::move(mask));
  return s;
}

std::vector<FaceSample> synth_faces(std::uint64_t seed, int count, int resolution) {
  if (count < 0) throw ParameterError("count must be non-negative");
  if (std::find(kSynthResolutions.begin(), kSynthResolutions.end(), resolution) == kSynthResolutions.end()) {
    throw ConfigError("synthetic faces support resolutions 32, 64, 128, 256; got " + std::to_string(resolution));
  }
  std::vector<FaceSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out.push_back(synth_face(seed, i, resolution));
  return out;
}

DatasetSplit split_dataset(std::vector<FaceSample> samples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train fraction must lie in (0,1]");
  Rng rng(mix_seed(seed));
  for (std::size_t i = samples.size(); i > 1; --i) {
    std::swap(samples[i - 1], samples[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i)))]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(samples.size())));
  DatasetSplit split;
  split.train.assign(std::make_move_iterator(samples.begin()),
                     std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_train)));
  split.validation.assign(std::make_move_iterator(samples.begin() + static_cast<std::ptrdiff_t>(n_train)),
                          std::make_move_iterator(samples.end()));
  return split;
}

}  // namespace ifqa
