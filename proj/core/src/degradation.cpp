#include "ifqa/degradation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cv_bridge.hpp"
#include "ifqa/errors.hpp"

namespace ifqa {

double Kernel::sum() const {
  double s = 0;
  for (double w : weights) s += w;
  return s;
}

Kernel Kernel::transposed() const {
  Kernel k = *this;
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) k.weights[static_cast<std::size_t>(c) * size + r] = at(r, c);
  return k;
}

namespace {

void normalize(std::vector<double>& w) {
  double s = 0;
  for (double v : w) s += v;
  for (double& v : w) v /= s;
}

// cos/sin of an angle in degrees with exact zeros on the axes.
std::pair<double, double> direction(double angle_deg) {
  const double rad = angle_deg * std::numbers::pi / 180.0;
  double c = std::cos(rad), s = std::sin(rad);
  if (std::abs(c) < 1e-12) c = 0;
  if (std::abs(s) < 1e-12) s = 0;
  return {c, s};
}

}  // namespace

Kernel identity_kernel() { return Kernel{}; }

Kernel gaussian_kernel(int size, double sigma) {
  if (size < 1 || size % 2 == 0) throw ParameterError("gaussian kernel size must be odd and >= 1");
  if (!(sigma > 0)) throw ParameterError("gaussian sigma must be > 0");
  Kernel k;
  k.kind = size == 1 ? KernelKind::Identity : KernelKind::Gaussian;
  k.size = size;
  k.sigma = sigma;
  k.weights.assign(static_cast<std::size_t>(size) * size, 0.0);
  const int c = size / 2;
  for (int r = 0; r < size; ++r)
    for (int col = 0; col < size; ++col) {
      const double d2 = static_cast<double>((r - c) * (r - c) + (col - c) * (col - c));
      k.weights[static_cast<std::size_t>(r) * size + col] = std::exp(-d2 / (2 * sigma * sigma));
    }
  normalize(k.weights);
  return k;
}

Kernel motion_kernel(int length, double angle_deg) {
  if (length < 1) throw ParameterError("motion kernel length must be >= 1");
  Kernel k;
  k.kind = length == 1 ? KernelKind::Identity : KernelKind::Motion;
  k.size = length % 2 == 1 ? length : length + 1;
  k.length = length;
  k.angle_deg = angle_deg;
  k.weights.assign(static_cast<std::size_t>(k.size) * k.size, 0.0);
  const double center = k.size / 2;
  const auto [dx, dy] = direction(angle_deg);
  const double half = 0.5 * (length - 1);
  // Supersample the segment and splat each point bilinearly.
  const int samples = length == 1 ? 1 : 16 * length + 1;
  for (int i = 0; i < samples; ++i) {
    const double t = samples == 1 ? 0.0 : -half + 2 * half * i / (samples - 1);
    const double x = center + t * dx;
    const double y = center - t * dy;
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    const double taps[4][3] = {{static_cast<double>(y0), static_cast<double>(x0), (1 - fx) * (1 - fy)},
                               {static_cast<double>(y0), static_cast<double>(x0 + 1), fx * (1 - fy)},
                               {static_cast<double>(y0 + 1), static_cast<double>(x0), (1 - fx) * fy},
                               {static_cast<double>(y0 + 1), static_cast<double>(x0 + 1), fx * fy}};
    for (const auto& tap : taps) {
      const int r = static_cast<int>(tap[0]), c = static_cast<int>(tap[1]);
      if (tap[2] == 0.0 || r < 0 || c < 0 || r >= k.size || c >= k.size) continue;
      k.weights[static_cast<std::size_t>(r) * k.size + c] += tap[2];
    }
  }
  normalize(k.weights);
  return k;
}

void DegradationRanges::validate() const {
  if (!(0 < r_min && r_min < r_max && r_max <= 1.0)) throw ConfigError("scale range must satisfy 0 < r_min < r_max <= 1");
  if (!(0 <= sigma_min && sigma_min <= sigma_max)) throw ConfigError("noise range must satisfy 0 <= min <= max");
  if (jpeg && !(1 <= q_min && q_min < q_max && q_max <= 101)) throw ConfigError("jpeg quality range must lie in [1,100]");
  if (!(0 < blur_sigma_min && blur_sigma_min <= blur_sigma_max)) throw ConfigError("blur sigma range invalid");
  if (!(1 <= motion_length_min && motion_length_min < motion_length_max)) throw ConfigError("motion length range invalid");
}

void DegradationParams::validate() const {
  if (!(scale_r > 0 && scale_r <= 1)) throw ParameterError("scale r must lie in (0,1]");
  if (!(noise_sigma >= 0)) throw ParameterError("noise sigma must be >= 0");
  if (jpeg_q && (*jpeg_q < 1 || *jpeg_q > 100)) throw ParameterError("jpeg quality must lie in [1,100]");
  if (kernel.size < 1 || kernel.size % 2 == 0 ||
      kernel.weights.size() != static_cast<std::size_t>(kernel.size) * kernel.size) {
    throw ParameterError("kernel must be square with odd size");
  }
}

std::string DegradationParams::to_json() const {
  nlohmann::json k;
  switch (kernel.kind) {
    case KernelKind::Identity: k = {{"type", "identity"}}; break;
    case KernelKind::Gaussian: k = {{"type", "gaussian"}, {"size", kernel.size}, {"sigma", kernel.sigma}}; break;
    case KernelKind::Motion:
      k = {{"type", "motion"}, {"size", kernel.size}, {"length", kernel.length}, {"angle", kernel.angle_deg}};
      break;
  }
  nlohmann::json j = {{"kernel", k},
                      {"r", scale_r},
                      {"sigma", noise_sigma},
                      {"q", jpeg_q ? nlohmann::json(*jpeg_q) : nlohmann::json(nullptr)},
                      {"seed", seed}};
  return j.dump();
}

DegradationParams sample_params(Rng& rng, const DegradationRanges& ranges) {
  DegradationParams p;
  if (bernoulli(rng, 0.5)) {
    const double s = uniform(rng, ranges.blur_sigma_min, ranges.blur_sigma_max);
    const int size = std::min(21, 2 * static_cast<int>(std::ceil(3 * s)) + 1);
    p.kernel = gaussian_kernel(size, s);
  } else {
    const int len = static_cast<int>(uniform_int(rng, ranges.motion_length_min, ranges.motion_length_max));
    p.kernel = motion_kernel(len, uniform(rng, 0.0, 180.0));
  }
  p.scale_r = uniform(rng, ranges.r_min, ranges.r_max);
  p.noise_sigma = uniform(rng, ranges.sigma_min, ranges.sigma_max);
  if (ranges.jpeg) p.jpeg_q = static_cast<int>(uniform_int(rng, ranges.q_min, ranges.q_max));
  p.seed = rng();
  return p;
}

ImageBuffer degrade(const ImageBuffer& img, const DegradationParams& params) {
  if (img.domain() != ValueDomain::Byte255) throw DomainError("degrade expects a byte255 image");
  params.validate();
  const int h = img.height(), w = img.width();

  cv::Mat work = detail::to_mat_f32(img);
  if (params.kernel.size > 1) {
    cv::Mat k(params.kernel.size, params.kernel.size, CV_32F);
    for (int r = 0; r < params.kernel.size; ++r)
      for (int c = 0; c < params.kernel.size; ++c) k.at<float>(r, c) = static_cast<float>(params.kernel.at(r, c));
    cv::Mat blurred;
    // filter2D correlates; flip to convolve.
    cv::flip(k, k, -1);
    cv::filter2D(work, blurred, CV_32F, k, cv::Point(-1, -1), 0, cv::BORDER_REFLECT_101);
    work = blurred;
  }

  const int dh = std::max(1, static_cast<int>(std::lround(params.scale_r * h)));
  const int dw = std::max(1, static_cast<int>(std::lround(params.scale_r * w)));
  if (dh != h || dw != w) {
    cv::Mat small;
    cv::resize(work, small, cv::Size(dw, dh), 0, 0, cv::INTER_CUBIC);
    work = small;
  }

  if (params.noise_sigma > 0) {
    Rng rng(params.seed);
    auto* p = work.ptr<float>();
    const std::size_t n = static_cast<std::size_t>(work.rows) * work.cols * 3;
    for (std::size_t i = 0; i < n; ++i) p[i] += static_cast<float>(params.noise_sigma * standard_normal(rng));
  }

  // Quantize to bytes; this is also the clip to [0,255].
  ImageBuffer small = detail::from_mat_f32(work, ValueDomain::Byte255, ImageRole::LQ);

  if (params.jpeg_q) {
    std::vector<uchar> buf;
    cv::imencode(".jpg", detail::to_mat_bgr8(small), buf,
                 {cv::IMWRITE_JPEG_QUALITY, *params.jpeg_q, cv::IMWRITE_JPEG_PROGRESSIVE, 0});
    cv::Mat decoded = cv::imdecode(buf, cv::IMREAD_COLOR);
    if (decoded.empty()) throw IoError("jpeg round trip failed");
    small = detail::from_mat_bgr8(decoded, ImageRole::LQ);
  }

  if (small.height() != h || small.width() != w) return resize_image(small, h, w);
  return small;
}

std::string jpeg_codec_name() { return std::string("opencv-imgcodecs/libjpeg ") + CV_VERSION; }

}  // namespace ifqa
