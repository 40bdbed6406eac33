#include "ifqa/assessor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "ifqa/errors.hpp"
#include "ifqa/fsutil.hpp"
#include "ifqa/trainer.hpp"

namespace fs = std::filesystem;

namespace ifqa {

ScoreMap score_map(const ImageBuffer& img, Discriminator& discriminator) {
  if (discriminator->head() != DiscriminatorHead::PerPixel) {
    throw UnsupportedHeadError("score maps need a per-pixel discriminator");
  }
  if (img.height() % 16 != 0 || img.width() % 16 != 0) {
    throw ShapeError("image extent " + std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                     " is not supported by the discriminator (needs multiples of 16)");
  }
  torch::NoGradGuard no_grad;
  discriminator->eval();
  torch::Tensor x = image_to_tensor(img);
  const auto dtype = discriminator->parameters().front().scalar_type();
  const torch::Tensor d = discriminator->forward(x.to(dtype));
  return tensor_to_score_map(d, 0);
}

QualityScore quality_score(const ScoreMap& map, std::string id) {
  if (map.empty()) throw ParameterError("cannot score an empty map");
  double sum = 0;
  for (float v : map.values()) sum += v;
  return {sum / static_cast<double>(map.values().size()), std::move(id)};
}

double masked_quality_score(const ScoreMap& map, const MaskMap& face_mask) {
  if (map.height() != face_mask.height() || map.width() != face_mask.width()) {
    throw ShapeError("mask shape differs from score map");
  }
  double sum = 0;
  std::size_t n = 0;
  auto m = face_mask.values();
  auto v = map.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (m[i]) {
      sum += v[i];
      ++n;
    }
  }
  if (n == 0) throw ParameterError("face mask is empty");
  return sum / static_cast<double>(n);
}

fs::path export_map(const ScoreMap& map, const fs::path& stem, MapStyle style) {
  const double qs = quality_score(map).value;
  char suffix[32];
  std::snprintf(suffix, sizeof suffix, "_qs%.4f.png", qs);
  const fs::path path = stem.parent_path() / (stem.filename().string() + suffix);

  cv::Mat gray(map.height(), map.width(), CV_8UC1);
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      gray.at<uchar>(y, x) = static_cast<uchar>(std::lround(255.0 * static_cast<double>(map.at(y, x))));
  cv::Mat out = gray;
  if (style == MapStyle::Color) cv::applyColorMap(gray, out, cv::COLORMAP_VIRIDIS);

  std::vector<uchar> buf;
  if (!cv::imencode(".png", out, buf)) throw IoError("cannot encode score map");
  atomic_write(path, std::span<const unsigned char>(buf.data(), buf.size()));
  return path;
}

namespace {

std::vector<std::pair<std::string, fs::path>> collect_images(const fs::path& dir) {
  std::vector<std::pair<std::string, fs::path>> out;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string name = e.path().filename().string();
    if (!name.ends_with(".png") || name.ends_with(".mask.png") || name.front() == '.') continue;
    fs::path rel = fs::relative(e.path(), dir);
    rel.replace_extension();
    out.emplace_back(rel.generic_string(), e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.8f", v);
  return buf;
}

}  // namespace

AssessSummary batch_assess(const fs::path& dir, Discriminator& discriminator, int resolution,
                           const fs::path& out_csv, const AssessOptions& opts) {
  AssessSummary summary;
  summary.resolution = resolution;
  std::ostringstream csv, masked;
  csv << "# polarity: higher\n# resolution: " << resolution << "\nid,qs\n";
  masked << "# polarity: higher\n# resolution: " << resolution << "\nid,qs_face\n";

  for (const auto& [id, path] : collect_images(dir)) {
    AssessRow row;
    row.id = id;
    try {
      ImageBuffer img = read_image_png(path);
      const int h = img.height(), w = img.width();
      img = resize_image(img, resolution, resolution);
      const ScoreMap map = score_map(img, discriminator);
      row.qs = quality_score(map, id).value;
      if (opts.maps_dir) {
        fs::path stem = *opts.maps_dir / id;
        fs::create_directories(stem.parent_path());
        export_map(map, stem, opts.style);
      }
      fs::path mask_path = path;
      mask_path.replace_extension(".mask.png");
      if (opts.masked_csv && fs::exists(mask_path)) {
        MaskMap mask = read_mask_png(mask_path);
        if (mask.height() != h || mask.width() != w) mask = resize_mask(mask, h, w);
        mask = resize_mask(mask, resolution, resolution);
        masked << id << ',' << format_score(masked_quality_score(map, mask)) << '\n';
      }
    } catch (const Error& e) {
      row.error = e.what();
      ++summary.failures;
    }
    csv << id << ',' << (row.qs ? format_score(*row.qs) : std::string()) << '\n';
    summary.rows.push_back(std::move(row));
  }
  atomic_write(out_csv, csv.str());
  if (opts.masked_csv) atomic_write(*opts.masked_csv, masked.str());
  return summary;
}

AssessSummary batch_assess(const fs::path& dir, const fs::path& checkpoint, const fs::path& out_csv,
                           const AssessOptions& opts) {
  LoadedDiscriminator loaded = load_discriminator(checkpoint);
  return batch_assess(dir, loaded.discriminator, loaded.config.resolution, out_csv, opts);
}

}  // namespace ifqa
