#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ifqa/facedata.hpp"
#include "ifqa/networks.hpp"

namespace ifqa {

struct QualityScore {
  double value = 0;
  std::string id;
};

/// Per-pixel realness map of one image. Byte255 inputs are converted to the
/// signed-unit domain first. The discriminator runs in eval mode without
/// gradients.
ScoreMap score_map(const ImageBuffer& img, Discriminator& discriminator);

/// Mean over all pixels, background included.
QualityScore quality_score(const ScoreMap& map, std::string id = {});

/// Mean over face pixels only. Not part of the published metric; reported
/// alongside it when a mask is available.
double masked_quality_score(const ScoreMap& map, const MaskMap& face_mask);

enum class MapStyle { Gray, Color };

/// Writes `<stem>_qs<QS to 4 decimals>.png` next to `stem` and returns the
/// path. Gray stores round(255 * score); Color applies the viridis colormap.
std::filesystem::path export_map(const ScoreMap& map, const std::filesystem::path& stem, MapStyle style);

struct AssessOptions {
  std::optional<std::filesystem::path> maps_dir;
  MapStyle style = MapStyle::Gray;
  /// Optional second CSV of face-masked means for images with a sidecar mask.
  std::optional<std::filesystem::path> masked_csv;
};

struct AssessRow {
  std::string id;
  std::optional<double> qs;
  std::string error;
};

struct AssessSummary {
  std::vector<AssessRow> rows;
  std::size_t failures = 0;
  int resolution = 0;
};

/// Scores every `.png` under `dir` (recursively, masks excluded) with the
/// checkpoint's discriminator. Ids are slash-separated relative paths without
/// extension; rows are sorted by id. Images are resized to the checkpoint
/// resolution. Unreadable images produce a row with an empty score.
AssessSummary batch_assess(const std::filesystem::path& dir, const std::filesystem::path& checkpoint,
                           const std::filesystem::path& out_csv, const AssessOptions& opts = {});

/// Same as batch_assess with an already-loaded discriminator.
AssessSummary batch_assess(const std::filesystem::path& dir, Discriminator& discriminator, int resolution,
                           const std::filesystem::path& out_csv, const AssessOptions& opts = {});

}  // namespace ifqa
