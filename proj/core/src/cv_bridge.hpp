#pragma once

// Conversions between ifqa rasters and OpenCV matrices. Internal to core.

#include <opencv2/core.hpp>

#include "ifqa/facedata.hpp"

namespace ifqa::detail {

/// CV_32FC3 in RGB channel order (no copy-back semantics; always copies).
cv::Mat to_mat_f32(const ImageBuffer& img);
/// Accepts CV_32FC3 (RGB). Byte255 inputs are rounded and clamped.
ImageBuffer from_mat_f32(const cv::Mat& m, ValueDomain domain, ImageRole role);

/// CV_8UC3 in BGR order, ready for the codecs. Requires byte255.
cv::Mat to_mat_bgr8(const ImageBuffer& img);
ImageBuffer from_mat_bgr8(const cv::Mat& m, ImageRole role);

cv::Mat to_mat_u8(const MaskMap& mask);

}  // namespace ifqa::detail
