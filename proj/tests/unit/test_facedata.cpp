#include <gtest/gtest.h>

#include <fstream>

#include "ifqa/errors.hpp"
#include "ifqa/facedata.hpp"
#include "test_support.hpp"

using namespace ifqa;
using ifqa::testing::TempDir;

TEST(ImageBuffer, RejectsValuesOutsideDomain) {
  EXPECT_THROW(ImageBuffer(1, 1, ValueDomain::Byte255, ImageRole::HQ, {0, 256, 0}), DomainError);
  EXPECT_THROW(ImageBuffer(1, 1, ValueDomain::Byte255, ImageRole::HQ, {0, 1.5f, 0}), DomainError);
  EXPECT_THROW(ImageBuffer(1, 1, ValueDomain::SignedUnit, ImageRole::HQ, {0, 1.01f, 0}), DomainError);
  EXPECT_THROW(ImageBuffer(1, 2, ValueDomain::Byte255, ImageRole::HQ, {0, 0, 0}), ShapeError);
  EXPECT_NO_THROW(ImageBuffer(1, 1, ValueDomain::SignedUnit, ImageRole::LQ, {-1, 0, 1}));
}

TEST(MaskMap, BinaryOnly) {
  EXPECT_THROW(MaskMap(1, 2, {0, 2}), DomainError);
  MaskMap m(2, 2, {1, 0, 0, 1});
  EXPECT_EQ(m.area(), 2u);
  EXPECT_DOUBLE_EQ(m.area_fraction(), 0.5);
  EXPECT_EQ(m.complement(), MaskMap(2, 2, {0, 1, 1, 0}));
}

TEST(ScoreMap, RangeChecked) {
  EXPECT_THROW(ScoreMap(1, 1, {1.5f}), DomainError);
  EXPECT_THROW(ScoreMap(1, 1, {-0.1f}), DomainError);
  EXPECT_TRUE(ScoreMap::from_mask(MaskMap(1, 2, {0, 1})).is_binary());
  EXPECT_FALSE(ScoreMap(1, 1, {0.5f}).is_binary());
}

TEST(SignedUnit, Endpoints) {
  const auto img = ImageBuffer(1, 1, ValueDomain::Byte255, ImageRole::HQ, {0, 255, 128});
  const auto u = to_signed_unit(img);
  EXPECT_EQ(u.domain(), ValueDomain::SignedUnit);
  EXPECT_FLOAT_EQ(u.at(0, 0, 0), -1.0f);
  EXPECT_FLOAT_EQ(u.at(0, 0, 1), 1.0f);
  EXPECT_FLOAT_EQ(u.at(0, 0, 2), static_cast<float>(2.0 * 128 / 255 - 1));
}

TEST(SignedUnit, RoundTripIsIdentityOnAllBytes) {
  std::vector<float> v;
  for (int b = 0; b < 256; ++b) v.insert(v.end(), {float(b), float(255 - b), float(b)});
  const ImageBuffer img(16, 16, ValueDomain::Byte255, ImageRole::HQ, v);
  EXPECT_EQ(from_signed_unit(to_signed_unit(img)), img);
}

TEST(SignedUnit, StrictlyMonotone) {
  std::vector<float> v;
  for (int b = 0; b < 256; ++b) v.insert(v.end(), {float(b), float(b), float(b)});
  const auto u = to_signed_unit(ImageBuffer(1, 256, ValueDomain::Byte255, ImageRole::HQ, v));
  for (int x = 1; x < 256; ++x) EXPECT_LT(u.at(0, x - 1, 0), u.at(0, x, 0));
}

TEST(SignedUnit, WrongDomainRejected) {
  const auto b = ImageBuffer::filled(2, 2, ValueDomain::Byte255, ImageRole::HQ, 3);
  const auto u = ImageBuffer::filled(2, 2, ValueDomain::SignedUnit, ImageRole::HQ, 0);
  EXPECT_THROW(to_signed_unit(u), DomainError);
  EXPECT_THROW(from_signed_unit(b), DomainError);
}

TEST(SignedUnit, RoundsHalfAwayFromZero) {
  // 127.5 maps exactly to 0.0 in signed units; the return trip rounds up.
  const auto u = ImageBuffer(1, 1, ValueDomain::SignedUnit, ImageRole::HQ, {0.0f, -1.0f, 1.0f});
  const auto b = from_signed_unit(u);
  EXPECT_EQ(b.at(0, 0, 0), 128.0f);
  EXPECT_EQ(b.at(0, 0, 1), 0.0f);
  EXPECT_EQ(b.at(0, 0, 2), 255.0f);
}

TEST(Resize, MaskStaysBinaryAtEveryResolution) {
  Rng rng(3);
  const MaskMap m = ifqa::testing::random_mask(rng, 64, 64, 0.4);
  for (int r : kSynthResolutions) {
    const MaskMap out = resize_mask(m, r, r);
    EXPECT_EQ(out.height(), r);
    for (auto v : out.values()) EXPECT_LE(v, 1);
  }
}

TEST(Resize, SameSizeIsIdentity) {
  Rng rng(4);
  const auto img = ifqa::testing::random_byte_image(rng, 8, 8);
  EXPECT_EQ(resize_image(img, 8, 8), img);
}

TEST(Landmarks, BoxesAreDilatedBoundingBoxes) {
  std::vector<Point2> pts(68, Point2{50, 50});
  for (int i = 36; i < 42; ++i) pts[i] = {10.0 + i - 36, 20.0 + (i % 2) * 10};  // x 10..15, y 20..30
  for (int i = 42; i < 48; ++i) pts[i] = {60.0 + i - 42, 20.0 + (i % 2) * 10};
  for (int i = 27; i < 36; ++i) pts[i] = {40.0 + i - 27, 40.0 + (i - 27) * 2};
  for (int i = 48; i < 68; ++i) pts[i] = {30.0 + i - 48, 70.0 + (i % 3)};
  const RegionBoxSet set = regions_from_landmarks(pts, 100, 100);
  const RegionBox& le = set[Region::LeftEye];
  // Extent 5 x 10 px, dilated by 0.5 and 1 px per side.
  EXPECT_NEAR(le.x0, 9.5 / 100, 1e-12);
  EXPECT_NEAR(le.x1, 15.5 / 100, 1e-12);
  EXPECT_NEAR(le.y0, 19.0 / 100, 1e-12);
  EXPECT_NEAR(le.y1, 31.0 / 100, 1e-12);
  EXPECT_NO_THROW(set.validate());
  EXPECT_THROW(regions_from_landmarks(std::vector<Point2>(5), 100, 100), ParameterError);
}

TEST(Synth, EmptyAndUnsupported) {
  EXPECT_TRUE(synth_faces(7, 0, 64).empty());
  EXPECT_THROW(synth_faces(7, 2, 48), ConfigError);
}

TEST(Synth, Deterministic) {
  const auto a = synth_faces(7, 5, 64);
  const auto b = synth_faces(7, 5, 64);
  ASSERT_EQ(a.size(), 5u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].id, b[i].id);
    EXPECT_EQ(a[i].image, b[i].image);
    EXPECT_EQ(a[i].face_mask, b[i].face_mask);
    EXPECT_EQ(a[i].regions, b[i].regions);
  }
  // A prefix of a larger corpus is the smaller corpus.
  EXPECT_EQ(synth_faces(7, 8, 64)[4].image, a[4].image);
  EXPECT_NE(synth_faces(8, 1, 64)[0].image, a[0].image);
}

TEST(Synth, MaskFractionAndRegionCentres) {
  const auto faces = synth_faces(7, 100, 64);
  double total = 0;
  for (const auto& f : faces) {
    EXPECT_NO_THROW(f.validate());
    total += f.face_mask.area_fraction();
    for (Region r : kAllRegions) {
      const RegionBox& b = f.regions[r];
      const int cx = std::min(63, static_cast<int>(b.center_x() * 64));
      const int cy = std::min(63, static_cast<int>(b.center_y() * 64));
      EXPECT_EQ(f.face_mask.at(cy, cx), 1) << f.id << " " << region_name(r);
    }
  }
  const double mean = total / 100;
  EXPECT_GE(mean, 0.3);
  EXPECT_LE(mean, 0.8);
}

TEST(Synth, AllResolutionsValid) {
  for (int r : kSynthResolutions) {
    const auto f = synth_face(11, 0, r);
    EXPECT_EQ(f.image.height(), r);
    EXPECT_NO_THROW(f.validate());
  }
}

TEST(Dataset, EmptyDirectory) {
  TempDir dir;
  const LoadResult r = load_dataset(dir.path(), 64);
  EXPECT_TRUE(r.samples.empty());
  EXPECT_TRUE(r.errors.empty());
  EXPECT_EQ(r.warnings, 0u);
}

TEST(Dataset, SaveLoadRoundTripIsPixelIdentical) {
  TempDir dir;
  const auto faces = synth_faces(3, 20, 64);
  save_dataset(dir.path(), faces);
  const LoadResult r = load_dataset(dir.path(), 64);
  ASSERT_EQ(r.samples.size(), 20u);
  EXPECT_TRUE(r.errors.empty());
  for (std::size_t i = 0; i < faces.size(); ++i) {
    EXPECT_EQ(r.samples[i].id, faces[i].id);
    EXPECT_EQ(r.samples[i].image, faces[i].image);
    EXPECT_EQ(r.samples[i].face_mask, faces[i].face_mask);
    for (Region reg : kAllRegions) {
      EXPECT_NEAR(r.samples[i].regions[reg].x0, faces[i].regions[reg].x0, 1e-12);
      EXPECT_NEAR(r.samples[i].regions[reg].y1, faces[i].regions[reg].y1, 1e-12);
    }
  }
}

TEST(Dataset, MissingMaskIsPerSampleError) {
  TempDir dir;
  const auto faces = synth_faces(5, 4, 64);
  save_dataset(dir.path(), faces);
  std::filesystem::remove(dir / (faces[2].id + ".mask.png"));
  const LoadResult r = load_dataset(dir.path(), 64);
  EXPECT_EQ(r.samples.size(), 3u);
  ASSERT_EQ(r.errors.size(), 1u);
  EXPECT_EQ(r.errors[0].id, faces[2].id);
  EXPECT_NE(r.errors[0].reason.find("mask"), std::string::npos);
}

TEST(Dataset, CorruptImageIsSkippedWithWarning) {
  TempDir dir;
  const auto faces = synth_faces(5, 3, 64);
  save_dataset(dir.path(), faces);
  std::ofstream(dir / (faces[0].id + ".png"), std::ios::trunc) << "not a png";
  const LoadResult r = load_dataset(dir.path(), 64);
  EXPECT_EQ(r.samples.size(), 2u);
  EXPECT_EQ(r.warnings, 1u);
}

TEST(Dataset, ResizesOnLoad) {
  TempDir dir;
  save_dataset(dir.path(), synth_faces(5, 2, 64));
  const LoadResult r = load_dataset(dir.path(), 32);
  ASSERT_EQ(r.samples.size(), 2u);
  EXPECT_EQ(r.samples[0].image.height(), 32);
  EXPECT_EQ(r.samples[0].face_mask.width(), 32);
}

TEST(Dataset, SplitIsDeterministicPartition) {
  const auto faces = synth_faces(5, 40, 32);
  const auto a = split_dataset(faces, 0.95, 9);
  const auto b = split_dataset(faces, 0.95, 9);
  EXPECT_EQ(a.train.size() + a.validation.size(), 40u);
  EXPECT_EQ(a.validation.size(), 2u);
  for (std::size_t i = 0; i < a.validation.size(); ++i) EXPECT_EQ(a.validation[i].id, b.validation[i].id);
}
