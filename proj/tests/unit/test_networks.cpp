#include <gtest/gtest.h>

#include "ifqa/errors.hpp"
#include "ifqa/networks.hpp"
#include "test_support.hpp"

using namespace ifqa;
using ifqa::testing::TempDir;

namespace {

// Layer inventory of one residual block, counted by hand from its layout.
std::int64_t resblock_params(std::int64_t in, std::int64_t out, bool norm_in, bool norm_out) {
  std::int64_t n = 9 * in * out + out + 9 * out * out + out;
  if (in != out) n += in * out + out;
  if (norm_in) n += 2 * in;
  if (norm_out) n += 2 * out;
  return n;
}

torch::Tensor random_input(int n, int res, std::uint64_t seed) {
  auto g = at::make_generator<at::CPUGeneratorImpl>(seed);
  return torch::rand({n, 3, res, res}, g) * 2 - 1;
}

}  // namespace

TEST(NetConfig, Validation) {
  NetConfig c = NetConfig::toy();
  EXPECT_NO_THROW(c.validate());
  c.depth_up = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = NetConfig::toy();
  c.resolution = 72;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(build_generator(c, 0), ConfigError);
  EXPECT_NO_THROW(NetConfig::reference().validate());
}

TEST(NetConfig, JsonRoundTrip) {
  NetConfig c = NetConfig::toy();
  c.discriminator_head = DiscriminatorHead::SingleOutput;
  c.feature_max_pool = false;
  EXPECT_EQ(NetConfig::from_json(c.to_json()), c);
}

TEST(Generator, ToyShapeAndRange) {
  const NetConfig c = NetConfig::toy();
  Generator g = build_generator(c, 1);
  torch::NoGradGuard ng;
  const auto y = g->forward(random_input(2, 64, 3) * 5);  // inputs beyond [-1,1] too
  EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{2, 3, 64, 64}));
  EXPECT_LE(y.max().item<float>(), 1.0f);
  EXPECT_GE(y.min().item<float>(), -1.0f);
}

TEST(Generator, ToyParameterCountMatchesInventory) {
  const NetConfig c = NetConfig::toy();  // base 16, 3 down, 4 up, instance norm
  std::int64_t expected = 0;
  expected += resblock_params(3, 16, false, true);
  expected += resblock_params(16, 32, true, true);
  expected += resblock_params(32, 64, true, true);
  expected += resblock_params(64, 32, true, true);   // deepest, no skip
  expected += resblock_params(64, 16, true, true);   // 32 + 32 skip
  expected += resblock_params(32, 16, true, true);   // 16 + 16 skip
  expected += resblock_params(16, 3, false, false);  // output block, no norm
  EXPECT_EQ(count_parameters(*build_generator(c, 0)), expected);
}

TEST(Generator, ReferenceBottleneck) {
  Generator g = build_generator(NetConfig::reference(), 0);
  torch::NoGradGuard ng;
  const auto feats = g->encode(random_input(1, 256, 1));
  ASSERT_EQ(feats.size(), 5u);
  EXPECT_EQ(feats.back().sizes(), (std::vector<std::int64_t>{1, 1024, 8, 8}));
  EXPECT_EQ(feats.front().sizes(), (std::vector<std::int64_t>{1, 64, 128, 128}));
}

TEST(Discriminator, ReferencePerPixelMap) {
  Discriminator d = build_discriminator(NetConfig::reference(), 0);
  torch::NoGradGuard ng;
  const auto y = d->forward(random_input(1, 256, 2));
  EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{1, 1, 256, 256}));
  EXPECT_GT(y.min().item<float>(), 0.0f);
  EXPECT_LT(y.max().item<float>(), 1.0f);
}

TEST(Discriminator, FullyConvolutional) {
  Discriminator d = build_discriminator(NetConfig::toy(), 0);
  torch::NoGradGuard ng;
  for (int res : {16, 32, 64, 128, 256}) {
    const auto y = d->forward(random_input(1, res, res));
    EXPECT_EQ(y.size(2), res);
    EXPECT_EQ(y.size(3), res);
  }
  EXPECT_THROW(d->forward(random_input(1, 40, 1)), ShapeError);
  EXPECT_THROW(d->forward(torch::zeros({1, 1, 64, 64})), ShapeError);
}

TEST(Discriminator, SingleOutputHead) {
  NetConfig c = NetConfig::toy();
  c.discriminator_head = DiscriminatorHead::SingleOutput;
  Discriminator d = build_discriminator(c, 0);
  torch::NoGradGuard ng;
  const auto y = d->forward(random_input(3, 64, 4));
  EXPECT_EQ(y.sizes(), (std::vector<std::int64_t>{3, 1}));
  EXPECT_GT(y.min().item<float>(), 0.0f);
  EXPECT_LT(y.max().item<float>(), 1.0f);
}

TEST(Discriminator, ReferenceEncoderLadder) {
  // 128 -> 256 -> 512 -> 512 channels per the VGG split.
  const NetConfig c = NetConfig::reference();
  Discriminator d = build_discriminator(c, 0);
  std::vector<std::int64_t> widths;
  for (const auto& p : d->named_parameters()) {
    if (p.key().rfind("encoder.", 0) == 0 && p.key().find("bias") != std::string::npos) widths.push_back(p.value().size(0));
  }
  ASSERT_EQ(widths.size(), 16u);
  EXPECT_EQ(widths[3], 128);
  EXPECT_EQ(widths[7], 256);
  EXPECT_EQ(widths[11], 512);
  EXPECT_EQ(widths[15], 512);
}

TEST(FeatureExtractor, FiveHalvingStages) {
  NetConfig c = NetConfig::reference();
  c.feature_width = 8;  // shapes only
  FeatureExtractor f = build_feature_extractor(c, 0);
  EXPECT_EQ(f->stages(), 5);
  torch::NoGradGuard ng;
  const auto x = random_input(1, 256, 5);
  const auto feats = f->forward(x);
  ASSERT_EQ(feats.size(), 5u);
  std::int64_t size = 256;
  for (const auto& t : feats) {
    size /= 2;
    EXPECT_EQ(t.size(2), size);
  }
  const auto again = f->forward(x);
  for (std::size_t i = 0; i < feats.size(); ++i) EXPECT_TRUE(torch::equal(feats[i], again[i]));
  for (const auto& p : f->parameters()) EXPECT_FALSE(p.requires_grad());
}

TEST(Builders, DeterministicInSeed) {
  const NetConfig c = NetConfig::toy();
  auto pa = build_discriminator(c, 9)->parameters();
  auto pb = build_discriminator(c, 9)->parameters();
  auto pc = build_discriminator(c, 10)->parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_TRUE(torch::equal(pa[i], pb[i]));
    any_diff = any_diff || !torch::equal(pa[i], pc[i]);
  }
  EXPECT_TRUE(any_diff);
}

TEST(FeatureExtractor, WeightFileRoundTripAndMismatch) {
  TempDir dir;
  NetConfig c = NetConfig::toy();
  FeatureExtractor src = build_feature_extractor(c, 77);
  save_module_weights(*src, dir / "feat.pt");

  c.feature_weights = (dir / "feat.pt").string();
  FeatureExtractor loaded = build_feature_extractor(c, 1);
  auto a = src->parameters(), b = loaded->parameters();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(torch::equal(a[i], b[i]));

  NetConfig wider = c;
  wider.feature_width = 16;
  EXPECT_THROW(build_feature_extractor(wider, 1), LoadError);
  wider.feature_width = 8;
  wider.feature_weights = (dir / "missing.pt").string();
  EXPECT_THROW(build_feature_extractor(wider, 1), LoadError);
}

TEST(TensorBridge, ImageRoundTrip) {
  Rng rng(1);
  const auto img = ifqa::testing::random_byte_image(rng, 16, 16);
  const auto t = image_to_tensor(img);
  EXPECT_EQ(t.sizes(), (std::vector<std::int64_t>{1, 3, 16, 16}));
  EXPECT_EQ(from_signed_unit(tensor_to_image(t, 0, ImageRole::HQ)), img);
}
