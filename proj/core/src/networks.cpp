#include "ifqa/networks.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

#include "ifqa/errors.hpp"
#include "ifqa/fsutil.hpp"

namespace nn = torch::nn;
namespace F = torch::nn::functional;
using json = nlohmann::json;

namespace ifqa {

const char* to_string(DiscriminatorHead h) noexcept {
  return h == DiscriminatorHead::PerPixel ? "per_pixel" : "single_output";
}

const char* to_string(NormKind n) noexcept { return n == NormKind::Instance ? "instance" : "none"; }

// ---------------------------------------------------------------------------
// NetConfig
// ---------------------------------------------------------------------------

NetConfig NetConfig::toy() {
  NetConfig c;
  c.resolution = 64;
  c.base_width = 16;
  c.depth_down = 3;
  c.depth_up = 4;
  c.disc_width = 8;
  c.disc_block_convs = 1;
  c.feature_width = 8;
  c.feature_convs = 1;
  return c;
}

void NetConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("net config: " + m); };
  if (resolution <= 0) fail("resolution must be positive");
  if (base_width < 1 || disc_width < 1 || feature_width < 1) fail("widths must be >= 1");
  if (depth_down < 1 || depth_down > 10) fail("depth_down must lie in [1,10]");
  if (depth_up != depth_down + 1) fail("depth_up must equal depth_down + 1");
  if (resolution % (1 << depth_down) != 0) {
    fail("resolution " + std::to_string(resolution) + " is not divisible by 2^" + std::to_string(depth_down));
  }
  if (resolution % 16 != 0) fail("discriminator needs resolution divisible by 16");
  if (disc_block_convs < 1) fail("disc_block_convs must be >= 1");
  if (feature_convs < 0) fail("feature_convs must be >= 0");
  if (feature_stages < 1 || feature_stages > 5) fail("feature_stages must lie in [1,5]");
  if ((resolution >> feature_stages) < 1) fail("resolution too small for the feature pyramid");
}

std::string NetConfig::to_json() const {
  json j = {{"resolution", resolution},
            {"base_width", base_width},
            {"depth_down", depth_down},
            {"depth_up", depth_up},
            {"discriminator_head", to_string(discriminator_head)},
            {"skip_connections", skip_connections},
            {"generator_norm", to_string(generator_norm)},
            {"disc_width", disc_width},
            {"disc_block_convs", disc_block_convs},
            {"feature_width", feature_width},
            {"feature_convs", feature_convs},
            {"feature_stages", feature_stages},
            {"feature_max_pool", feature_max_pool},
            {"feature_weights", feature_weights}};
  return j.dump();
}

NetConfig NetConfig::from_json(const std::string& text) {
  NetConfig c;
  try {
    const json j = json::parse(text);
    c.resolution = j.at("resolution");
    c.base_width = j.at("base_width");
    c.depth_down = j.at("depth_down");
    c.depth_up = j.at("depth_up");
    c.discriminator_head = j.at("discriminator_head") == "single_output" ? DiscriminatorHead::SingleOutput
                                                                         : DiscriminatorHead::PerPixel;
    c.skip_connections = j.at("skip_connections");
    c.generator_norm = j.at("generator_norm") == "instance" ? NormKind::Instance : NormKind::None;
    c.disc_width = j.at("disc_width");
    c.disc_block_convs = j.at("disc_block_convs");
    c.feature_width = j.at("feature_width");
    c.feature_convs = j.at("feature_convs");
    c.feature_stages = j.at("feature_stages");
    c.feature_max_pool = j.at("feature_max_pool");
    c.feature_weights = j.value("feature_weights", std::string());
  } catch (const json::exception& e) {
    throw LoadError(std::string("malformed net config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// ResBlock
// ---------------------------------------------------------------------------

namespace {

nn::Conv2d conv3x3(int in, int out) { return nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(1).padding(1)); }
nn::Conv2d conv1x1(int in, int out) { return nn::Conv2d(nn::Conv2dOptions(in, out, 1)); }

torch::Tensor lrelu(const torch::Tensor& x) { return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2)); }

torch::Tensor upsample2(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kNearest));
}

torch::Tensor avgpool2(const torch::Tensor& x) { return F::avg_pool2d(x, F::AvgPool2dFuncOptions(2)); }

}  // namespace

ResBlockImpl::ResBlockImpl(int in_channels, int out_channels, Resample resample, NormKind norm, bool norm_input)
    : resample_(resample) {
  if (norm == NormKind::Instance) {
    if (norm_input) {
      norm1_ = register_module("norm1", nn::InstanceNorm2d(nn::InstanceNorm2dOptions(in_channels).affine(true)));
    }
    norm2_ = register_module("norm2", nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out_channels).affine(true)));
  }
  conv1_ = register_module("conv1", conv3x3(in_channels, out_channels));
  conv2_ = register_module("conv2", conv3x3(out_channels, out_channels));
  if (in_channels != out_channels) shortcut_ = register_module("shortcut", conv1x1(in_channels, out_channels));
}

torch::Tensor ResBlockImpl::forward(const torch::Tensor& x) {
  torch::Tensor skip = resample_ == Resample::Up ? upsample2(x) : x;
  if (shortcut_) skip = shortcut_->forward(skip);
  if (resample_ == Resample::Down) skip = avgpool2(skip);

  torch::Tensor h = norm1_ ? norm1_->forward(x) : x;
  h = lrelu(h);
  if (resample_ == Resample::Up) h = upsample2(h);
  h = conv1_->forward(h);
  if (norm2_) h = norm2_->forward(h);
  h = conv2_->forward(lrelu(h));
  if (resample_ == Resample::Down) h = avgpool2(h);
  return h + skip;
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

GeneratorImpl::GeneratorImpl(const NetConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const int depth = cfg.depth_down;
  std::vector<int> ch(depth);
  for (int i = 0; i < depth; ++i) ch[i] = cfg.base_width << i;

  int in = 3;
  for (int i = 0; i < depth; ++i) {
    // Normalizing the raw RGB input would discard its colour statistics.
    encoder_->push_back(ResBlock(in, ch[i], Resample::Down, cfg.generator_norm, /*norm_input=*/i > 0));
    in = ch[i];
  }
  for (int j = 0; j <= depth; ++j) {
    int block_in, block_out;
    if (j == 0) {
      block_in = ch[depth - 1];
    } else if (j <= depth - 1) {
      block_in = ch[depth - 1 - j] * (cfg.skip_connections ? 2 : 1);
    } else {
      block_in = cfg.base_width;
    }
    if (j <= depth - 2) {
      block_out = ch[depth - 2 - j];
    } else if (j == depth - 1) {
      block_out = cfg.base_width;
    } else {
      block_out = 3;
    }
    const Resample rs = j < depth ? Resample::Up : Resample::None;
    const NormKind norm = j < depth ? cfg.generator_norm : NormKind::None;
    decoder_->push_back(ResBlock(block_in, block_out, rs, norm));
  }
  register_module("encoder", encoder_);
  register_module("decoder", decoder_);
}

std::vector<torch::Tensor> GeneratorImpl::encode(const torch::Tensor& x) {
  std::vector<torch::Tensor> feats;
  torch::Tensor h = x;
  for (const auto& blk : *encoder_) {
    h = blk->as<ResBlock>()->forward(h);
    feats.push_back(h);
  }
  return feats;
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& x) {
  const auto feats = encode(x);
  const int depth = cfg_.depth_down;
  torch::Tensor h = feats.back();
  for (int j = 0; j <= depth; ++j) {
    if (cfg_.skip_connections && j >= 1 && j <= depth - 1) h = torch::cat({h, feats[depth - 1 - j]}, 1);
    h = decoder_[j]->as<ResBlock>()->forward(h);
  }
  return torch::tanh(h);
}

// ---------------------------------------------------------------------------
// Discriminator
// ---------------------------------------------------------------------------

namespace {

/// VGG-style stack of 3x3 conv + lrelu followed by 2x average pooling.
class ConvStackImpl : public nn::Module {
 public:
  ConvStackImpl(const std::vector<std::pair<int, int>>& convs) {
    for (const auto& [in, out] : convs) convs_->push_back(conv3x3(in, out));
    register_module("convs", convs_);
  }
  torch::Tensor forward(torch::Tensor x) {
    for (const auto& c : *convs_) x = lrelu(c->as<nn::Conv2d>()->forward(x));
    return avgpool2(x);
  }

 private:
  nn::ModuleList convs_;
};
TORCH_MODULE(ConvStack);

std::vector<std::pair<int, int>> block_convs(int in, int out, int n) {
  std::vector<std::pair<int, int>> v;
  for (int i = 0; i < n; ++i) v.emplace_back(i == 0 ? in : out, out);
  return v;
}

}  // namespace

DiscriminatorImpl::DiscriminatorImpl(const NetConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const int w = cfg.disc_width;
  const int n = cfg.disc_block_convs;
  // Block 1 merges VGG-19 blocks 1 and 2: the first half of its convs run at
  // width w, the rest at 2w, with a single pooling.
  std::vector<std::pair<int, int>> first;
  const int half = n / 2;
  for (int i = 0; i < n; ++i) {
    const int out = i < half ? w : 2 * w;
    first.emplace_back(i == 0 ? 3 : first.back().second, out);
  }
  encoder_->push_back(ConvStack(first));
  encoder_->push_back(ConvStack(block_convs(2 * w, 4 * w, n)));
  encoder_->push_back(ConvStack(block_convs(4 * w, 8 * w, n)));
  encoder_->push_back(ConvStack(block_convs(8 * w, 8 * w, n)));
  register_module("encoder", encoder_);

  if (cfg.discriminator_head == DiscriminatorHead::PerPixel) {
    const int s = cfg.skip_connections ? 2 : 1;
    decoder_->push_back(ResBlock(8 * w, 8 * w, Resample::Up, NormKind::None));
    decoder_->push_back(ResBlock(8 * w * s, 4 * w, Resample::Up, NormKind::None));
    decoder_->push_back(ResBlock(4 * w * s, 2 * w, Resample::Up, NormKind::None));
    decoder_->push_back(ResBlock(2 * w * s, w, Resample::Up, NormKind::None));
    decoder_->push_back(conv3x3(w, 1));
    register_module("decoder", decoder_);
  } else {
    scalar_head_ = register_module("scalar_head", nn::Linear(8 * w, 1));
  }
}

std::vector<torch::Tensor> DiscriminatorImpl::encode(const torch::Tensor& x) {
  std::vector<torch::Tensor> feats;
  torch::Tensor h = x;
  for (const auto& blk : *encoder_) {
    h = blk->as<ConvStack>()->forward(h);
    feats.push_back(h);
  }
  return feats;
}

torch::Tensor DiscriminatorImpl::logits(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != 3) throw ShapeError("discriminator expects N x 3 x H x W input");
  if (x.size(2) % 16 != 0 || x.size(3) % 16 != 0) {
    throw ShapeError("discriminator input extent must be divisible by 16");
  }
  const auto feats = encode(x);
  if (cfg_.discriminator_head == DiscriminatorHead::SingleOutput) {
    return scalar_head_->forward(feats.back().mean({2, 3}));
  }
  torch::Tensor h = feats.back();
  for (int j = 0; j < 4; ++j) {
    if (cfg_.skip_connections && j >= 1) h = torch::cat({h, feats[3 - j]}, 1);
    h = decoder_[j]->as<ResBlock>()->forward(h);
  }
  return decoder_[4]->as<nn::Conv2d>()->forward(lrelu(h));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) { return torch::sigmoid(logits(x)); }

nn::Module& DiscriminatorImpl::output_layer() {
  if (cfg_.discriminator_head == DiscriminatorHead::SingleOutput) return *scalar_head_;
  return *decoder_[4];
}

// ---------------------------------------------------------------------------
// Feature extractor
// ---------------------------------------------------------------------------

FeatureExtractorImpl::FeatureExtractorImpl(const NetConfig& cfg) : max_pool_(cfg.feature_max_pool) {
  cfg.validate();
  constexpr int kVggConvs[5] = {2, 2, 4, 4, 4};
  constexpr int kVggMult[5] = {1, 2, 4, 8, 8};
  int in = 3;
  for (int s = 0; s < cfg.feature_stages; ++s) {
    const int out = cfg.feature_width * kVggMult[s];
    const int n = cfg.feature_convs == 0 ? kVggConvs[s] : cfg.feature_convs;
    nn::Sequential stage;
    for (int i = 0; i < n; ++i) {
      stage->push_back(conv3x3(i == 0 ? in : out, out));
      stage->push_back(nn::ReLU());
    }
    stages_->push_back(stage);
    in = out;
  }
  register_module("stages", stages_);
  // ImageNet statistics; inputs arrive in [-1,1].
  mean_ = register_buffer("mean", torch::tensor({0.485, 0.456, 0.406}).view({1, 3, 1, 1}));
  std_ = register_buffer("std", torch::tensor({0.229, 0.224, 0.225}).view({1, 3, 1, 1}));
}

std::vector<torch::Tensor> FeatureExtractorImpl::forward(const torch::Tensor& x) {
  torch::Tensor h = ((x + 1) * 0.5 - mean_) / std_;
  std::vector<torch::Tensor> feats;
  for (const auto& stage : *stages_) {
    h = stage->as<nn::Sequential>()->forward(h);
    h = max_pool_ ? F::max_pool2d(h, F::MaxPool2dFuncOptions(2)) : avgpool2(h);
    feats.push_back(h);
  }
  return feats;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

void init_parameters(nn::Module& module, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  for (const auto& item : module.named_parameters(/*recurse=*/true)) {
    const std::string& name = item.key();
    torch::Tensor p = item.value();
    const bool is_bias = name.ends_with("bias");
    const bool is_norm = name.find("norm") != std::string::npos;
    if (is_norm) {
      p.fill_(is_bias ? 0.0 : 1.0);
    } else if (is_bias) {
      p.zero_();
    } else {
      // He-uniform for leaky ReLU (slope 0.2).
      const double fan_in = static_cast<double>(p.numel() / p.size(0));
      const double bound = std::sqrt(6.0 / ((1.0 + 0.04) * fan_in));
      p.uniform_(-bound, bound, gen);
    }
  }
}

std::int64_t count_parameters(const nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters()) n += p.numel();
  return n;
}

Generator build_generator(const NetConfig& cfg, std::uint64_t seed) {
  Generator g(cfg);
  init_parameters(*g, seed);
  return g;
}

Discriminator build_discriminator(const NetConfig& cfg, std::uint64_t seed) {
  Discriminator d(cfg);
  init_parameters(*d, seed);
  return d;
}

FeatureExtractor build_feature_extractor(const NetConfig& cfg, std::uint64_t seed) {
  FeatureExtractor f(cfg);
  if (cfg.feature_weights.empty()) {
    init_parameters(*f, seed);
  } else {
    torch::serialize::InputArchive archive;
    try {
      archive.load_from(cfg.feature_weights);
    } catch (const c10::Error& e) {
      throw LoadError("cannot read feature weights " + cfg.feature_weights);
    }
    torch::NoGradGuard no_grad;
    for (auto& item : f->named_parameters(true)) {
      torch::Tensor loaded;
      if (!archive.try_read(item.key(), loaded)) {
        throw LoadError("feature weights lack tensor '" + item.key() + "'");
      }
      if (loaded.sizes() != item.value().sizes()) {
        throw LoadError("feature weights tensor '" + item.key() + "' has shape mismatch");
      }
      item.value().copy_(loaded);
    }
  }
  for (auto& p : f->parameters()) p.set_requires_grad(false);
  f->eval();
  return f;
}

void save_module_weights(nn::Module& module, const std::filesystem::path& path) {
  atomic_write_with(path, [&](const std::filesystem::path& tmp) {
    torch::serialize::OutputArchive archive;
    for (const auto& item : module.named_parameters(true)) archive.write(item.key(), item.value());
    archive.save_to(tmp.string());
  });
}

// ---------------------------------------------------------------------------
// Raster <-> tensor
// ---------------------------------------------------------------------------

torch::Tensor images_to_tensor(std::span<const ImageBuffer> images) {
  if (images.empty()) throw ParameterError("empty image batch");
  const int h = images[0].height(), w = images[0].width();
  torch::Tensor out = torch::empty({static_cast<std::int64_t>(images.size()), 3, h, w}, torch::kFloat32);
  auto acc = out.accessor<float, 4>();
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    if (img.height() != h || img.width() != w) throw ShapeError("batch images must share one shape");
    const bool bytes = img.domain() == ValueDomain::Byte255;
    auto v = img.values();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          const float s = v[(static_cast<std::size_t>(y) * w + x) * 3 + c];
          acc[n][c][y][x] = bytes ? static_cast<float>(static_cast<double>(s) / 127.5 - 1.0) : s;
        }
  }
  return out;
}

torch::Tensor image_to_tensor(const ImageBuffer& image) { return images_to_tensor(std::span(&image, 1)); }

ImageBuffer tensor_to_image(const torch::Tensor& batch, std::int64_t index, ImageRole role) {
  torch::Tensor t = batch[index].detach().to(torch::kFloat32).clamp(-1, 1).permute({1, 2, 0}).contiguous();
  const auto h = static_cast<int>(t.size(0)), w = static_cast<int>(t.size(1));
  const float* p = t.data_ptr<float>();
  return ImageBuffer(h, w, ValueDomain::SignedUnit, role, std::vector<float>(p, p + t.numel()));
}

torch::Tensor masks_to_tensor(std::span<const MaskMap> masks) {
  if (masks.empty()) throw ParameterError("empty mask batch");
  const int h = masks[0].height(), w = masks[0].width();
  torch::Tensor out = torch::empty({static_cast<std::int64_t>(masks.size()), 1, h, w}, torch::kFloat32);
  float* p = out.data_ptr<float>();
  for (const auto& m : masks) {
    if (m.height() != h || m.width() != w) throw ShapeError("batch masks must share one shape");
    for (auto v : m.values()) *p++ = static_cast<float>(v);
  }
  return out;
}

torch::Tensor mask_to_tensor(const MaskMap& mask) { return masks_to_tensor(std::span(&mask, 1)); }

torch::Tensor score_maps_to_tensor(std::span<const ScoreMap> maps) {
  if (maps.empty()) throw ParameterError("empty score-map batch");
  const int h = maps[0].height(), w = maps[0].width();
  torch::Tensor out = torch::empty({static_cast<std::int64_t>(maps.size()), 1, h, w}, torch::kFloat32);
  float* p = out.data_ptr<float>();
  for (const auto& m : maps) {
    if (m.height() != h || m.width() != w) throw ShapeError("batch score maps must share one shape");
    for (float v : m.values()) *p++ = v;
  }
  return out;
}

ScoreMap tensor_to_score_map(const torch::Tensor& batch, std::int64_t index) {
  torch::Tensor t = batch[index].detach().to(torch::kFloat32).clamp(0, 1).contiguous();
  if (t.dim() == 3) t = t[0];
  const auto h = static_cast<int>(t.size(0)), w = static_cast<int>(t.size(1));
  const float* p = t.contiguous().data_ptr<float>();
  return ScoreMap(h, w, std::vector<float>(p, p + t.numel()));
}

}  // namespace ifqa
