#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "ifqa/degradation.hpp"
#include "ifqa/facedata.hpp"
#include "ifqa/networks.hpp"
#include "ifqa/objectives.hpp"
#include "ifqa/random.hpp"

namespace ifqa {

inline constexpr const char* kCheckpointFormat = "ifqa-ckpt-1";

enum class Augmentation { None, CutMix, Fprs };
const char* to_string(Augmentation a) noexcept;

struct TrainConfig {
  NetConfig net = NetConfig::toy();
  LossWeights weights;
  PixelNorm pixel_norm = PixelNorm::MeanSquared;
  int steps = 2000;
  int batch_size = 8;
  double lr_g = 1e-4;
  double lr_d = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double fprs_probability = 0.5;
  Augmentation augmentation = Augmentation::Fprs;
  bool use_face_mask = true;
  std::uint64_t seed = 0;
  DegradationRanges degradation;
  int checkpoint_every = 500;
  /// Parallel degradation workers; 0 defers to IFQA_NUM_WORKERS (default 1).
  int workers = 0;

  /// Throws ConfigError when a field is out of range.
  void validate() const;

  /// Flat JSON object of every field.
  std::string to_json() const;
  /// Accepts a flat JSON object holding any subset of the keys emitted by
  /// to_json(); unknown keys and ill-typed values are ConfigErrors.
  static TrainConfig from_json(const std::string& text, TrainConfig base);
  static TrainConfig from_json(const std::string& text);
  static TrainConfig from_file(const std::filesystem::path& path);
};

struct MetricsRecord {
  std::int64_t step = 0;
  double d_loss = 0;
  double g_total = 0;
  double g_adv = 0;
  double g_pix = 0;
  double g_perc = 0;
  double d_real_mean = 0;
  double d_fake_mean = 0;
  int mixed_images = 0;

  std::string to_json() const;
  bool operator==(const MetricsRecord&) const = default;
};

/// Everything the loop mutates. Owned exclusively by the training thread.
struct TrainState {
  TrainConfig config;
  Generator generator{nullptr};
  Discriminator discriminator{nullptr};
  FeatureExtractor features{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_g;
  std::unique_ptr<torch::optim::Adam> opt_d;
  std::int64_t step = 0;
  Rng rng;
  std::vector<MetricsRecord> history;
  /// Shuffled epoch order over the dataset and the position within it.
  std::vector<std::int64_t> order;
  std::size_t cursor = 0;

  static TrainState create(const TrainConfig& config);
};

/// One region-swap or CutMix draw for a batch entry.
struct MixPlan {
  std::size_t index = 0;
  MaskMap mask;
  /// Swap against the restored output instead of the degraded input.
  bool against_rf = false;
  /// Fprs emits both complementary images; CutMix only the one with the
  /// foreign patch inside M.
  bool both = true;
};

/// Degraded inputs and supervision for one step, before any network runs.
struct PreparedBatch {
  std::vector<std::string> ids;
  torch::Tensor hq;           // N x 3 x H x W
  torch::Tensor lq;           // N x 3 x H x W
  torch::Tensor real_target;  // N x 1 x H x W (face mask, or ones)
  std::vector<MaskMap> target_masks;
  std::vector<DegradationParams> params;
  std::vector<MixPlan> mixes;
};

/// Draws degradation parameters and mix plans from `state.rng`.
PreparedBatch prepare_batch(std::span<const FaceSample> samples, TrainState& state);

struct DiscriminatorPools {
  torch::Tensor real;
  torch::Tensor real_target;
  torch::Tensor fake;
  int mixed_images = 0;
};

/// Real pool: HQ plus mixed images with their pixel targets. Fake pool: LQ
/// plus the detached restoration.
DiscriminatorPools make_pools(const PreparedBatch& batch, const torch::Tensor& rf_detached, bool single_output);

torch::Tensor discriminator_objective(Discriminator& d, const DiscriminatorPools& pools);

struct StepOptions {
  std::optional<std::filesystem::path> dump_fprs_dir;
};

/// One D update then one G update.
MetricsRecord train_step(std::span<const FaceSample> batch, TrainState& state, const StepOptions& opts = {});
MetricsRecord train_on(const PreparedBatch& batch, TrainState& state, const StepOptions& opts = {});

// -- checkpoints ------------------------------------------------------------

void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

struct LoadedDiscriminator {
  NetConfig config;
  Discriminator discriminator{nullptr};
  std::string format_version;
};
/// Reads only what assessment needs.
LoadedDiscriminator load_discriminator(const std::filesystem::path& path);

// -- loop -------------------------------------------------------------------

struct FitOptions {
  std::filesystem::path out_dir;
  std::optional<std::filesystem::path> resume_from;
  /// Checked at step boundaries; when set the loop checkpoints and returns.
  const std::atomic<bool>* stop = nullptr;
  std::optional<std::filesystem::path> dump_fprs_dir;
  std::function<void(const MetricsRecord&)> on_step;
};

/// Runs until `config.steps`, writing `metrics.jsonl`, periodic
/// `ckpt_<step>.pt` and `final.pt` under out_dir. Returns the last
/// checkpoint written.
std::filesystem::path fit(const TrainConfig& config, std::span<const FaceSample> dataset, const FitOptions& opts);

int resolve_workers(int configured);

}  // namespace ifqa
