#include "ifqa/trainer.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ifqa/errors.hpp"
#include "ifqa/fprs.hpp"
#include "ifqa/fsutil.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ifqa {

const char* to_string(Augmentation a) noexcept {
  switch (a) {
    case Augmentation::None: return "none";
    case Augmentation::CutMix: return "cutmix";
    case Augmentation::Fprs: return "fprs";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// TrainConfig
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  net.validate();
  weights.validate();
  degradation.validate();
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_g > 0 && lr_d > 0)) throw ConfigError("learning rates must be > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw ConfigError("adam betas must lie in [0,1)");
  if (!(fprs_probability >= 0 && fprs_probability <= 1)) throw ConfigError("fprs_probability must lie in [0,1]");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (net.discriminator_head == DiscriminatorHead::SingleOutput && augmentation != Augmentation::None) {
    throw ConfigError("a single-output discriminator has no pixel targets; use augmentation=none");
  }
}

namespace {

template <class T>
T as(const json& v, const std::string& key) {
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError("config key '" + key + "' expects a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError("config key '" + key + "' expects an integer");
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError("config key '" + key + "' expects a number");
  } else {
    if (!v.is_string()) throw ConfigError("config key '" + key + "' expects a string");
  }
  return v.get<T>();
}

using Setter = std::function<void(TrainConfig&, const json&, const std::string&)>;

template <class T, class F>
Setter field(F f) {
  return [f](TrainConfig& c, const json& v, const std::string& k) { f(c) = as<T>(v, k); };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"resolution", field<int>([](TrainConfig& c) -> int& { return c.net.resolution; })},
      {"base_width", field<int>([](TrainConfig& c) -> int& { return c.net.base_width; })},
      {"depth_down", field<int>([](TrainConfig& c) -> int& { return c.net.depth_down; })},
      {"depth_up", field<int>([](TrainConfig& c) -> int& { return c.net.depth_up; })},
      {"discriminator_head",
       [](TrainConfig& c, const json& v, const std::string& k) {
         const auto s = as<std::string>(v, k);
         if (s == "per_pixel") c.net.discriminator_head = DiscriminatorHead::PerPixel;
         else if (s == "single_output") c.net.discriminator_head = DiscriminatorHead::SingleOutput;
         else throw ConfigError("discriminator_head must be per_pixel or single_output");
       }},
      {"skip_connections", field<bool>([](TrainConfig& c) -> bool& { return c.net.skip_connections; })},
      {"generator_norm",
       [](TrainConfig& c, const json& v, const std::string& k) {
         const auto s = as<std::string>(v, k);
         if (s == "instance") c.net.generator_norm = NormKind::Instance;
         else if (s == "none") c.net.generator_norm = NormKind::None;
         else throw ConfigError("generator_norm must be instance or none");
       }},
      {"disc_width", field<int>([](TrainConfig& c) -> int& { return c.net.disc_width; })},
      {"disc_block_convs", field<int>([](TrainConfig& c) -> int& { return c.net.disc_block_convs; })},
      {"feature_width", field<int>([](TrainConfig& c) -> int& { return c.net.feature_width; })},
      {"feature_convs", field<int>([](TrainConfig& c) -> int& { return c.net.feature_convs; })},
      {"feature_stages", field<int>([](TrainConfig& c) -> int& { return c.net.feature_stages; })},
      {"feature_max_pool", field<bool>([](TrainConfig& c) -> bool& { return c.net.feature_max_pool; })},
      {"feature_weights", field<std::string>([](TrainConfig& c) -> std::string& { return c.net.feature_weights; })},
      {"lambda_pix", field<double>([](TrainConfig& c) -> double& { return c.weights.lambda_pix; })},
      {"lambda_vgg_style", field<double>([](TrainConfig& c) -> double& { return c.weights.lambda_vgg_style; })},
      {"pixel_norm",
       [](TrainConfig& c, const json& v, const std::string& k) {
         const auto s = as<std::string>(v, k);
         if (s == "mse") c.pixel_norm = PixelNorm::MeanSquared;
         else if (s == "l2") c.pixel_norm = PixelNorm::Euclidean;
         else throw ConfigError("pixel_norm must be mse or l2");
       }},
      {"steps", field<int>([](TrainConfig& c) -> int& { return c.steps; })},
      {"batch_size", field<int>([](TrainConfig& c) -> int& { return c.batch_size; })},
      {"lr_g", field<double>([](TrainConfig& c) -> double& { return c.lr_g; })},
      {"lr_d", field<double>([](TrainConfig& c) -> double& { return c.lr_d; })},
      {"beta1", field<double>([](TrainConfig& c) -> double& { return c.beta1; })},
      {"beta2", field<double>([](TrainConfig& c) -> double& { return c.beta2; })},
      {"fprs_probability", field<double>([](TrainConfig& c) -> double& { return c.fprs_probability; })},
      {"augmentation",
       [](TrainConfig& c, const json& v, const std::string& k) {
         const auto s = as<std::string>(v, k);
         if (s == "none") c.augmentation = Augmentation::None;
         else if (s == "cutmix") c.augmentation = Augmentation::CutMix;
         else if (s == "fprs") c.augmentation = Augmentation::Fprs;
         else throw ConfigError("augmentation must be none, cutmix or fprs");
       }},
      {"use_face_mask", field<bool>([](TrainConfig& c) -> bool& { return c.use_face_mask; })},
      {"seed", field<std::uint64_t>([](TrainConfig& c) -> std::uint64_t& { return c.seed; })},
      {"r_min", field<double>([](TrainConfig& c) -> double& { return c.degradation.r_min; })},
      {"r_max", field<double>([](TrainConfig& c) -> double& { return c.degradation.r_max; })},
      {"sigma_min", field<double>([](TrainConfig& c) -> double& { return c.degradation.sigma_min; })},
      {"sigma_max", field<double>([](TrainConfig& c) -> double& { return c.degradation.sigma_max; })},
      {"q_min", field<int>([](TrainConfig& c) -> int& { return c.degradation.q_min; })},
      {"q_max", field<int>([](TrainConfig& c) -> int& { return c.degradation.q_max; })},
      {"jpeg", field<bool>([](TrainConfig& c) -> bool& { return c.degradation.jpeg; })},
      {"blur_sigma_min", field<double>([](TrainConfig& c) -> double& { return c.degradation.blur_sigma_min; })},
      {"blur_sigma_max", field<double>([](TrainConfig& c) -> double& { return c.degradation.blur_sigma_max; })},
      {"motion_length_min", field<int>([](TrainConfig& c) -> int& { return c.degradation.motion_length_min; })},
      {"motion_length_max", field<int>([](TrainConfig& c) -> int& { return c.degradation.motion_length_max; })},
      {"checkpoint_every", field<int>([](TrainConfig& c) -> int& { return c.checkpoint_every; })},
      {"workers", field<int>([](TrainConfig& c) -> int& { return c.workers; })},
  };
  return table;
}

}  // namespace

std::string TrainConfig::to_json() const {
  json j = json::parse(net.to_json());
  j["lambda_pix"] = weights.lambda_pix;
  j["lambda_vgg_style"] = weights.lambda_vgg_style;
  j["pixel_norm"] = pixel_norm == PixelNorm::MeanSquared ? "mse" : "l2";
  j["steps"] = steps;
  j["batch_size"] = batch_size;
  j["lr_g"] = lr_g;
  j["lr_d"] = lr_d;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["fprs_probability"] = fprs_probability;
  j["augmentation"] = to_string(augmentation);
  j["use_face_mask"] = use_face_mask;
  j["seed"] = seed;
  j["r_min"] = degradation.r_min;
  j["r_max"] = degradation.r_max;
  j["sigma_min"] = degradation.sigma_min;
  j["sigma_max"] = degradation.sigma_max;
  j["q_min"] = degradation.q_min;
  j["q_max"] = degradation.q_max;
  j["jpeg"] = degradation.jpeg;
  j["blur_sigma_min"] = degradation.blur_sigma_min;
  j["blur_sigma_max"] = degradation.blur_sigma_max;
  j["motion_length_min"] = degradation.motion_length_min;
  j["motion_length_max"] = degradation.motion_length_max;
  j["checkpoint_every"] = checkpoint_every;
  j["workers"] = workers;
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) { return from_json(text, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const std::string& text, TrainConfig base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a flat JSON object");
  const auto& table = setters();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    if (value.is_structured()) throw ConfigError("config key '" + key + "' must hold a scalar");
    it->second(base, value, key);
  }
  base.validate();
  return base;
}

TrainConfig TrainConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string MetricsRecord::to_json() const {
  json j = {{"step", step},       {"d_loss", d_loss},           {"g_total", g_total},
            {"g_adv", g_adv},     {"g_pix", g_pix},             {"g_perc", g_perc},
            {"d_real", d_real_mean}, {"d_fake", d_fake_mean},   {"mixed", mixed_images}};
  return j.dump();
}

namespace {

MetricsRecord metrics_from_json(const json& j) {
  MetricsRecord m;
  m.step = j.at("step");
  m.d_loss = j.at("d_loss");
  m.g_total = j.at("g_total");
  m.g_adv = j.at("g_adv");
  m.g_pix = j.at("g_pix");
  m.g_perc = j.at("g_perc");
  m.d_real_mean = j.at("d_real");
  m.d_fake_mean = j.at("d_fake");
  m.mixed_images = j.at("mixed");
  return m;
}

torch::optim::AdamOptions adam_options(double lr, const TrainConfig& c) {
  return torch::optim::AdamOptions(lr).betas({c.beta1, c.beta2});
}

}  // namespace

// ---------------------------------------------------------------------------
// State
// ---------------------------------------------------------------------------

TrainState TrainState::create(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.config = config;
  s.generator = build_generator(config.net, derive_seed(config.seed, 1));
  s.discriminator = build_discriminator(config.net, derive_seed(config.seed, 2));
  s.features = build_feature_extractor(config.net, derive_seed(config.seed, 3));
  s.opt_g = std::make_unique<torch::optim::Adam>(s.generator->parameters(), adam_options(config.lr_g, config));
  s.opt_d = std::make_unique<torch::optim::Adam>(s.discriminator->parameters(), adam_options(config.lr_d, config));
  s.rng = Rng(derive_seed(config.seed, 4));
  return s;
}

int resolve_workers(int configured) {
  if (configured > 0) return configured;
  if (const char* env = std::getenv("IFQA_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// Batch preparation
// ---------------------------------------------------------------------------

PreparedBatch prepare_batch(std::span<const FaceSample> samples, TrainState& state) {
  if (samples.empty()) throw ParameterError("empty training batch");
  const TrainConfig& cfg = state.config;
  const int res = cfg.net.resolution;
  PreparedBatch b;

  std::vector<ImageBuffer> hq;
  for (const auto& s : samples) {
    if (s.image.height() != res || s.image.width() != res) {
      throw ShapeError("sample '" + s.id + "' does not match the network resolution");
    }
    b.ids.push_back(s.id);
    hq.push_back(s.image);
    b.target_masks.push_back(cfg.use_face_mask ? s.face_mask : MaskMap::filled(res, res, 1));
    b.params.push_back(sample_params(state.rng, cfg.degradation));
  }

  // Degradation is pure given params, so workers cannot perturb determinism.
  std::vector<ImageBuffer> lq(samples.size());
  const int workers = std::min<int>(resolve_workers(cfg.workers), static_cast<int>(samples.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < samples.size(); ++i) lq[i] = degrade(samples[i].image, b.params[i]);
  } else {
    std::vector<std::future<void>> jobs;
    for (int w = 0; w < workers; ++w) {
      jobs.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < samples.size(); i += workers) lq[i] = degrade(samples[i].image, b.params[i]);
      }));
    }
    for (auto& j : jobs) j.get();
  }

  b.hq = images_to_tensor(hq);
  b.lq = images_to_tensor(lq);
  b.real_target = masks_to_tensor(b.target_masks);

  if (cfg.augmentation != Augmentation::None) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (!bernoulli(state.rng, cfg.fprs_probability)) continue;
      MixPlan plan;
      plan.index = i;
      if (cfg.augmentation == Augmentation::Fprs) {
        const SwapSpec spec = random_swap_spec(state.rng);
        plan.mask = region_mask(samples[i].regions, spec, res, res);
        plan.both = true;
      } else {
        plan.mask = cutmix_mask(res, res, state.rng);
        plan.both = false;
      }
      plan.against_rf = bernoulli(state.rng, 0.5);
      b.mixes.push_back(std::move(plan));
    }
  }
  return b;
}

DiscriminatorPools make_pools(const PreparedBatch& batch, const torch::Tensor& rf_detached, bool single_output) {
  DiscriminatorPools p;
  std::vector<torch::Tensor> real{batch.hq}, targets{batch.real_target};
  for (const auto& mix : batch.mixes) {
    const auto i = static_cast<std::int64_t>(mix.index);
    const torch::Tensor m = mask_to_tensor(mix.mask).to(batch.hq.dtype());
    const torch::Tensor hq = batch.hq.slice(0, i, i + 1);
    const torch::Tensor other = (mix.against_rf ? rf_detached : batch.lq).slice(0, i, i + 1);
    const MaskMap& face = batch.target_masks[mix.index];
    // Exact selection, identical to fprs_swap on rasters.
    const torch::Tensor hq_inside = m * hq + (1 - m) * other;
    const torch::Tensor other_inside = m * other + (1 - m) * hq;
    real.push_back(other_inside);
    targets.push_back(score_maps_to_tensor(std::vector<ScoreMap>{supervision_target(mix.mask, face, false)}));
    ++p.mixed_images;
    if (mix.both) {
      real.push_back(hq_inside);
      targets.push_back(score_maps_to_tensor(std::vector<ScoreMap>{supervision_target(mix.mask, face, true)}));
      ++p.mixed_images;
    }
  }
  p.real = torch::cat(real, 0);
  p.real_target = torch::cat(targets, 0).to(batch.hq.dtype());
  if (single_output) p.real_target = torch::ones({p.real.size(0), 1}, batch.hq.options());
  p.fake = torch::cat({batch.lq, rf_detached}, 0);
  return p;
}

torch::Tensor discriminator_objective(Discriminator& d, const DiscriminatorPools& pools) {
  return adv_d_loss(d->forward(pools.real), pools.real_target, d->forward(pools.fake));
}

// ---------------------------------------------------------------------------
// Step
// ---------------------------------------------------------------------------

namespace {

void require_finite(double v, const char* what, const PreparedBatch& b) {
  if (std::isfinite(v)) return;
  std::string ids;
  for (const auto& id : b.ids) ids += (ids.empty() ? "" : ",") + id;
  throw NonFiniteLossError(std::string(what) + " is not finite; batch ids: " + ids);
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

void dump_pools(const DiscriminatorPools& pools, const fs::path& dir) {
  fs::create_directories(dir);
  for (std::int64_t i = 0; i < pools.real.size(0); ++i) {
    const std::string stem = "real_" + std::to_string(i);
    write_image_png(dir / (stem + ".png"), tensor_to_image(pools.real, i, ImageRole::Mixed));
    if (pools.real_target.dim() == 4) {
      const ScoreMap t = tensor_to_score_map(pools.real_target, i);
      std::vector<float> rgb;
      for (float v : t.values()) rgb.insert(rgb.end(), 3, std::round(v * 255.f));
      write_image_png(dir / (stem + ".target.png"),
                      ImageBuffer(t.height(), t.width(), ValueDomain::Byte255, ImageRole::Mixed, std::move(rgb)));
    }
  }
}

}  // namespace

MetricsRecord train_on(const PreparedBatch& batch, TrainState& state, const StepOptions& opts) {
  const TrainConfig& cfg = state.config;
  const bool single = cfg.net.discriminator_head == DiscriminatorHead::SingleOutput;
  MetricsRecord m;

  state.generator->train();
  state.discriminator->train();
  const torch::Tensor rf = state.generator->forward(batch.lq);

  // Discriminator update on the detached restoration.
  const DiscriminatorPools pools = make_pools(batch, rf.detach(), single);
  if (opts.dump_fprs_dir) dump_pools(pools, *opts.dump_fprs_dir);
  state.opt_d->zero_grad();
  const torch::Tensor d_real = state.discriminator->forward(pools.real);
  const torch::Tensor d_fake = state.discriminator->forward(pools.fake);
  const torch::Tensor d_loss = adv_d_loss(d_real, pools.real_target, d_fake);
  m.d_loss = d_loss.item<double>();
  require_finite(m.d_loss, "discriminator loss", batch);
  d_loss.backward();
  state.opt_d->step();
  m.d_real_mean = d_real.mean().item<double>();
  m.d_fake_mean = d_fake.mean().item<double>();
  m.mixed_images = pools.mixed_images;

  // Generator update against the freshly updated discriminator.
  set_requires_grad(*state.discriminator, false);
  state.opt_g->zero_grad();
  const torch::Tensor adv = adv_g_loss(state.discriminator->forward(rf));
  const torch::Tensor pix = pixel_loss(rf, batch.hq, cfg.pixel_norm);
  const torch::Tensor perc = perceptual_loss(rf, batch.hq, state.features);
  const torch::Tensor total = total_g_loss(adv, pix, perc, cfg.weights);
  m.g_total = total.item<double>();
  m.g_adv = adv.item<double>();
  m.g_pix = pix.item<double>();
  m.g_perc = perc.item<double>();
  try {
    require_finite(m.g_total, "generator loss", batch);
  } catch (...) {
    set_requires_grad(*state.discriminator, true);
    throw;
  }
  total.backward();
  state.opt_g->step();
  set_requires_grad(*state.discriminator, true);

  m.step = ++state.step;
  state.history.push_back(m);
  return m;
}

MetricsRecord train_step(std::span<const FaceSample> batch, TrainState& state, const StepOptions& opts) {
  return train_on(prepare_batch(batch, state), state, opts);
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

void write_string(torch::serialize::OutputArchive& a, const std::string& key, const std::string& value) {
  a.write(key, c10::IValue(value));
}

std::string read_string(torch::serialize::InputArchive& a, const std::string& key) {
  c10::IValue v;
  if (!a.try_read(key, v) || !v.isString()) throw LoadError("checkpoint lacks '" + key + "'");
  return v.toStringRef();
}

void load_module(torch::serialize::InputArchive& root, const std::string& key, torch::nn::Module& m) {
  torch::serialize::InputArchive sub;
  if (!root.try_read(key, sub)) throw LoadError("checkpoint lacks module '" + key + "'");
  try {
    m.load(sub);
  } catch (const c10::Error& e) {
    throw LoadError("checkpoint module '" + key + "' does not match its configuration");
  }
}

torch::serialize::InputArchive open_archive(const fs::path& path) {
  torch::serialize::InputArchive a;
  try {
    a.load_from(path.string());
  } catch (const c10::Error&) {
    throw LoadError("cannot read checkpoint " + path.string());
  }
  const std::string version = read_string(a, "format_version");
  if (version != kCheckpointFormat) throw LoadError("unsupported checkpoint format '" + version + "'");
  return a;
}

}  // namespace

void save_checkpoint(const TrainState& state, const fs::path& path) {
  atomic_write_with(path, [&](const fs::path& tmp) {
    torch::serialize::OutputArchive a;
    write_string(a, "format_version", kCheckpointFormat);
    write_string(a, "net_config", state.config.net.to_json());
    write_string(a, "train_config", state.config.to_json());
    write_string(a, "init_seed", std::to_string(state.config.seed));
    write_string(a, "step", std::to_string(state.step));
    write_string(a, "rng", serialize_rng(state.rng));
    json order = state.order;
    write_string(a, "order", order.dump());
    write_string(a, "cursor", std::to_string(state.cursor));
    json hist = json::array();
    for (const auto& m : state.history) hist.push_back(json::parse(m.to_json()));
    write_string(a, "history", hist.dump());

    torch::serialize::OutputArchive g, d, f, og, od;
    state.generator->save(g);
    state.discriminator->save(d);
    state.features->save(f);
    state.opt_g->save(og);
    state.opt_d->save(od);
    a.write("generator", g);
    a.write("discriminator", d);
    a.write("features", f);
    a.write("optim_g", og);
    a.write("optim_d", od);
    a.save_to(tmp.string());
  });
}

TrainState load_checkpoint(const fs::path& path) {
  auto a = open_archive(path);
  TrainConfig cfg = TrainConfig::from_json(read_string(a, "train_config"));
  TrainState s = TrainState::create(cfg);
  load_module(a, "generator", *s.generator);
  load_module(a, "discriminator", *s.discriminator);
  load_module(a, "features", *s.features);
  for (auto& p : s.features->parameters()) p.set_requires_grad(false);
  torch::serialize::InputArchive og, od;
  if (!a.try_read("optim_g", og) || !a.try_read("optim_d", od)) throw LoadError("checkpoint lacks optimizer state");
  s.opt_g->load(og);
  s.opt_d->load(od);
  s.step = std::stoll(read_string(a, "step"));
  s.rng = deserialize_rng(read_string(a, "rng"));
  s.order = json::parse(read_string(a, "order")).get<std::vector<std::int64_t>>();
  s.cursor = std::stoull(read_string(a, "cursor"));
  for (const auto& j : json::parse(read_string(a, "history"))) s.history.push_back(metrics_from_json(j));
  return s;
}

LoadedDiscriminator load_discriminator(const fs::path& path) {
  auto a = open_archive(path);
  LoadedDiscriminator out;
  out.format_version = kCheckpointFormat;
  out.config = NetConfig::from_json(read_string(a, "net_config"));
  out.discriminator = Discriminator(out.config);
  load_module(a, "discriminator", *out.discriminator);
  out.discriminator->eval();
  for (auto& p : out.discriminator->parameters()) p.set_requires_grad(false);
  return out;
}

// ---------------------------------------------------------------------------
// Loop
// ---------------------------------------------------------------------------

namespace {

std::vector<FaceSample> next_batch(TrainState& state, std::span<const FaceSample> dataset) {
  std::vector<FaceSample> batch;
  const auto n = static_cast<std::int64_t>(dataset.size());
  while (static_cast<int>(batch.size()) < state.config.batch_size) {
    if (state.cursor >= state.order.size()) {
      state.order.resize(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) state.order[static_cast<std::size_t>(i)] = i;
      for (std::int64_t i = n - 1; i > 0; --i) {
        std::swap(state.order[static_cast<std::size_t>(i)],
                  state.order[static_cast<std::size_t>(uniform_int(state.rng, 0, i + 1))]);
      }
      state.cursor = 0;
    }
    batch.push_back(dataset[static_cast<std::size_t>(state.order[state.cursor++])]);
  }
  return batch;
}

}  // namespace

fs::path fit(const TrainConfig& config, std::span<const FaceSample> dataset, const FitOptions& opts) {
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  config.validate();
  fs::create_directories(opts.out_dir);

  TrainState state = opts.resume_from ? load_checkpoint(*opts.resume_from) : TrainState::create(config);
  if (opts.resume_from) {
    // The run length may be extended on resume; everything else is fixed by
    // the checkpoint.
    state.config.steps = config.steps;
  }

  const fs::path metrics_path = opts.out_dir / "metrics.jsonl";
  std::ofstream metrics(metrics_path, opts.resume_from ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IoError("cannot open " + metrics_path.string());

  fs::path last;
  bool dumped = false;
  while (state.step < state.config.steps) {
    if (opts.stop && opts.stop->load()) break;
    const auto batch = next_batch(state, dataset);
    StepOptions step_opts;
    if (opts.dump_fprs_dir && !dumped) {
      step_opts.dump_fprs_dir = opts.dump_fprs_dir;
      dumped = true;
    }
    const MetricsRecord m = train_step(batch, state, step_opts);
    metrics << m.to_json() << '\n';
    metrics.flush();
    if (opts.on_step) opts.on_step(m);
    if (state.step % state.config.checkpoint_every == 0 && state.step < state.config.steps) {
      last = opts.out_dir / ("ckpt_" + std::to_string(state.step) + ".pt");
      save_checkpoint(state, last);
    }
  }
  last = opts.out_dir / "final.pt";
  save_checkpoint(state, last);
  return last;
}

}  // namespace ifqa
