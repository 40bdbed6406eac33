#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <opencv2/core/version.hpp>
#include <torch/version.h>

#include "ifqa/assessor.hpp"
#include "ifqa/degradation.hpp"
#include "ifqa/errors.hpp"
#include "ifqa/evalstats.hpp"
#include "ifqa/facedata.hpp"
#include "ifqa/fsutil.hpp"
#include "ifqa/studysvc.hpp"
#include "ifqa/trainer.hpp"

#ifndef IFQA_VERSION
#define IFQA_VERSION "dev"
#endif

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ifqa::cli {

std::string version_string() {
  std::ostringstream os;
  os << "ifqa " << IFQA_VERSION << "\n"
     << "checkpoint format: " << kCheckpointFormat << "\n"
     << "torch " << TORCH_VERSION << ", opencv " << CV_VERSION << ", jpeg codec " << jpeg_codec_name();
  return os.str();
}

namespace {

struct SynthArgs {
  fs::path out;
  int count = 500;
  int res = 64;
  std::uint64_t seed = 0;
};

struct DegradeArgs {
  fs::path in, out;
  std::uint64_t seed = 0;
  DegradationRanges ranges;
  bool no_jpeg = false;
};

struct TrainArgs {
  std::optional<fs::path> data;
  std::optional<int> synth;
  fs::path out;
  std::optional<fs::path> config, resume, dump_fprs;
  std::optional<int> steps, batch, res;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> augmentation;
  bool no_face_mask = false;
  double train_fraction = 0.95;
};

struct AssessArgs {
  fs::path images, ckpt, out;
  std::optional<fs::path> maps, masked_csv;
  std::string style = "gray";
};

struct EvalArgs {
  fs::path human;
  std::vector<fs::path> scores;
  bool pooled = false;
  std::string format = "text";
  std::optional<fs::path> out;
};

struct StudyArgs {
  fs::path samples, out;
  std::optional<fs::path> ui;
  std::string host = "127.0.0.1";
  int port = 8080;
  int target_raters = 30;
  std::uint64_t seed = 0;
  bool keep_reference = false;
};

void wait_or_stop(const std::atomic<bool>* stop, const std::function<bool()>& done) {
  while (!done()) {
    if (stop && stop->load()) return;
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto samples = synth_faces(a.seed, a.count, a.res);
  save_dataset(a.out, samples);
  out << "wrote " << samples.size() << " faces at " << a.res << "x" << a.res << " to " << a.out.string() << "\n";
  return 0;
}

int cmd_degrade(const DegradeArgs& a, std::ostream& out, std::ostream& err) {
  if (!fs::is_directory(a.in)) throw NotFoundError("input directory not found: " + a.in.string());
  DegradationRanges ranges = a.ranges;
  ranges.jpeg = !a.no_jpeg;
  ranges.validate();
  fs::create_directories(a.out);
  const auto ids = list_image_ids(a.in);
  std::ostringstream manifest;
  const std::string codec = jpeg_codec_name();
  std::size_t written = 0;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& id = ids[i];
    ImageBuffer img;
    try {
      img = read_image_png(a.in / (id + ".png"));
    } catch (const Error& e) {
      err << "warning: skipping " << id << ": " << e.what() << "\n";
      continue;
    }
    Rng rng(derive_seed(a.seed, i));
    const DegradationParams params = sample_params(rng, ranges);
    write_image_png(a.out / (id + ".png"), degrade(img, params));
    for (const char* suffix : {".regions.json", ".mask.png"}) {
      const fs::path side = a.in / (id + suffix);
      if (fs::exists(side)) fs::copy_file(side, a.out / (id + suffix), fs::copy_options::overwrite_existing);
    }
    json rec = json::parse(params.to_json());
    rec["id"] = id;
    rec["codec"] = codec;
    manifest << rec.dump() << "\n";
    ++written;
  }
  atomic_write(a.out / "manifest.jsonl", manifest.str());
  out << "degraded " << written << " images into " << a.out.string() << "\n";
  return 0;
}

Augmentation parse_augmentation(const std::string& s) {
  if (s == "none") return Augmentation::None;
  if (s == "cutmix") return Augmentation::CutMix;
  if (s == "fprs") return Augmentation::Fprs;
  throw ConfigError("augmentation must be none, cutmix or fprs");
}

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err, const std::atomic<bool>* stop) {
  TrainConfig cfg = a.config ? TrainConfig::from_file(*a.config) : TrainConfig{};
  if (a.steps) cfg.steps = *a.steps;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.res) cfg.net.resolution = *a.res;
  if (a.seed) cfg.seed = *a.seed;
  if (a.augmentation) cfg.augmentation = parse_augmentation(*a.augmentation);
  if (a.no_face_mask) cfg.use_face_mask = false;
  cfg.validate();
  if (!(a.train_fraction > 0 && a.train_fraction <= 1)) throw ConfigError("train-fraction must lie in (0, 1]");

  if (!a.synth && !a.data) throw ValidationError("train needs --data DIR or --synth N");
  LoadResult loaded;
  if (a.synth) {
    loaded.samples = synth_faces(cfg.seed, *a.synth, cfg.net.resolution);
  } else {
    loaded = load_dataset(*a.data, cfg.net.resolution);
    for (const auto& e : loaded.errors) err << "warning: " << e.id << ": " << e.reason << "\n";
    if (loaded.warnings) err << "warning: " << loaded.warnings << " unreadable images skipped\n";
  }
  DatasetSplit split = split_dataset(std::move(loaded.samples), a.train_fraction, cfg.seed);

  fs::create_directories(a.out);
  json held_out = json::array();
  for (const auto& s : split.validation) held_out.push_back(s.id);
  atomic_write(a.out / "split.json", json{{"train", split.train.size()}, {"validation", held_out}}.dump(2) + "\n");

  FitOptions opts;
  opts.out_dir = a.out;
  opts.resume_from = a.resume;
  opts.stop = stop;
  opts.dump_fprs_dir = a.dump_fprs;
  const int every = std::max(1, cfg.steps / 20);
  opts.on_step = [&](const MetricsRecord& m) {
    if (m.step % every == 0 || m.step == cfg.steps) {
      out << "step " << m.step << "  d " << m.d_loss << "  g " << m.g_total << "  D(real) " << m.d_real_mean
          << "  D(fake) " << m.d_fake_mean << "\n";
    }
  };
  const fs::path ckpt = fit(cfg, split.train, opts);
  out << "checkpoint: " << ckpt.string() << "\n";
  return 0;
}

int cmd_assess(const AssessArgs& a, std::ostream& out, std::ostream& err) {
  AssessOptions opts;
  opts.maps_dir = a.maps;
  opts.masked_csv = a.masked_csv;
  opts.style = a.style == "color" ? MapStyle::Color : MapStyle::Gray;
  const AssessSummary s = batch_assess(a.images, a.ckpt, a.out, opts);
  out << "scored " << s.rows.size() - s.failures << " of " << s.rows.size() << " images at " << s.resolution << "x"
      << s.resolution << " -> " << a.out.string() << "\n";
  for (const auto& r : s.rows) {
    if (!r.error.empty()) err << "warning: " << r.id << ": " << r.error << "\n";
  }
  return 0;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto records = read_rankings_jsonl(a.human);
  const auto human = weighted_ranks_by_sample(records);
  std::vector<SampleSet> samples;
  for (const auto& h : human) {
    for (const auto& r : h.rejected) err << "warning: " << h.sample_id << " record " << r.index << ": " << r.reason << "\n";
    if (h.raters > 0) samples.push_back({h.sample_id, h.ordering});
  }
  if (samples.empty()) throw EmptyScopeError("no usable human rankings in " + a.human.string());
  std::vector<MetricScores> metrics;
  for (const auto& p : a.scores) metrics.push_back(read_metric_csv(p));
  const auto rows = benchmark(samples, human, metrics,
                              a.pooled ? CorrelationMode::Pooled : CorrelationMode::PerSample);
  const std::string table = a.format == "csv" ? render_table_csv(rows) : render_table_text(rows);
  out << table;
  if (a.out) atomic_write(*a.out, render_table_csv(rows));
  return 0;
}

int cmd_study(const StudyArgs& a, std::ostream& out, const std::atomic<bool>* stop) {
  StudyConfig cfg;
  cfg.samples_root = a.samples;
  cfg.log_path = a.out;
  cfg.target_raters = a.target_raters;
  cfg.seed = a.seed;
  cfg.exclude_reference = !a.keep_reference;
  StudyService service(cfg);
  StudyServer server(service, a.ui);
  const int port = server.bind(a.host, a.port);
  out << "serving " << service.samples().size() << " samples on http://" << a.host << ":" << port << "/ ("
      << service.snapshot()->log.size() << " responses replayed)" << std::endl;
  std::atomic<bool> finished{false};
  std::thread worker([&] {
    server.serve();
    finished = true;
  });
  wait_or_stop(stop, [&] { return finished.load(); });
  server.stop();
  worker.join();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, const std::atomic<bool>* stop) {
  CLI::App app{"Interpretable face-quality metric: data synthesis, training, scoring and evaluation", "ifqa"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a procedural face corpus with region boxes and masks");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--count", synth.count, "Number of faces")->check(CLI::PositiveNumber);
  c_synth->add_option("--res", synth.res, "Resolution (32, 64, 128 or 256)");
  c_synth->add_option("--seed", synth.seed, "Corpus seed");

  DegradeArgs deg;
  auto* c_deg = app.add_subcommand("degrade", "Apply random blur, downscale, noise and JPEG to every image");
  c_deg->add_option("--in", deg.in, "Input directory")->required();
  c_deg->add_option("--out", deg.out, "Output directory")->required();
  c_deg->add_option("--seed", deg.seed, "Degradation seed");
  c_deg->add_option("--r-min", deg.ranges.r_min, "Lower bound of the downscale factor");
  c_deg->add_option("--r-max", deg.ranges.r_max, "Upper bound (exclusive) of the downscale factor");
  c_deg->add_option("--sigma-min", deg.ranges.sigma_min, "Lower bound of the noise standard deviation (0-255 scale)");
  c_deg->add_option("--sigma-max", deg.ranges.sigma_max, "Upper bound (exclusive) of the noise standard deviation");
  c_deg->add_option("--q-min", deg.ranges.q_min, "Lower bound of the JPEG quality");
  c_deg->add_option("--q-max", deg.ranges.q_max, "Upper bound (exclusive) of the JPEG quality");
  c_deg->add_flag("--no-jpeg", deg.no_jpeg, "Skip the JPEG stage");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Train the generator and per-pixel discriminator");
  auto* o_data = c_train->add_option("--data", tr.data, "Directory of HQ faces with sidecars");
  auto* o_synth = c_train->add_option("--synth", tr.synth, "Train on N procedural faces instead of --data")
                      ->check(CLI::PositiveNumber);
  o_data->excludes(o_synth);
  o_synth->excludes(o_data);
  c_train->add_option("--out", tr.out, "Run directory for checkpoints and metrics")->required();
  c_train->add_option("--config", tr.config, "Flat JSON training config");
  c_train->add_option("--steps", tr.steps, "Override step count")->check(CLI::PositiveNumber);
  c_train->add_option("--batch", tr.batch, "Override batch size")->check(CLI::PositiveNumber);
  c_train->add_option("--res", tr.res, "Override training resolution");
  c_train->add_option("--seed", tr.seed, "Override seed");
  c_train->add_option("--augmentation", tr.augmentation, "none, cutmix or fprs");
  c_train->add_flag("--no-face-mask", tr.no_face_mask, "Supervise HQ pixels with ones instead of the face mask");
  c_train->add_option("--train-fraction", tr.train_fraction, "Share of the corpus used for training");
  c_train->add_option("--resume", tr.resume, "Checkpoint to resume from");
  c_train->add_option("--dump-fprs", tr.dump_fprs, "Write mixed images and targets of the first step here");

  AssessArgs as;
  auto* c_assess = app.add_subcommand("assess", "Score images with a trained discriminator");
  c_assess->add_option("--in,--images", as.images, "Image directory (searched recursively)")->required();
  c_assess->add_option("--ckpt", as.ckpt, "Checkpoint")->required();
  c_assess->add_option("--csv,--out", as.out, "Score CSV")->required();
  c_assess->add_option("--maps", as.maps, "Directory for exported score maps");
  c_assess->add_option("--style", as.style, "Map style: gray or color (viridis)")->check(CLI::IsMember({"gray", "color"}));
  c_assess->add_option("--masked-csv", as.masked_csv, "Also write face-masked means here");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Correlate metric scores with human rankings");
  c_eval->add_option("--human", ev.human, "Ranking responses (JSONL)")->required();
  c_eval->add_option("--scores", ev.scores, "Metric CSV, repeatable")->required();
  c_eval->add_flag("--pooled", ev.pooled, "Pool all samples into one correlation");
  c_eval->add_option("--format", ev.format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
  c_eval->add_option("--out", ev.out, "Also write the table as CSV");

  StudyArgs st;
  auto* c_study = app.add_subcommand("study-serve", "Serve the ranking study");
  c_study->add_option("--samples", st.samples, "Directory of <sample>/<image>.png")->required();
  c_study->add_option("--out", st.out, "Response log (JSONL, appended)")->required();
  c_study->add_option("--port", st.port, "Port (0 picks a free one)");
  c_study->add_option("--host", st.host, "Bind address");
  c_study->add_option("--target-raters", st.target_raters, "Raters per sample")->check(CLI::PositiveNumber);
  c_study->add_option("--seed", st.seed, "Presentation shuffle seed");
  c_study->add_option("--ui", st.ui, "Static UI bundle served at /");
  c_study->add_flag("--keep-reference", st.keep_reference, "Also present the reference image");

  std::vector<std::string> storage{"ifqa"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion&) {
    out << version_string() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    if (e.get_name() == "RequiredError" || e.get_name() == "ExtrasError") err << app.help();
    return 1;
  }

  try {
    if (*c_synth) return cmd_synth(synth, out);
    if (*c_deg) return cmd_degrade(deg, out, err);
    if (*c_train) return cmd_train(tr, out, err, stop);
    if (*c_assess) return cmd_assess(as, out, err);
    if (*c_eval) return cmd_eval(ev, out, err);
    if (*c_study) return cmd_study(st, out, stop);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const fs::filesystem_error& e) {
    err << "error (io): " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace ifqa::cli
