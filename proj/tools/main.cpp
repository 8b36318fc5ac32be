// maskbeam: corpus synthesis, mask-network training, GEV beamforming and
// speech-enhancement scoring from one binary.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "maskbeam/beamform.hpp"
#include "maskbeam/checkpoint.hpp"
#include "maskbeam/config.hpp"
#include "maskbeam/gradcheck.hpp"
#include "maskbeam/metrics.hpp"
#include "maskbeam/sim.hpp"
#include "maskbeam/trainer.hpp"

namespace fs = std::filesystem;
using namespace maskbeam;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

PipelineConfig load_config(const std::string& path) {
  return path.empty() ? PipelineConfig::defaults() : PipelineConfig::load(path);
}

std::vector<double> row_vector(const AudioClip& clip, int channel) {
  if (channel < 0 || channel >= clip.channels())
    throw ValidationError("channel " + std::to_string(channel) + " out of range");
  Eigen::VectorXd row = clip.samples.row(channel);
  return std::vector<double>(row.data(), row.data() + row.size());
}

struct SimulateOpts {
  std::string config, out;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void run_simulate(const SimulateOpts& opt) {
  PipelineConfig cfg = load_config(opt.config);
  if (opt.seed_set) cfg.sim.seed = opt.seed;
  const std::string out_dir = opt.out.empty() ? cfg.paths.corpus_dir : opt.out;
  const std::string manifest = build_corpus(cfg.sim, out_dir);
  const auto entries = load_manifest(manifest);
  std::printf("simulate: wrote %s (%zu utterances, %d channels, seed %llu)\n", manifest.c_str(),
              entries.size(), cfg.sim.num_channels,
              static_cast<unsigned long long>(cfg.sim.seed));
}

struct TrainOpts {
  std::string config, mode = "baseline", manifest, out, log;
  std::string baseline_ckpt, teacher_ckpt, soft_cache;
  int epochs = 0;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool fixed_epochs = false;
  int jobs = 0;
  bool jobs_set = false;
  std::vector<double> lambda;
};

void run_train(const TrainOpts& opt) {
  PipelineConfig cfg = load_config(opt.config);
  const TrainMode mode = train_mode_from_string(opt.mode);

  TrainConfig& train_cfg = cfg.train_config(mode);
  if (opt.epochs > 0) train_cfg.max_epochs = opt.epochs;
  if (opt.seed_set) train_cfg.seed = opt.seed;
  if (opt.fixed_epochs) train_cfg.early_stopping = false;
  if (opt.jobs_set) train_cfg.jobs = opt.jobs;
  if (!opt.lambda.empty()) {
    if (opt.lambda.size() != 3)
      throw ValidationError("--lambda expects three weights");
    train_cfg.loss_weights = {opt.lambda[0], opt.lambda[1], opt.lambda[2]};
  }

  const std::string manifest_path =
      opt.manifest.empty() ? cfg.paths.corpus_dir + "/manifest.jsonl" : opt.manifest;
  const auto entries = load_manifest(manifest_path);

  fs::create_directories(cfg.paths.checkpoints_dir);
  TrainSetup setup;
  setup.stft = cfg.stft;
  setup.ibm = cfg.ibm;
  setup.net = cfg.net;
  setup.train = train_cfg;
  setup.checkpoint_path =
      opt.out.empty() ? cfg.paths.checkpoints_dir + "/" + opt.mode + ".ckpt" : opt.out;
  setup.log_path = opt.log.empty()
                       ? cfg.paths.checkpoints_dir + "/" + opt.mode + "_train_log.jsonl"
                       : opt.log;
  setup.config_digest = cfg.digest();

  const std::string baseline_ckpt = opt.baseline_ckpt.empty()
                                        ? cfg.paths.checkpoints_dir + "/baseline.ckpt"
                                        : opt.baseline_ckpt;
  TrainResult result;
  switch (mode) {
    case TrainMode::kBaseline:
      result = train_baseline(entries, setup);
      break;
    case TrainMode::kTeacher:
      result = train_teacher(entries, baseline_ckpt, setup);
      break;
    case TrainMode::kStudent: {
      const std::string teacher_ckpt = opt.teacher_ckpt.empty()
                                           ? cfg.paths.checkpoints_dir + "/teacher.ckpt"
                                           : opt.teacher_ckpt;
      const std::string cache_dir = opt.soft_cache.empty()
                                        ? cfg.paths.checkpoints_dir + "/soft_targets"
                                        : opt.soft_cache;
      std::map<std::string, MaskPlane> targets;
      try {
        targets = load_soft_targets(cache_dir, entries);
      } catch (const ValidationError&) {
        std::printf("train: soft-target cache incomplete, building it under %s\n",
                    cache_dir.c_str());
        targets = build_soft_targets(entries, baseline_ckpt, teacher_ckpt, cache_dir, cfg.stft,
                                     train_cfg.jobs);
      }
      result = train_student(entries, targets, setup);
      break;
    }
  }

  const EpochRecord& last = result.records.back();
  std::printf("train %s: %zu epochs run, best epoch %d, dev loss %.6f, checkpoint %s\n",
              opt.mode.c_str(), result.records.size() - 1, result.best_epoch, last.dev_loss,
              result.checkpoint_path.c_str());
}

struct EnhanceOpts {
  std::string config, checkpoint, input, output;
  std::string mode = "mask";
  int channel = -1;
  std::string codec = "f32";
  std::string lambda_csv;
  int jobs = 0;
};

void run_enhance(const EnhanceOpts& opt) {
  PipelineConfig cfg = load_config(opt.config);
  Checkpoint ckpt = load_checkpoint(opt.checkpoint);
  const AudioClip clip = read_wav(opt.input);
  if (clip.sample_rate != cfg.stft.sample_rate)
    throw ValidationError("input sample rate does not match pipeline rate");

  std::vector<double> enhanced;
  if (opt.mode == "mask") {
    const int channel = opt.channel >= 0 ? opt.channel : 0;
    const auto samples = row_vector(clip, channel);
    Spectrogram spec = stft(std::span<const double>(samples.data(), samples.size()), cfg.stft);
    auto masks = forward(ckpt.params, normalize_features(magnitude_channel(spec, 0)));
    enhanced = istft(apply_mask(masks.at(MaskKind::kSpeech), spec));
  } else if (opt.mode == "beamform") {
    BeamformOptions opts;
    opts.jobs = opt.jobs;
    auto result = beamform_utterance(clip, ckpt.params, cfg.stft, opts);
    enhanced = std::move(result.enhanced);
    if (!opt.lambda_csv.empty()) write_lambda_csv(opt.lambda_csv, result.filter);
  } else {
    throw ValidationError("unknown enhance mode '" + opt.mode + "' (expected mask|beamform)");
  }

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples = Eigen::Map<const Eigen::RowVectorXd>(enhanced.data(),
                                                     static_cast<Eigen::Index>(enhanced.size()));
  const WavCodec codec = opt.codec == "pcm16" ? WavCodec::kPcm16 : WavCodec::kFloat32;
  const std::int64_t clipped = write_wav(opt.output, out, codec);
  std::printf("enhance (%s): wrote %s (%zu samples%s)\n", opt.mode.c_str(), opt.output.c_str(),
              enhanced.size(),
              clipped > 0 ? (", " + std::to_string(clipped) + " samples clamped").c_str() : "");
}

struct EvaluateOpts {
  std::string config, manifest, out, checkpoint;
  std::string systems = "mask,beamform";
  std::string split;
  int jobs = 0;
};

void run_evaluate(const EvaluateOpts& opt) {
  PipelineConfig cfg = load_config(opt.config);
  const std::string manifest_path =
      opt.manifest.empty() ? cfg.paths.corpus_dir + "/manifest.jsonl" : opt.manifest;
  auto entries = load_manifest(manifest_path);
  if (!opt.split.empty()) entries = filter_split(entries, split_from_string(opt.split));

  std::shared_ptr<Checkpoint> ckpt;
  auto need_checkpoint = [&]() -> const MaskNetParams& {
    if (!ckpt) {
      if (opt.checkpoint.empty())
        throw ValidationError("system needs --checkpoint");
      ckpt = std::make_shared<Checkpoint>(load_checkpoint(opt.checkpoint));
    }
    return ckpt->params;
  };

  BeamformOptions bf_opts;
  bf_opts.jobs = opt.jobs;
  const StftConfig stft_cfg = cfg.stft;
  const IbmConfig ibm_cfg = cfg.ibm;

  std::vector<EnhanceSystem> systems;
  std::string token;
  std::stringstream ss(opt.systems);
  while (std::getline(ss, token, ',')) {
    if (token.empty() || token == "noisy") continue;  // noisy is always scored
    if (token == "mask") {
      const MaskNetParams& params = need_checkpoint();
      systems.push_back({token, [&, params](const ManifestEntry& e) {
                           const AudioClip mix = read_wav(e.mix_path);
                           const auto samples = row_vector(mix, e.ref_channel);
                           Spectrogram spec = stft(
                               std::span<const double>(samples.data(), samples.size()), stft_cfg);
                           auto masks =
                               forward(params, normalize_features(magnitude_channel(spec, 0)));
                           return istft(apply_mask(masks.at(MaskKind::kSpeech), spec));
                         }});
    } else if (token == "beamform") {
      const MaskNetParams& params = need_checkpoint();
      systems.push_back({token, [&, params](const ManifestEntry& e) {
                           const AudioClip mix = read_wav(e.mix_path);
                           return beamform_utterance(mix, params, stft_cfg, bf_opts).enhanced;
                         }});
    } else if (token == "oracle-mask") {
      systems.push_back({token, [&](const ManifestEntry& e) {
                           const AudioClip mix = read_wav(e.mix_path);
                           const AudioClip clean = read_wav(*e.clean_path);
                           const AudioClip noise = read_wav(*e.noise_path);
                           const auto mix_row = row_vector(mix, e.ref_channel);
                           const auto clean_row = row_vector(clean, e.ref_channel);
                           const auto noise_row = row_vector(noise, e.ref_channel);
                           Spectrogram spec = stft(
                               std::span<const double>(mix_row.data(), mix_row.size()), stft_cfg);
                           Spectrogram clean_spec =
                               stft(std::span<const double>(clean_row.data(), clean_row.size()),
                                    stft_cfg);
                           Spectrogram noise_spec =
                               stft(std::span<const double>(noise_row.data(), noise_row.size()),
                                    stft_cfg);
                           auto [ibm_x, ibm_n] =
                               ideal_binary_masks(clean_spec, noise_spec, ibm_cfg);
                           return istft(apply_mask(ibm_x, spec));
                         }});
    } else if (token == "oracle-beamform") {
      systems.push_back({token, [&](const ManifestEntry& e) {
                           const AudioClip mix = read_wav(e.mix_path);
                           const AudioClip clean = read_wav(*e.clean_path);
                           const AudioClip noise = read_wav(*e.noise_path);
                           return beamform_utterance_oracle(mix, clean, noise, stft_cfg, ibm_cfg,
                                                            bf_opts)
                               .enhanced;
                         }});
    } else {
      throw ValidationError("unknown system '" + token +
                            "' (expected mask|beamform|oracle-mask|oracle-beamform)");
    }
  }

  fs::create_directories(cfg.paths.reports_dir);
  const std::string out_csv =
      opt.out.empty() ? cfg.paths.reports_dir + "/scores.csv" : opt.out;
  MetricReport report = evaluate_corpus(entries, systems, out_csv, cfg.digest());

  std::string summary = "evaluate: wrote " + out_csv + "; mean si_sdr_db:";
  for (const auto& [condition, mean] : report.means) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), " %s=%.2f", condition.c_str(), mean.si_sdr_db);
    summary += buf;
  }
  std::printf("%s\n", summary.c_str());
}

struct GradcheckOpts {
  std::string preset = "tiny";
};

void run_gradcheck(const GradcheckOpts& opt) {
  const GradCheckResult result = grad_check_preset(opt.preset);
  std::printf("gradcheck %s: max relative error %.3e over %lld coordinates (worst: %s)\n",
              opt.preset.c_str(), result.max_rel_err,
              static_cast<long long>(result.coords_checked), result.worst_param.c_str());
  if (result.max_rel_err >= 1e-4)
    throw NumericalError("gradient check failed: max relative error >= 1e-4");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maskbeam: BLSTM time-frequency masking, GEV beamforming and "
               "mask distillation on a synthetic multichannel corpus"};
  app.require_subcommand(1);

  SimulateOpts sim_opts;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate the synthetic multichannel corpus");
  sim_cmd->add_option("--config", sim_opts.config, "Pipeline config JSON");
  sim_cmd->add_option("--out", sim_opts.out, "Corpus output directory");
  auto* sim_seed = sim_cmd->add_option("--seed", sim_opts.seed, "Corpus seed override");
  sim_cmd->callback([&] {
    sim_opts.seed_set = sim_seed->count() > 0;
    run_simulate(sim_opts);
  });

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a mask network");
  train_cmd->add_option("--mode", train_opts.mode, "baseline|teacher|student")->required();
  train_cmd->add_option("--config", train_opts.config, "Pipeline config JSON");
  train_cmd->add_option("--manifest", train_opts.manifest, "Corpus manifest path");
  train_cmd->add_option("--out", train_opts.out, "Checkpoint output path");
  train_cmd->add_option("--log", train_opts.log, "Training log (JSON lines)");
  train_cmd->add_option("--baseline-checkpoint", train_opts.baseline_ckpt,
                        "Baseline checkpoint (teacher/student modes)");
  train_cmd->add_option("--teacher-checkpoint", train_opts.teacher_ckpt,
                        "Teacher checkpoint (student mode)");
  train_cmd->add_option("--soft-cache", train_opts.soft_cache,
                        "Soft-target cache directory (student mode)");
  train_cmd->add_option("--epochs", train_opts.epochs, "Override max epochs");
  auto* train_seed = train_cmd->add_option("--seed", train_opts.seed, "Training seed override");
  train_cmd->add_flag("--fixed-epochs", train_opts.fixed_epochs,
                      "Run exactly --epochs epochs instead of early stopping");
  auto* train_jobs = train_cmd->add_option("--jobs", train_opts.jobs, "Worker thread cap");
  train_cmd->add_option("--lambda", train_opts.lambda,
                        "Student loss weights: st speech noise")
      ->expected(3);
  train_cmd->callback([&] {
    train_opts.seed_set = train_seed->count() > 0;
    train_opts.jobs_set = train_jobs->count() > 0;
    run_train(train_opts);
  });

  EnhanceOpts enh_opts;
  auto* enh_cmd = app.add_subcommand("enhance", "Enhance a WAV with a trained network");
  enh_cmd->add_option("--config", enh_opts.config, "Pipeline config JSON");
  enh_cmd->add_option("--checkpoint", enh_opts.checkpoint, "Network checkpoint")->required();
  enh_cmd->add_option("--input", enh_opts.input, "Input WAV")->required();
  enh_cmd->add_option("--output", enh_opts.output, "Output WAV")->required();
  enh_cmd->add_option("--mode", enh_opts.mode, "mask (single-channel) | beamform (multichannel)");
  enh_cmd->add_option("--channel", enh_opts.channel, "Channel for mask mode (default 0)");
  enh_cmd->add_option("--codec", enh_opts.codec, "Output codec: f32|pcm16");
  enh_cmd->add_option("--lambda-csv", enh_opts.lambda_csv,
                      "Dump per-bin GEV eigenvalues (beamform mode)");
  enh_cmd->add_option("--jobs", enh_opts.jobs, "Worker thread cap");
  enh_cmd->callback([&] { run_enhance(enh_opts); });

  EvaluateOpts eval_opts;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score enhancement systems on a corpus");
  eval_cmd->add_option("--config", eval_opts.config, "Pipeline config JSON");
  eval_cmd->add_option("--manifest", eval_opts.manifest, "Corpus manifest path");
  eval_cmd->add_option("--out", eval_opts.out, "Report CSV path");
  eval_cmd->add_option("--systems", eval_opts.systems,
                       "Comma list: mask,beamform,oracle-mask,oracle-beamform");
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint,
                       "Checkpoint for the mask/beamform systems");
  eval_cmd->add_option("--split", eval_opts.split, "Restrict to one split: train|dev|test");
  eval_cmd->add_option("--jobs", eval_opts.jobs, "Worker thread cap");
  eval_cmd->callback([&] { run_evaluate(eval_opts); });

  GradcheckOpts grad_opts;
  auto* grad_cmd = app.add_subcommand("gradcheck",
                                      "Verify analytic gradients against finite differences");
  grad_cmd->add_option("--preset", grad_opts.preset, "tiny|small");
  grad_cmd->callback([&] { run_gradcheck(grad_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  }
  return kExitOk;
}
