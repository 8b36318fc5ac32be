#include "maskbeam/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>

#include "maskbeam/beamform.hpp"
#include "maskbeam/rng.hpp"
#include "maskbeam/wav.hpp"

namespace maskbeam {

using nlohmann::json;

void TrainConfig::validate() const {
  if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
  if (patience < 1) throw ValidationError("patience must be >= 1");
  loss_weights.validate();
}

std::string to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kTeacher: return "teacher";
    default: return "student";
  }
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "baseline") return TrainMode::kBaseline;
  if (s == "teacher") return TrainMode::kTeacher;
  if (s == "student") return TrainMode::kStudent;
  throw ValidationError("unknown train mode '" + s + "' (expected baseline|teacher|student)");
}

EarlyStopDecision early_stop(std::span<const double> dev_history, int patience) {
  if (patience < 1) throw ValidationError("early_stop: patience must be >= 1");
  EarlyStopDecision d;
  if (dev_history.empty()) return d;

  std::size_t best = 0;
  for (std::size_t i = 1; i < dev_history.size(); ++i)
    if (dev_history[i] < dev_history[best]) best = i;
  d.best_epoch = static_cast<int>(best) + 1;
  d.stop = dev_history.size() - best - 1 >= static_cast<std::size_t>(patience);
  return d;
}

namespace {

// Everything one utterance contributes to an epoch, precomputed once: the
// inputs never change across epochs, only the parameters do.
struct PreparedUtt {
  std::string id;
  EntryKind kind = EntryKind::kSimu;
  std::vector<Eigen::MatrixXd> features;  // one per input sequence
  Eigen::MatrixXd ibm_speech, ibm_noise;
  Eigen::MatrixXd soft;
  bool has_ibm = false;
  bool has_soft = false;
};

struct LossParts {
  double st = 0.0, x = 0.0, n = 0.0;
};

double combine_parts(TrainMode mode, EntryKind kind, const LossParts& p,
                     const LossWeights& w) {
  switch (mode) {
    case TrainMode::kBaseline: return p.x + p.n;
    case TrainMode::kTeacher: return p.x;
    default:
      return kind == EntryKind::kReal ? p.st : combined_loss(p.st, p.x, p.n, w);
  }
}

std::vector<LossTerm> loss_terms(TrainMode mode, const PreparedUtt& utt,
                                 const LossWeights& w) {
  std::vector<LossTerm> terms;
  switch (mode) {
    case TrainMode::kBaseline:
      terms.push_back({MaskKind::kSpeech, &utt.ibm_speech, 1.0});
      terms.push_back({MaskKind::kNoise, &utt.ibm_noise, 1.0});
      break;
    case TrainMode::kTeacher:
      terms.push_back({MaskKind::kSpeech, &utt.ibm_speech, 1.0});
      break;
    case TrainMode::kStudent:
      if (utt.kind == EntryKind::kReal) {
        terms.push_back({MaskKind::kSpeech, &utt.soft, 1.0});
      } else {
        terms.push_back({MaskKind::kSpeech, &utt.soft, w.st});
        terms.push_back({MaskKind::kSpeech, &utt.ibm_speech, w.speech});
        terms.push_back({MaskKind::kNoise, &utt.ibm_noise, w.noise});
      }
      break;
  }
  return terms;
}

LossParts parts_from_cache(TrainMode mode, const PreparedUtt& utt, const ForwardCache& cache) {
  LossParts p;
  const Eigen::MatrixXd& speech_pred = cache.heads.at(MaskKind::kSpeech).mask;
  if (utt.has_soft) p.st = bce_loss(utt.soft, speech_pred);
  if (utt.has_ibm) {
    p.x = bce_loss(utt.ibm_speech, speech_pred);
    if (mode != TrainMode::kTeacher)
      p.n = bce_loss(utt.ibm_noise, cache.heads.at(MaskKind::kNoise).mask);
  }
  return p;
}

void add_params(MaskNetParams& acc, const MaskNetParams& g) {
  auto av = acc.views();
  auto gv = g.views();
  for (std::size_t k = 0; k < av.size(); ++k)
    for (Eigen::Index i = 0; i < av[k].size(); ++i) av[k].data[i] += gv[k].data[i];
}

void scale_params(MaskNetParams& p, double s) {
  for (auto& v : p.views())
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data[i] *= s;
}

// Mean loss parts over the utterance's sequences at fixed parameters.
LossParts eval_utt(const MaskNetParams& params, TrainMode mode, const PreparedUtt& utt,
                   int jobs) {
  const int seqs = static_cast<int>(utt.features.size());
  std::vector<LossParts> per_seq(seqs);
  std::vector<std::string> failures(seqs);
  parallel_for(seqs, jobs, [&](int s) {
    try {
      auto cache = forward_cached(params, utt.features[s]);
      per_seq[s] = parts_from_cache(mode, utt, cache);
    } catch (const std::exception& ex) {
      failures[s] = ex.what();
    }
  });
  for (int s = 0; s < seqs; ++s)
    if (!failures[s].empty())
      throw Error("evaluating " + utt.id + ", sequence " + std::to_string(s) + ": " + failures[s]);

  LossParts mean;
  for (const auto& p : per_seq) {
    mean.st += p.st;
    mean.x += p.x;
    mean.n += p.n;
  }
  mean.st /= seqs;
  mean.x /= seqs;
  mean.n /= seqs;
  return mean;
}

// One optimizer step on one utterance: gradients of the mode objective,
// averaged over the channel sequences in fixed index order.
LossParts train_step(MaskNetParams& params, AdamState& adam, TrainMode mode,
                     const PreparedUtt& utt, const TrainConfig& cfg) {
  const auto terms = loss_terms(mode, utt, cfg.loss_weights);
  const int seqs = static_cast<int>(utt.features.size());

  MaskNetParams grad_sum = MaskNetParams::zeros(params.dims, params.activation);
  std::vector<LossParts> per_seq(seqs);

  const int chunk = std::max(1, resolve_jobs(cfg.jobs));
  std::vector<MaskNetParams> grads;
  for (int base = 0; base < seqs; base += chunk) {
    const int n = std::min(chunk, seqs - base);
    grads.assign(static_cast<std::size_t>(n),
                 MaskNetParams::zeros(params.dims, params.activation));
    std::vector<std::string> failures(n);
    parallel_for(n, cfg.jobs, [&](int k) {
      try {
        auto cache = forward_cached(params, utt.features[base + k]);
        per_seq[base + k] = parts_from_cache(mode, utt, cache);
        grads[static_cast<std::size_t>(k)] = backward(params, cache, terms);
      } catch (const std::exception& ex) {
        failures[k] = ex.what();
      }
    });
    for (int k = 0; k < n; ++k)
      if (!failures[k].empty())
        throw Error("training on " + utt.id + ", sequence " + std::to_string(base + k) + ": " +
                    failures[k]);
    for (int k = 0; k < n; ++k) add_params(grad_sum, grads[static_cast<std::size_t>(k)]);
  }
  scale_params(grad_sum, 1.0 / seqs);
  adam_step(params, grad_sum, adam, cfg.adam);

  LossParts mean;
  for (const auto& p : per_seq) {
    mean.st += p.st;
    mean.x += p.x;
    mean.n += p.n;
  }
  mean.st /= seqs;
  mean.x /= seqs;
  mean.n /= seqs;
  return mean;
}

Eigen::MatrixXd channel_features(const Spectrogram& spec, int channel) {
  return normalize_features(magnitude_channel(spec, channel));
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> ibm_targets(const ManifestEntry& entry,
                                                        const StftConfig& stft_cfg,
                                                        const IbmConfig& ibm_cfg) {
  const AudioClip clean = read_wav(*entry.clean_path);
  const AudioClip noise = read_wav(*entry.noise_path);
  if (entry.ref_channel >= clean.channels())
    throw ValidationError("ref_channel out of range for " + entry.id);
  Eigen::VectorXd c = clean.samples.row(entry.ref_channel);
  Eigen::VectorXd n = noise.samples.row(entry.ref_channel);
  Spectrogram clean_spec = stft(std::span<const double>(c.data(), static_cast<std::size_t>(c.size())), stft_cfg);
  Spectrogram noise_spec = stft(std::span<const double>(n.data(), static_cast<std::size_t>(n.size())), stft_cfg);
  auto [ibm_x, ibm_n] = ideal_binary_masks(clean_spec, noise_spec, ibm_cfg);
  return {std::move(ibm_x.values), std::move(ibm_n.values)};
}

PreparedUtt prepare_multichannel_utt(const ManifestEntry& entry, const StftConfig& stft_cfg,
                                     const IbmConfig& ibm_cfg, bool need_ibm) {
  PreparedUtt utt;
  utt.id = entry.id;
  utt.kind = entry.kind;

  const AudioClip mix = read_wav(entry.mix_path);
  if (mix.sample_rate != stft_cfg.sample_rate)
    throw ValidationError("utterance " + entry.id + " sample rate " +
                          std::to_string(mix.sample_rate) + " does not match pipeline rate");
  Spectrogram mix_spec = stft(mix.samples, stft_cfg);
  for (int m = 0; m < mix.channels(); ++m)
    utt.features.push_back(channel_features(mix_spec, m));

  if (need_ibm) {
    if (entry.kind != EntryKind::kSimu)
      throw ValidationError("utterance " + entry.id + " has no clean/noise pair for targets");
    auto [x, n] = ibm_targets(entry, stft_cfg, ibm_cfg);
    utt.ibm_speech = std::move(x);
    utt.ibm_noise = std::move(n);
    utt.has_ibm = true;
  }
  return utt;
}

struct SplitData {
  std::vector<PreparedUtt> train, dev;
};

struct LogWriter {
  std::ofstream out;
  explicit LogWriter(const std::string& path) {
    if (!path.empty()) {
      out.open(path, std::ios::trunc);
      if (!out) throw IoError("cannot open training log: " + path);
    }
  }
  void line(const json& j) {
    if (out.is_open()) out << j.dump() << "\n";
  }
};

struct EvalSummary {
  double loss = 0.0;
  LossParts parts;
  std::vector<std::pair<std::string, double>> utt_losses;
};

EvalSummary evaluate_split(const MaskNetParams& params, TrainMode mode,
                           const std::vector<PreparedUtt>& utts, const TrainConfig& cfg) {
  EvalSummary summary;
  if (utts.empty()) return summary;
  for (const auto& utt : utts) {
    LossParts p = eval_utt(params, mode, utt, cfg.jobs);
    const double loss = combine_parts(mode, utt.kind, p, cfg.loss_weights);
    summary.utt_losses.emplace_back(utt.id, loss);
    summary.loss += loss;
    summary.parts.st += p.st;
    summary.parts.x += p.x;
    summary.parts.n += p.n;
  }
  const double n = static_cast<double>(utts.size());
  summary.loss /= n;
  summary.parts.st /= n;
  summary.parts.x /= n;
  summary.parts.n /= n;
  return summary;
}

TrainResult train_loop(TrainMode mode, SplitData data, const TrainSetup& setup) {
  setup.train.validate();
  setup.stft.validate();
  if (data.train.empty()) throw ValidationError("no training utterances");

  const TrainConfig& cfg = setup.train;
  MaskNetDims dims{setup.stft.num_bins(), setup.net.hidden, mode != TrainMode::kTeacher};
  MaskNetParams params = MaskNetParams::init(dims, setup.net.activation, cfg.seed);
  AdamState adam = AdamState::zeros(dims, setup.net.activation);

  LogWriter log(setup.log_path);
  TrainResult result;

  auto record_epoch = [&](int epoch, double wall_s) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.wall_seconds = wall_s;
    EvalSummary train_eval = evaluate_split(params, mode, data.train, cfg);
    EvalSummary dev_eval = evaluate_split(params, mode, data.dev, cfg);
    rec.train_loss = train_eval.loss;
    rec.train_st = train_eval.parts.st;
    rec.train_x = train_eval.parts.x;
    rec.train_n = train_eval.parts.n;
    rec.train_utt_losses = std::move(train_eval.utt_losses);
    rec.dev_loss = dev_eval.loss;
    rec.dev_st = dev_eval.parts.st;
    rec.dev_x = dev_eval.parts.x;
    rec.dev_n = dev_eval.parts.n;
    rec.dev_utt_losses = std::move(dev_eval.utt_losses);
    if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.dev_loss))
      throw NumericalError("non-finite loss at epoch " + std::to_string(epoch));

    for (const char* split : {"train", "dev"}) {
      const bool is_train = split[0] == 't';
      json j;
      j["mode"] = to_string(mode);
      j["epoch"] = epoch;
      j["split"] = split;
      j["loss"] = is_train ? rec.train_loss : rec.dev_loss;
      j["loss_st"] = is_train ? rec.train_st : rec.dev_st;
      j["loss_x"] = is_train ? rec.train_x : rec.dev_x;
      j["loss_n"] = is_train ? rec.train_n : rec.dev_n;
      j["lambda"] = {cfg.loss_weights.st, cfg.loss_weights.speech, cfg.loss_weights.noise};
      j["wall_seconds"] = wall_s;
      log.line(j);
    }
    result.records.push_back(std::move(rec));
  };

  record_epoch(0, 0.0);

  std::vector<double> dev_history;
  MaskNetParams best_params = params;
  int best_epoch = 0;
  double best_dev = std::numeric_limits<double>::infinity();

  std::vector<int> order(data.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();

    // seed-derived permutation, independent of all other random draws
    Rng shuffle_rng(mix_seed(cfg.seed, "shuffle:" + std::to_string(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(shuffle_rng.next_below(i))]);

    for (int idx : order) train_step(params, adam, mode, data.train[idx], cfg);

    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    record_epoch(epoch, wall);

    const EpochRecord& rec = result.records.back();
    const double dev_loss = data.dev.empty() ? rec.train_loss : rec.dev_loss;
    dev_history.push_back(dev_loss);
    if (dev_loss < best_dev) {
      best_dev = dev_loss;
      best_epoch = epoch;
      best_params = params;
    }
    if (cfg.early_stopping && early_stop(dev_history, cfg.patience).stop) break;
  }

  if (cfg.early_stopping) {
    result.best_epoch = best_epoch;
    result.params = std::move(best_params);
  } else {
    result.best_epoch = static_cast<int>(dev_history.size());  // last epoch run
    result.params = std::move(params);
  }

  if (!setup.checkpoint_path.empty()) {
    save_checkpoint(setup.checkpoint_path, result.params,
                    {result.best_epoch, setup.config_digest});
    result.checkpoint_path = setup.checkpoint_path;
  }
  json fin;
  fin["mode"] = to_string(mode);
  fin["event"] = "final";
  fin["best_epoch"] = result.best_epoch;
  fin["checkpoint"] = result.checkpoint_path;
  log.line(fin);
  return result;
}

}  // namespace

TrainResult train_baseline(const std::vector<ManifestEntry>& entries, const TrainSetup& setup) {
  SplitData data;
  for (const auto& e : entries) {
    if (e.kind != EntryKind::kSimu || e.split == Split::kTest) continue;
    auto utt = prepare_multichannel_utt(e, setup.stft, setup.ibm, true);
    (e.split == Split::kTrain ? data.train : data.dev).push_back(std::move(utt));
  }
  if (data.train.empty())
    throw ValidationError("train_baseline: manifest has no simu train utterances");
  return train_loop(TrainMode::kBaseline, std::move(data), setup);
}

TrainResult train_teacher(const std::vector<ManifestEntry>& entries,
                          const std::string& baseline_checkpoint, const TrainSetup& setup) {
  Checkpoint baseline = load_checkpoint(baseline_checkpoint);
  if (!baseline.params.dims.has_noise_head)
    throw ValidationError("train_teacher: beamforming checkpoint must have both heads");

  BeamformOptions opts;
  opts.jobs = setup.train.jobs;

  SplitData data;
  for (const auto& e : entries) {
    if (e.kind != EntryKind::kSimu || e.split == Split::kTest) continue;
    const AudioClip mix = read_wav(e.mix_path);
    auto bf = beamform_utterance(mix, baseline.params, setup.stft, opts);

    PreparedUtt utt;
    utt.id = e.id;
    utt.kind = e.kind;
    utt.features.push_back(channel_features(bf.enhanced_spec, 0));
    auto [x, n] = ibm_targets(e, setup.stft, setup.ibm);
    utt.ibm_speech = std::move(x);
    utt.ibm_noise = std::move(n);
    utt.has_ibm = true;
    (e.split == Split::kTrain ? data.train : data.dev).push_back(std::move(utt));
  }
  if (data.train.empty())
    throw ValidationError("train_teacher: manifest has no simu train utterances");
  return train_loop(TrainMode::kTeacher, std::move(data), setup);
}

std::map<std::string, MaskPlane> build_soft_targets(const std::vector<ManifestEntry>& entries,
                                                    const std::string& baseline_checkpoint,
                                                    const std::string& teacher_checkpoint,
                                                    const std::string& cache_dir,
                                                    const StftConfig& stft_cfg, int jobs) {
  Checkpoint baseline = load_checkpoint(baseline_checkpoint);
  Checkpoint teacher = load_checkpoint(teacher_checkpoint);
  if (!baseline.params.dims.has_noise_head)
    throw ValidationError("build_soft_targets: baseline checkpoint must have both heads");

  std::filesystem::create_directories(cache_dir);
  BeamformOptions opts;
  opts.jobs = jobs;

  std::map<std::string, MaskPlane> cache;
  for (const auto& e : entries) {
    if (e.split == Split::kTest) continue;
    const AudioClip mix = read_wav(e.mix_path);
    if (mix.channels() < 2)
      throw ValidationError("build_soft_targets: utterance " + e.id +
                            " has fewer than 2 channels");
    auto bf = beamform_utterance(mix, baseline.params, stft_cfg, opts);
    auto masks = forward(teacher.params, channel_features(bf.enhanced_spec, 0));
    MaskPlane plane = std::move(masks.at(MaskKind::kSpeech));
    save_mask((std::filesystem::path(cache_dir) / (e.id + ".mask")).string(), plane);
    cache.emplace(e.id, std::move(plane));
  }
  return cache;
}

std::map<std::string, MaskPlane> load_soft_targets(const std::string& cache_dir,
                                                   const std::vector<ManifestEntry>& entries) {
  std::map<std::string, MaskPlane> cache;
  for (const auto& e : entries) {
    if (e.split == Split::kTest) continue;
    const auto path = std::filesystem::path(cache_dir) / (e.id + ".mask");
    if (!std::filesystem::exists(path))
      throw ValidationError("soft-target cache is missing " + path.string());
    cache.emplace(e.id, load_mask(path.string()));
  }
  return cache;
}

TrainResult train_student(const std::vector<ManifestEntry>& entries,
                          const std::map<std::string, MaskPlane>& soft_targets,
                          const TrainSetup& setup) {
  SplitData data;
  for (const auto& e : entries) {
    if (e.split == Split::kTest) continue;
    auto utt = prepare_multichannel_utt(e, setup.stft, setup.ibm, e.kind == EntryKind::kSimu);
    auto it = soft_targets.find(e.id);
    if (it == soft_targets.end())
      throw ValidationError("train_student: no soft target for utterance " + e.id);
    utt.soft = it->second.values;
    utt.has_soft = true;
    if (utt.soft.rows() != utt.features[0].rows() || utt.soft.cols() != utt.features[0].cols())
      throw ValidationError("train_student: soft target shape mismatch for " + e.id);
    (e.split == Split::kTrain ? data.train : data.dev).push_back(std::move(utt));
  }
  if (data.train.empty()) throw ValidationError("train_student: no train utterances");
  return train_loop(TrainMode::kStudent, std::move(data), setup);
}

}  // namespace maskbeam
