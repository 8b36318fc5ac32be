#ifndef MASKBEAM_TRAINER_HPP
#define MASKBEAM_TRAINER_HPP

#include <map>
#include <span>
#include <string>
#include <vector>

#include "maskbeam/checkpoint.hpp"
#include "maskbeam/manifest.hpp"
#include "maskbeam/mask.hpp"
#include "maskbeam/masknet.hpp"
#include "maskbeam/optimizer.hpp"
#include "maskbeam/stft.hpp"

namespace maskbeam {

struct NetConfig {
  int hidden = 256;
  OutputActivation activation = OutputActivation::kSigmoid;
};

struct TrainConfig {
  AdamConfig adam;
  int max_epochs = 50;
  int patience = 5;
  bool early_stopping = true;  // false: run exactly max_epochs, keep the last
  std::uint64_t seed = 1;
  LossWeights loss_weights;  // student objective only
  int jobs = 0;              // workers for channel-parallel passes, 0 = auto

  void validate() const;
};

enum class TrainMode { kBaseline, kTeacher, kStudent };

std::string to_string(TrainMode m);
TrainMode train_mode_from_string(const std::string& s);

struct EarlyStopDecision {
  bool stop = false;
  int best_epoch = 0;  // 1-based index into the history
};

// Stop once the dev loss has failed to improve on the running best for
// `patience` consecutive epochs. Best epoch is the argmin (first occurrence).
EarlyStopDecision early_stop(std::span<const double> dev_history, int patience);

struct EpochRecord {
  int epoch = 0;  // 0 is the evaluation at initialization, before any update
  double train_loss = 0.0, dev_loss = 0.0;
  double train_st = 0.0, train_x = 0.0, train_n = 0.0;
  double dev_st = 0.0, dev_x = 0.0, dev_n = 0.0;
  double wall_seconds = 0.0;
  // per-utterance total losses at this record's parameter snapshot,
  // manifest order
  std::vector<std::pair<std::string, double>> train_utt_losses;
  std::vector<std::pair<std::string, double>> dev_utt_losses;
};

struct TrainResult {
  std::vector<EpochRecord> records;
  int best_epoch = 0;
  std::string checkpoint_path;
  MaskNetParams params;  // the parameters that were checkpointed
};

struct TrainSetup {
  StftConfig stft;
  IbmConfig ibm;
  NetConfig net;
  TrainConfig train;
  std::string checkpoint_path;  // output; empty = do not save
  std::string log_path;         // output JSON-lines; empty = no log
  std::string config_digest;
};

// Two-head network on per-channel noisy features against binary targets from
// the reference channel's clean/noise pair. One optimizer step per utterance;
// the minibatch is the frame sequences of all M channels of that utterance.
TrainResult train_baseline(const std::vector<ManifestEntry>& entries, const TrainSetup& setup);

// Single-head network on features of the GEV-beamformed mix (beamformed with
// the baseline network's masks), against the same binary speech targets.
TrainResult train_teacher(const std::vector<ManifestEntry>& entries,
                          const std::string& baseline_checkpoint, const TrainSetup& setup);

// For every train/dev utterance (simu and real): beamform with the baseline
// network, run the teacher on the beamformed features, cache its speech mask.
// Planes are also written to cache_dir as mask tensor files keyed by id.
std::map<std::string, MaskPlane> build_soft_targets(const std::vector<ManifestEntry>& entries,
                                                    const std::string& baseline_checkpoint,
                                                    const std::string& teacher_checkpoint,
                                                    const std::string& cache_dir,
                                                    const StftConfig& stft_cfg, int jobs = 1);

std::map<std::string, MaskPlane> load_soft_targets(const std::string& cache_dir,
                                                   const std::vector<ManifestEntry>& entries);

// Two-head network, per-utterance objective switched on the entry kind:
// simu utterances use the weighted sum of the distillation term and both
// binary terms; real utterances use the distillation term alone. The same
// soft target supervises all M channel sequences of an utterance.
TrainResult train_student(const std::vector<ManifestEntry>& entries,
                          const std::map<std::string, MaskPlane>& soft_targets,
                          const TrainSetup& setup);

}  // namespace maskbeam

#endif  // MASKBEAM_TRAINER_HPP
