#ifndef MASKBEAM_CONFIG_HPP
#define MASKBEAM_CONFIG_HPP

#include <json.hpp>
#include <string>

#include "maskbeam/mask.hpp"
#include "maskbeam/sim.hpp"
#include "maskbeam/stft.hpp"
#include "maskbeam/trainer.hpp"

namespace maskbeam {

struct PipelinePaths {
  std::string corpus_dir = "corpus";
  std::string checkpoints_dir = "checkpoints";
  std::string reports_dir = "reports";
};

// One JSON file drives the whole pipeline; commands apply flag overrides on
// top. The digest of the effective config is embedded in checkpoints and
// report sidecars for provenance.
struct PipelineConfig {
  PipelinePaths paths;
  StftConfig stft;
  IbmConfig ibm;
  SimConfig sim;
  NetConfig net;
  TrainConfig train_baseline;
  TrainConfig train_teacher;
  TrainConfig train_student;

  static PipelineConfig defaults();
  static PipelineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  static PipelineConfig load(const std::string& path);
  void save(const std::string& path) const;

  // FNV-1a over the canonical serialization (sorted keys, no whitespace).
  std::string digest() const;

  const TrainConfig& train_config(TrainMode mode) const;
  TrainConfig& train_config(TrainMode mode);
};

}  // namespace maskbeam

#endif  // MASKBEAM_CONFIG_HPP
