#include <doctest.h>

#include <filesystem>

#include "maskbeam/config.hpp"

using namespace maskbeam;

TEST_CASE("pipeline config round-trips losslessly") {
  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.paths.corpus_dir = "/tmp/corpus_x";
  cfg.stft.fft_size = 512;
  cfg.stft.hop = 128;
  cfg.ibm.speech_threshold = 1.5;
  cfg.sim.counts["train"] = 7;
  cfg.net.hidden = 32;
  cfg.train_student.loss_weights = {0.45, 0.05, 0.5};
  cfg.train_student.max_epochs = 3;
  cfg.train_student.early_stopping = false;

  const auto path =
      (std::filesystem::temp_directory_path() / "maskbeam_config_test.json").string();
  cfg.save(path);
  const PipelineConfig back = PipelineConfig::load(path);

  CHECK(back.to_json() == cfg.to_json());
  CHECK(back.digest() == cfg.digest());
  CHECK(back.stft.fft_size == 512);
  CHECK(back.train_student.loss_weights.st == 0.45);
  CHECK(back.train_student.early_stopping == false);
  CHECK(back.sim.counts.at("train") == 7);
}

TEST_CASE("config digest tracks content") {
  PipelineConfig a = PipelineConfig::defaults();
  PipelineConfig b = PipelineConfig::defaults();
  CHECK(a.digest() == b.digest());
  b.train_student.loss_weights.st = 0.99;
  CHECK(a.digest() != b.digest());
}

TEST_CASE("default weights follow the best-performing triple") {
  const PipelineConfig cfg = PipelineConfig::defaults();
  CHECK(cfg.train_student.loss_weights.st == 0.35);
  CHECK(cfg.train_student.loss_weights.speech == 0.15);
  CHECK(cfg.train_student.loss_weights.noise == 0.50);
  CHECK(cfg.train_student.patience == 5);
  CHECK(cfg.stft.num_bins() == 513);
  CHECK(cfg.net.hidden == 256);
}

TEST_CASE("invalid configs are rejected") {
  CHECK_THROWS_AS(PipelineConfig::from_json({{"stft", {{"fft_size", 1000}}}}), ValidationError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"ibm", {{"domain", "???"}}}}), ValidationError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"sim", {{"sample_rate", 8000}}}}), ValidationError);
}
