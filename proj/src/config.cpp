#include "maskbeam/config.hpp"

#include <fstream>

namespace maskbeam {

using nlohmann::json;

namespace {

json stft_to_json(const StftConfig& c) {
  return {{"fft_size", c.fft_size},
          {"hop", c.hop},
          {"window", "hann"},
          {"sample_rate", c.sample_rate}};
}

StftConfig stft_from_json(const json& j) {
  StftConfig c;
  c.fft_size = j.value("fft_size", c.fft_size);
  c.hop = j.value("hop", c.hop);
  if (j.contains("window") && j["window"].get<std::string>() != "hann")
    throw ValidationError("stft.window: only 'hann' is supported");
  c.sample_rate = j.value("sample_rate", c.sample_rate);
  c.validate();
  return c;
}

json ibm_to_json(const IbmConfig& c) {
  return {{"speech_threshold", c.speech_threshold},
          {"noise_threshold", c.noise_threshold},
          {"domain", c.domain == MaskDomain::kPower ? "power" : "magnitude"}};
}

IbmConfig ibm_from_json(const json& j) {
  IbmConfig c;
  c.speech_threshold = j.value("speech_threshold", c.speech_threshold);
  c.noise_threshold = j.value("noise_threshold", c.noise_threshold);
  const std::string domain = j.value("domain", "power");
  if (domain == "power")
    c.domain = MaskDomain::kPower;
  else if (domain == "magnitude")
    c.domain = MaskDomain::kMagnitude;
  else
    throw ValidationError("ibm.domain: expected power|magnitude");
  c.validate();
  return c;
}

json net_to_json(const NetConfig& c) {
  return {{"hidden", c.hidden}, {"activation", to_string(c.activation)}};
}

NetConfig net_from_json(const json& j) {
  NetConfig c;
  c.hidden = j.value("hidden", c.hidden);
  if (j.contains("activation"))
    c.activation = output_activation_from_string(j["activation"].get<std::string>());
  return c;
}

json train_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"clip_norm", c.adam.clip_norm},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"early_stopping", c.early_stopping},
          {"seed", c.seed},
          {"jobs", c.jobs},
          {"loss_weights", {c.loss_weights.st, c.loss_weights.speech, c.loss_weights.noise}}};
}

TrainConfig train_from_json(const json& j, const TrainConfig& base) {
  TrainConfig c = base;
  c.adam.learning_rate = j.value("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = j.value("beta1", c.adam.beta1);
  c.adam.beta2 = j.value("beta2", c.adam.beta2);
  c.adam.epsilon = j.value("epsilon", c.adam.epsilon);
  c.adam.clip_norm = j.value("clip_norm", c.adam.clip_norm);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.early_stopping = j.value("early_stopping", c.early_stopping);
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  if (j.contains("loss_weights")) {
    const auto& w = j["loss_weights"];
    c.loss_weights.st = w.at(0).get<double>();
    c.loss_weights.speech = w.at(1).get<double>();
    c.loss_weights.noise = w.at(2).get<double>();
  }
  c.validate();
  return c;
}

}  // namespace

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  cfg.sim.apply_default_geometry();
  cfg.train_baseline.max_epochs = 25;
  cfg.train_teacher.max_epochs = 25;
  cfg.train_student.max_epochs = 25;
  return cfg;
}

PipelineConfig PipelineConfig::from_json(const json& j) {
  PipelineConfig cfg = defaults();
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    cfg.paths.corpus_dir = p.value("corpus_dir", cfg.paths.corpus_dir);
    cfg.paths.checkpoints_dir = p.value("checkpoints_dir", cfg.paths.checkpoints_dir);
    cfg.paths.reports_dir = p.value("reports_dir", cfg.paths.reports_dir);
  }
  if (j.contains("stft")) cfg.stft = stft_from_json(j["stft"]);
  if (j.contains("ibm")) cfg.ibm = ibm_from_json(j["ibm"]);
  if (j.contains("sim")) cfg.sim = sim_config_from_json(j["sim"]);
  if (j.contains("net")) cfg.net = net_from_json(j["net"]);
  if (j.contains("train")) {
    const auto& t = j["train"];
    if (t.contains("baseline")) cfg.train_baseline = train_from_json(t["baseline"], cfg.train_baseline);
    if (t.contains("teacher")) cfg.train_teacher = train_from_json(t["teacher"], cfg.train_teacher);
    if (t.contains("student")) cfg.train_student = train_from_json(t["student"], cfg.train_student);
  }
  if (cfg.sim.sample_rate != cfg.stft.sample_rate)
    throw ValidationError("config: sim and stft sample rates differ");
  return cfg;
}

json PipelineConfig::to_json() const {
  json j;
  j["paths"] = {{"corpus_dir", paths.corpus_dir},
                {"checkpoints_dir", paths.checkpoints_dir},
                {"reports_dir", paths.reports_dir}};
  j["stft"] = stft_to_json(stft);
  j["ibm"] = ibm_to_json(ibm);
  j["sim"] = sim_config_to_json(sim);
  j["net"] = net_to_json(net);
  j["train"] = {{"baseline", train_to_json(train_baseline)},
                {"teacher", train_to_json(train_teacher)},
                {"student", train_to_json(train_student)}};
  return j;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& ex) {
    throw ValidationError("malformed config " + path + ": " + ex.what());
  }
  return from_json(j);
}

void PipelineConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write config: " + path);
  out << to_json().dump(2) << "\n";
}

std::string PipelineConfig::digest() const { return to_hex(fnv1a64(to_json().dump())); }

const TrainConfig& PipelineConfig::train_config(TrainMode mode) const {
  switch (mode) {
    case TrainMode::kBaseline: return train_baseline;
    case TrainMode::kTeacher: return train_teacher;
    default: return train_student;
  }
}

TrainConfig& PipelineConfig::train_config(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBaseline: return train_baseline;
    case TrainMode::kTeacher: return train_teacher;
    default: return train_student;
  }
}

}  // namespace maskbeam
