#ifndef MASKBEAM_CHECKPOINT_HPP
#define MASKBEAM_CHECKPOINT_HPP

#include <string>

#include "maskbeam/masknet.hpp"

namespace maskbeam {

struct CheckpointMeta {
  int epoch = 0;
  std::string config_digest;
};

struct Checkpoint {
  MaskNetParams params;
  CheckpointMeta meta;
};

// File layout: 8-byte magic, little-endian uint32 JSON header length, JSON
// header (dims, head set, activation, epoch, config digest, array manifest),
// then each parameter array as little-endian float32 in the canonical order
// from MaskNetParams::views(). Save/load/save is byte-identical.
void save_checkpoint(const std::string& path, const MaskNetParams& params,
                     const CheckpointMeta& meta);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace maskbeam

#endif  // MASKBEAM_CHECKPOINT_HPP
