#include "maskbeam/mask.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <json.hpp>

namespace maskbeam {

using nlohmann::json;

std::string to_string(MaskKind k) { return k == MaskKind::kSpeech ? "speech" : "noise"; }

std::string to_string(MaskHardness h) {
  return h == MaskHardness::kBinary ? "binary" : "soft";
}

MaskKind mask_kind_from_string(const std::string& s) {
  if (s == "speech") return MaskKind::kSpeech;
  if (s == "noise") return MaskKind::kNoise;
  throw ValidationError("unknown mask kind '" + s + "'");
}

MaskHardness mask_hardness_from_string(const std::string& s) {
  if (s == "binary") return MaskHardness::kBinary;
  if (s == "soft") return MaskHardness::kSoft;
  throw ValidationError("unknown mask hardness '" + s + "'");
}

void IbmConfig::validate() const {
  if (speech_threshold <= 0.0 || noise_threshold <= 0.0)
    throw ValidationError("IBM thresholds must be positive");
}

std::pair<MaskPlane, MaskPlane> ideal_binary_masks(const Spectrogram& clean,
                                                   const Spectrogram& noise,
                                                   const IbmConfig& cfg) {
  cfg.validate();
  if (clean.num_channels != 1 || noise.num_channels != 1)
    throw ValidationError("ideal_binary_masks: inputs must be single-channel");
  clean.check_same_shape(noise);

  const int T = clean.num_frames, B = clean.num_bins;
  MaskPlane speech{Eigen::MatrixXd::Zero(T, B), MaskKind::kSpeech, MaskHardness::kBinary};
  MaskPlane noise_mask{Eigen::MatrixXd::Zero(T, B), MaskKind::kNoise, MaskHardness::kBinary};

  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      double x = std::abs(clean.at(t, b));
      double n = std::abs(noise.at(t, b));
      if (cfg.domain == MaskDomain::kPower) {
        x *= x;
        n *= n;
      }
      if (x == 0.0 && n == 0.0) continue;  // silence: neither dominated
      if (n == 0.0) {
        speech.values(t, b) = 1.0;
        continue;
      }
      if (x == 0.0) {
        noise_mask.values(t, b) = 1.0;
        continue;
      }
      if (x / n > cfg.speech_threshold) speech.values(t, b) = 1.0;
      if (n / x > cfg.noise_threshold) noise_mask.values(t, b) = 1.0;
    }
  }
  return {std::move(speech), std::move(noise_mask)};
}

Spectrogram apply_mask(const MaskPlane& mask, const Spectrogram& spec) {
  if (spec.num_channels != 1)
    throw ValidationError("apply_mask: spectrogram must be single-channel");
  if (mask.num_frames() != spec.num_frames || mask.num_bins() != spec.num_bins)
    throw ValidationError("apply_mask: mask/spectrogram shape mismatch");

  Spectrogram out = spec;
  for (int t = 0; t < spec.num_frames; ++t)
    for (int b = 0; b < spec.num_bins; ++b) out.at(t, b) *= mask.values(t, b);
  return out;
}

MaskPlane median_fuse(const std::vector<MaskPlane>& masks) {
  if (masks.empty()) throw ValidationError("median_fuse: empty mask list");
  const int T = masks[0].num_frames(), B = masks[0].num_bins();
  for (const auto& m : masks) {
    if (m.kind != masks[0].kind) throw ValidationError("median_fuse: mixed mask kinds");
    if (m.num_frames() != T || m.num_bins() != B)
      throw ValidationError("median_fuse: mask shape mismatch");
  }

  const int M = static_cast<int>(masks.size());
  MaskPlane out{Eigen::MatrixXd(T, B), masks[0].kind, MaskHardness::kSoft};
  std::vector<double> vals(M);
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      for (int m = 0; m < M; ++m) vals[m] = masks[m].values(t, b);
      std::sort(vals.begin(), vals.end());
      out.values(t, b) = (M % 2 == 1) ? vals[M / 2]
                                      : 0.5 * (vals[M / 2 - 1] + vals[M / 2]);
    }
  }
  return out;
}

namespace {
constexpr char kMaskMagic[8] = {'M', 'B', 'M', 'A', 'S', 'K', '1', '\n'};
}

void save_mask(const std::string& path, const MaskPlane& mask) {
  json header;
  header["shape"] = {mask.num_frames(), mask.num_bins()};
  header["kind"] = to_string(mask.kind);
  header["hardness"] = to_string(mask.hardness);
  const std::string h = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write mask file: " + path);
  out.write(kMaskMagic, 8);
  std::uint32_t hlen = static_cast<std::uint32_t>(h.size());
  unsigned char lb[4] = {static_cast<unsigned char>(hlen & 0xff),
                         static_cast<unsigned char>((hlen >> 8) & 0xff),
                         static_cast<unsigned char>((hlen >> 16) & 0xff),
                         static_cast<unsigned char>((hlen >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(lb), 4);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (int t = 0; t < mask.num_frames(); ++t) {
    for (int b = 0; b < mask.num_bins(); ++b) {
      float v = static_cast<float>(mask.values(t, b));
      char buf[4];
      std::memcpy(buf, &v, 4);
      out.write(buf, 4);
    }
  }
  if (!out) throw IoError("mask write failed: " + path);
}

MaskPlane load_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open mask file: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMaskMagic, 8) != 0)
    throw ValidationError("not a mask file: " + path);
  unsigned char lb[4];
  in.read(reinterpret_cast<char*>(lb), 4);
  if (!in) throw ValidationError("truncated mask header: " + path);
  std::uint32_t hlen = static_cast<std::uint32_t>(lb[0]) | (static_cast<std::uint32_t>(lb[1]) << 8) |
                       (static_cast<std::uint32_t>(lb[2]) << 16) | (static_cast<std::uint32_t>(lb[3]) << 24);
  std::string h(hlen, '\0');
  in.read(h.data(), hlen);
  if (!in) throw ValidationError("truncated mask header: " + path);

  json header = json::parse(h);
  const int T = header.at("shape").at(0).get<int>();
  const int B = header.at("shape").at(1).get<int>();
  MaskPlane mask;
  mask.kind = mask_kind_from_string(header.at("kind").get<std::string>());
  mask.hardness = mask_hardness_from_string(header.at("hardness").get<std::string>());
  mask.values.resize(T, B);
  for (int t = 0; t < T; ++t) {
    for (int b = 0; b < B; ++b) {
      char buf[4];
      in.read(buf, 4);
      if (!in) throw ValidationError("truncated mask data: " + path);
      float v;
      std::memcpy(&v, buf, 4);
      mask.values(t, b) = static_cast<double>(v);
    }
  }
  return mask;
}

}  // namespace maskbeam
