#include "maskbeam/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <json.hpp>
#include <vector>

namespace maskbeam {

using nlohmann::json;

namespace {
constexpr char kCkptMagic[8] = {'M', 'B', 'C', 'K', 'P', 'T', '1', '\n'};
}

void save_checkpoint(const std::string& path, const MaskNetParams& params,
                     const CheckpointMeta& meta) {
  auto views = params.views();

  json header;
  header["format"] = "maskbeam-checkpoint-v1";
  header["num_bins"] = params.dims.num_bins;
  header["hidden"] = params.dims.hidden;
  json heads = json::array({"speech"});
  if (params.dims.has_noise_head) heads.push_back("noise");
  header["heads"] = heads;
  header["activation"] = to_string(params.activation);
  header["epoch"] = meta.epoch;
  header["config_digest"] = meta.config_digest;
  json arrays = json::array();
  for (const auto& v : views)
    arrays.push_back({{"name", v.name}, {"rows", v.rows}, {"cols", v.cols}});
  header["params"] = arrays;
  const std::string h = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kCkptMagic, 8);
  const std::uint32_t hlen = static_cast<std::uint32_t>(h.size());
  unsigned char lb[4] = {static_cast<unsigned char>(hlen & 0xff),
                         static_cast<unsigned char>((hlen >> 8) & 0xff),
                         static_cast<unsigned char>((hlen >> 16) & 0xff),
                         static_cast<unsigned char>((hlen >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(lb), 4);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));

  std::vector<char> buf;
  for (const auto& v : views) {
    buf.resize(static_cast<std::size_t>(v.size()) * 4);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const float f = static_cast<float>(v.data[i]);
      std::memcpy(buf.data() + 4 * i, &f, 4);
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw ValidationError("not a checkpoint file: " + path);
  unsigned char lb[4];
  in.read(reinterpret_cast<char*>(lb), 4);
  if (!in) throw ValidationError("truncated checkpoint header: " + path);
  const std::uint32_t hlen = static_cast<std::uint32_t>(lb[0]) |
                             (static_cast<std::uint32_t>(lb[1]) << 8) |
                             (static_cast<std::uint32_t>(lb[2]) << 16) |
                             (static_cast<std::uint32_t>(lb[3]) << 24);
  std::string h(hlen, '\0');
  in.read(h.data(), hlen);
  if (!in) throw ValidationError("truncated checkpoint header: " + path);

  json header;
  try {
    header = json::parse(h);
  } catch (const json::exception& ex) {
    throw ValidationError("malformed checkpoint header in " + path + ": " + ex.what());
  }
  if (header.value("format", "") != "maskbeam-checkpoint-v1")
    throw ValidationError("unsupported checkpoint format in " + path);

  MaskNetDims dims;
  dims.num_bins = header.at("num_bins").get<int>();
  dims.hidden = header.at("hidden").get<int>();
  dims.has_noise_head = false;
  for (const auto& head : header.at("heads"))
    if (head.get<std::string>() == "noise") dims.has_noise_head = true;

  Checkpoint ckpt;
  ckpt.params = MaskNetParams::zeros(
      dims, output_activation_from_string(header.at("activation").get<std::string>()));
  ckpt.meta.epoch = header.value("epoch", 0);
  ckpt.meta.config_digest = header.value("config_digest", "");

  auto views = ckpt.params.views();
  const auto& arrays = header.at("params");
  if (arrays.size() != views.size())
    throw ValidationError("checkpoint array count mismatch in " + path);
  for (std::size_t k = 0; k < views.size(); ++k) {
    const auto& a = arrays.at(k);
    if (a.at("name").get<std::string>() != views[k].name ||
        a.at("rows").get<Eigen::Index>() != views[k].rows ||
        a.at("cols").get<Eigen::Index>() != views[k].cols)
      throw ValidationError("checkpoint array layout mismatch at '" + views[k].name + "'");
    std::vector<char> buf(static_cast<std::size_t>(views[k].size()) * 4);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!in) throw ValidationError("truncated checkpoint data: " + path);
    for (Eigen::Index i = 0; i < views[k].size(); ++i) {
      float f;
      std::memcpy(&f, buf.data() + 4 * i, 4);
      views[k].data[i] = static_cast<double>(f);
    }
  }
  return ckpt;
}

}  // namespace maskbeam
