#include "maskbeam/manifest.hpp"

#include <filesystem>
#include <fstream>
#include <json.hpp>

namespace maskbeam {

using nlohmann::json;

std::string to_string(EntryKind k) { return k == EntryKind::kSimu ? "simu" : "real"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    default: return "test";
  }
}

EntryKind entry_kind_from_string(const std::string& s) {
  if (s == "simu") return EntryKind::kSimu;
  if (s == "real") return EntryKind::kReal;
  throw ValidationError("unknown kind '" + s + "' (expected simu|real)");
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "dev") return Split::kDev;
  if (s == "test") return Split::kTest;
  throw ValidationError("unknown split '" + s + "' (expected train|dev|test)");
}

namespace {

std::string resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path f(p);
  if (f.is_absolute()) return f.lexically_normal().string();
  return (base / f).lexically_normal().string();
}

ManifestEntry parse_entry(const json& j, const std::filesystem::path& base) {
  ManifestEntry e;
  e.id = j.at("id").get<std::string>();
  if (e.id.empty()) throw ValidationError("field 'id' is empty");
  e.kind = entry_kind_from_string(j.at("kind").get<std::string>());
  e.split = split_from_string(j.at("split").get<std::string>());
  e.mix_path = resolve(base, j.at("mix_path").get<std::string>());
  if (j.contains("clean_path")) e.clean_path = resolve(base, j.at("clean_path").get<std::string>());
  if (j.contains("noise_path")) e.noise_path = resolve(base, j.at("noise_path").get<std::string>());
  e.ref_channel = j.value("ref_channel", 0);

  if (e.kind == EntryKind::kSimu) {
    if (!e.clean_path) throw ValidationError("simu entry missing field 'clean_path'");
    if (!e.noise_path) throw ValidationError("simu entry missing field 'noise_path'");
  } else {
    if (e.clean_path) throw ValidationError("real entry must not carry field 'clean_path'");
    if (e.noise_path) throw ValidationError("real entry must not carry field 'noise_path'");
  }
  if (e.ref_channel < 0) throw ValidationError("field 'ref_channel' must be >= 0");
  return e;
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  const auto base = std::filesystem::path(path).parent_path();

  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& ex) {
      throw ValidationError(path + ":" + std::to_string(lineno) +
                            ": malformed JSON line: " + ex.what());
    }
    try {
      entries.push_back(parse_entry(j, base));
    } catch (const std::exception& ex) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return entries;
}

void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open manifest for writing: " + path);
  for (const auto& e : entries) {
    json j;
    j["id"] = e.id;
    j["kind"] = to_string(e.kind);
    j["split"] = to_string(e.split);
    j["mix_path"] = e.mix_path;
    if (e.clean_path) j["clean_path"] = *e.clean_path;
    if (e.noise_path) j["noise_path"] = *e.noise_path;
    j["ref_channel"] = e.ref_channel;
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("manifest write failed: " + path);
}

std::vector<ManifestEntry> filter_split(const std::vector<ManifestEntry>& entries, Split s) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

std::vector<ManifestEntry> filter_kind(const std::vector<ManifestEntry>& entries, EntryKind k) {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.kind == k) out.push_back(e);
  return out;
}

}  // namespace maskbeam
