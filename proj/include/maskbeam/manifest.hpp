#ifndef MASKBEAM_MANIFEST_HPP
#define MASKBEAM_MANIFEST_HPP

#include <optional>
#include <string>
#include <vector>

#include "maskbeam/common.hpp"

namespace maskbeam {

enum class EntryKind { kSimu, kReal };
enum class Split { kTrain, kDev, kTest };

std::string to_string(EntryKind k);
std::string to_string(Split s);
EntryKind entry_kind_from_string(const std::string& s);
Split split_from_string(const std::string& s);

// One corpus utterance. simu entries carry parallel clean/noise paths; real
// entries carry only the mix.
struct ManifestEntry {
  std::string id;
  EntryKind kind = EntryKind::kSimu;
  Split split = Split::kTrain;
  std::string mix_path;
  std::optional<std::string> clean_path;
  std::optional<std::string> noise_path;
  int ref_channel = 0;
};

// JSON-lines manifest. Order-preserving, all-or-error; parse and validation
// failures report the 1-based line number and offending field. Relative paths
// are resolved against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::string& path);

// Writes one JSON object per line, fields in a fixed order. Paths are written
// as given (the corpus builder uses paths relative to the manifest).
void write_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

std::vector<ManifestEntry> filter_split(const std::vector<ManifestEntry>& entries, Split s);
std::vector<ManifestEntry> filter_kind(const std::vector<ManifestEntry>& entries, EntryKind k);

}  // namespace maskbeam

#endif  // MASKBEAM_MANIFEST_HPP
