#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "weldad/data/labels.hpp"

namespace weldad::data {

inline constexpr std::array<std::string_view, 2> kWeldTypes = {"fillet", "non-fillet"};
inline constexpr std::array<std::string_view, 4> kMaterials = {"7mm-FE410", "3mm-FE410",
                                                              "7mm-BSK46", "3mm-BSK46"};

struct ManifestEntry {
  std::string sample_id;
  std::string audio_path;      // relative to the manifest directory unless absolute
  std::string embedding_path;  // idem
  std::string category;
  std::string weld_type = "fillet";
  std::string material = "7mm-FE410";
  double duration_s = 0.0;
  std::optional<Split> split;

  Label label() const { return label_for_category(category); }
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;  // directory the relative paths hang off

  std::filesystem::path resolve(const std::string& relative) const;
  const ManifestEntry& find(std::string_view sample_id) const;
};

// JSONL, one object per line:
//   {"sample_id": ..., "audio": ..., "embedding": ..., "category": ...,
//    "weld_type": ..., "material": ..., "duration_s": ..., "split": ...}
// "split" is optional. Blank lines are ignored.

/// Throws DataError naming the line and field for schema violations,
/// unknown categories/weld types/materials and duplicate ids.
DatasetManifest load_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest(std::string_view text, std::filesystem::path base_dir = {});
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
std::string format_manifest(const DatasetManifest& manifest);

struct ValidationReport {
  std::vector<std::string> duplicate_ids;
  std::vector<std::string> unknown_categories;  // "id: category"
  std::vector<std::string> missing_files;       // resolved paths

  bool ok() const {
    return duplicate_ids.empty() && unknown_categories.empty() && missing_files.empty();
  }
};

/// Non-throwing audit of a manifest, including file existence checks.
ValidationReport validate(const DatasetManifest& manifest);

}  // namespace weldad::data
