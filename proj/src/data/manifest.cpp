#include "weldad/data/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "weldad/error.hpp"

namespace weldad::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <std::size_t N>
bool in_vocab(const std::array<std::string_view, N>& vocab, std::string_view v) {
  return std::find(vocab.begin(), vocab.end(), v) != vocab.end();
}

std::string at_line(std::size_t line, std::string_view field) {
  return "manifest line " + std::to_string(line) + ", field \"" + std::string(field) + "\": ";
}

std::string read_string(const json& j, const char* key, std::size_t line, bool required) {
  auto it = j.find(key);
  if (it == j.end()) {
    if (required) throw DataError(at_line(line, key) + "missing");
    return {};
  }
  if (!it->is_string()) throw DataError(at_line(line, key) + "expected a string");
  return it->get<std::string>();
}

ManifestEntry parse_entry(const json& j, std::size_t line) {
  if (!j.is_object()) throw DataError("manifest line " + std::to_string(line) + ": expected an object");
  static const std::set<std::string> known = {"sample_id", "audio",    "embedding",
                                              "category",  "weld_type", "material",
                                              "duration_s", "split"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw DataError(at_line(line, key) + "unknown field");
  }
  ManifestEntry e;
  e.sample_id = read_string(j, "sample_id", line, true);
  if (e.sample_id.empty()) throw DataError(at_line(line, "sample_id") + "empty");
  e.audio_path = read_string(j, "audio", line, false);
  e.embedding_path = read_string(j, "embedding", line, false);
  e.category = read_string(j, "category", line, true);
  if (!is_known_category(e.category)) {
    throw DataError(at_line(line, "category") + "unknown weld category \"" + e.category + "\"");
  }
  if (j.contains("weld_type")) {
    e.weld_type = read_string(j, "weld_type", line, true);
    if (!in_vocab(kWeldTypes, e.weld_type)) {
      throw DataError(at_line(line, "weld_type") + "unknown weld type \"" + e.weld_type + "\"");
    }
  }
  if (j.contains("material")) {
    e.material = read_string(j, "material", line, true);
    if (!in_vocab(kMaterials, e.material)) {
      throw DataError(at_line(line, "material") + "unknown material \"" + e.material + "\"");
    }
  }
  if (auto it = j.find("duration_s"); it != j.end()) {
    if (!it->is_number()) throw DataError(at_line(line, "duration_s") + "expected a number");
    e.duration_s = it->get<double>();
    if (!(e.duration_s >= 0.0)) throw DataError(at_line(line, "duration_s") + "must be >= 0");
  }
  if (j.contains("split")) {
    try {
      e.split = split_from_string(read_string(j, "split", line, true));
    } catch (const DataError& err) {
      throw DataError(at_line(line, "split") + err.what());
    }
  }
  return e;
}

}  // namespace

fs::path DatasetManifest::resolve(const std::string& relative) const {
  const fs::path p(relative);
  return p.is_absolute() ? p : base_dir / p;
}

const ManifestEntry& DatasetManifest::find(std::string_view sample_id) const {
  for (const auto& e : entries) {
    if (e.sample_id == sample_id) return e;
  }
  throw DataError("sample \"" + std::string(sample_id) + "\" not in manifest");
}

DatasetManifest parse_manifest(std::string_view text, fs::path base_dir) {
  DatasetManifest m;
  m.base_dir = std::move(base_dir);
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("manifest line " + std::to_string(number) + ": invalid JSON: " + e.what());
    }
    ManifestEntry e = parse_entry(j, number);
    if (!seen.insert(e.sample_id).second) {
      throw DataError("manifest line " + std::to_string(number) + ": duplicate sample id \"" +
                      e.sample_id + "\"");
    }
    m.entries.push_back(std::move(e));
  }
  return m;
}

DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path());
}

std::string format_manifest(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& e : manifest.entries) {
    json j = {{"sample_id", e.sample_id}, {"audio", e.audio_path},
              {"embedding", e.embedding_path}, {"category", e.category},
              {"weld_type", e.weld_type},  {"material", e.material},
              {"duration_s", e.duration_s}};
    if (e.split) j["split"] = std::string(to_string(*e.split));
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << format_manifest(manifest);
}

ValidationReport validate(const DatasetManifest& manifest) {
  ValidationReport r;
  std::set<std::string> seen;
  for (const auto& e : manifest.entries) {
    if (!seen.insert(e.sample_id).second) r.duplicate_ids.push_back(e.sample_id);
    if (!is_known_category(e.category)) r.unknown_categories.push_back(e.sample_id + ": " + e.category);
    for (const std::string* p : {&e.audio_path, &e.embedding_path}) {
      if (!p->empty() && !fs::exists(manifest.resolve(*p))) {
        r.missing_files.push_back(manifest.resolve(*p).string());
      }
    }
  }
  return r;
}

}  // namespace weldad::data
