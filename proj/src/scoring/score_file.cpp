#include "weldad/scoring/score_file.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "weldad/error.hpp"

namespace weldad::scoring {

namespace {

constexpr std::string_view kCsvHeader = "sample_id,modality,label,category,split,raw_score,z_score";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(std::string_view line, int line_no) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        fields.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.emplace_back();
    } else {
      fields.back() += c;
    }
  }
  if (quoted) throw DataError("scores line " + std::to_string(line_no) + ": unterminated quote");
  return fields;
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_number(const std::string& s, int line_no, const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    if (!std::isfinite(v)) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw DataError("scores line " + std::to_string(line_no) + ", field \"" + field +
                    "\": not a finite number: \"" + s + "\"");
  }
}

void check_record(const ScoreRecord& r, int line_no) {
  const auto where = "scores line " + std::to_string(line_no) + ": ";
  if (r.sample_id.empty()) throw DataError(where + "empty sample_id");
  if (!data::is_known_category(r.category)) {
    throw DataError(where + "unknown category \"" + r.category + "\"");
  }
  if (data::label_for_category(r.category) != r.label) {
    throw DataError(where + "label contradicts category \"" + r.category + "\"");
  }
}

template <typename F>
auto at_line(int line_no, F&& f) {
  try {
    return f();
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw DataError("scores line " + std::to_string(line_no) + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_jsonl(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl") return true;
  if (ext == ".csv") return false;
  throw ConfigError("score file must end in .csv or .jsonl: " + path.string());
}

}  // namespace

std::string format_scores_csv(const std::vector<ScoreRecord>& records) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += csv_field(r.sample_id) + ',' + std::string(to_string(r.modality)) + ',' +
           std::string(data::to_string(r.label)) + ',' + csv_field(r.category) + ',' +
           (r.split ? std::string(data::to_string(*r.split)) : std::string()) + ',' +
           number(r.raw_score) + ',' + number(r.z_score) + '\n';
  }
  return out;
}

std::string format_scores_jsonl(const std::vector<ScoreRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j = {{"sample_id", r.sample_id},
                                {"modality", to_string(r.modality)},
                                {"label", data::to_string(r.label)},
                                {"category", r.category}};
    if (r.split) j["split"] = data::to_string(*r.split);
    j["raw_score"] = r.raw_score;
    j["z_score"] = r.z_score;
    out += j.dump() + '\n';
  }
  return out;
}

std::vector<ScoreRecord> parse_scores_csv(std::string_view text) {
  std::vector<ScoreRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != kCsvHeader) {
        throw DataError("scores line " + std::to_string(line_no) + ": expected header \"" +
                        std::string(kCsvHeader) + "\"");
      }
      header = true;
      continue;
    }
    const auto f = split_csv(line, line_no);
    if (f.size() != 7) {
      throw DataError("scores line " + std::to_string(line_no) + ": expected 7 fields, got " +
                      std::to_string(f.size()));
    }
    ScoreRecord r = at_line(line_no, [&] {
      ScoreRecord r;
      r.sample_id = f[0];
      r.modality = modality_from_string(f[1]);
      r.label = data::label_from_string(f[2]);
      r.category = f[3];
      if (!f[4].empty()) r.split = data::split_from_string(f[4]);
      return r;
    });
    r.raw_score = parse_number(f[5], line_no, "raw_score");
    r.z_score = parse_number(f[6], line_no, "z_score");
    check_record(r, line_no);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<ScoreRecord> parse_scores_jsonl(std::string_view text) {
  std::vector<ScoreRecord> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ScoreRecord r = at_line(line_no, [&] {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
        ScoreRecord r;
        r.sample_id = j.at("sample_id").get<std::string>();
        r.modality = modality_from_string(j.at("modality").get<std::string>());
        r.label = data::label_from_string(j.at("label").get<std::string>());
        r.category = j.at("category").get<std::string>();
        if (j.contains("split") && !j["split"].is_null()) {
          r.split = data::split_from_string(j["split"].get<std::string>());
        }
        r.raw_score = j.at("raw_score").get<double>();
        r.z_score = j.at("z_score").get<double>();
        return r;
      } catch (const nlohmann::json::exception& e) {
        throw DataError("scores line " + std::to_string(line_no) + ": " + e.what());
      }
    });
    check_record(r, line_no);
    out.push_back(std::move(r));
  }
  return out;
}

void save_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& records) {
  const std::string text = is_jsonl(path) ? format_scores_jsonl(records) : format_scores_csv(records);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<ScoreRecord> load_scores(const std::filesystem::path& path) {
  const bool jsonl = is_jsonl(path);
  const std::string text = read_file(path);
  return jsonl ? parse_scores_jsonl(text) : parse_scores_csv(text);
}

evaluation::LabeledScoreSet to_labeled_set(const std::vector<ScoreRecord>& records,
                                           std::optional<Modality> modality,
                                           std::optional<data::Split> split, bool use_z) {
  evaluation::LabeledScoreSet out;
  for (const auto& r : records) {
    if (modality && r.modality != *modality) continue;
    if (split && r.split != split) continue;
    out.push_back({r.sample_id, use_z ? r.z_score : r.raw_score, r.label, r.category,
                   r.split.value_or(data::Split::kTest)});
  }
  return out;
}

}  // namespace weldad::scoring
