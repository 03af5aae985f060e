#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "weldad/data/labels.hpp"
#include "weldad/evaluation/report.hpp"
#include "weldad/scoring/score_series.hpp"

namespace weldad::scoring {

/// One sample-level score.
struct ScoreRecord {
  std::string sample_id;
  Modality modality = Modality::kAudio;
  data::Label label = data::Label::kGood;
  std::string category;
  std::optional<data::Split> split;
  double raw_score = 0.0;
  double z_score = 0.0;

  bool operator==(const ScoreRecord&) const = default;
};

// CSV header: sample_id,modality,label,category,split,raw_score,z_score
// (split may be empty). JSONL uses the same keys, one object per line.
// Scores are written with 17 significant digits, so files round-trip exactly.
std::string format_scores_csv(const std::vector<ScoreRecord>& records);
std::string format_scores_jsonl(const std::vector<ScoreRecord>& records);
/// Throws DataError naming the line for malformed rows, unknown categories
/// and labels that contradict the category.
std::vector<ScoreRecord> parse_scores_csv(std::string_view text);
std::vector<ScoreRecord> parse_scores_jsonl(std::string_view text);

/// Format chosen by extension: ".csv" or ".jsonl".
void save_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> load_scores(const std::filesystem::path& path);

/// Records of one modality (and split, if given), using z or raw scores.
evaluation::LabeledScoreSet to_labeled_set(const std::vector<ScoreRecord>& records,
                                           std::optional<Modality> modality,
                                           std::optional<data::Split> split, bool use_z);

}  // namespace weldad::scoring
