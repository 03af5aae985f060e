#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "weldad/data/labels.hpp"
#include "weldad/evaluation/metrics.hpp"

namespace weldad::evaluation {

/// One sample-level score with its ground truth.
struct LabeledScore {
  std::string sample_id;
  double score = 0.0;
  data::Label label = data::Label::kGood;
  std::string category;
  data::Split split = data::Split::kTest;
};

using LabeledScoreSet = std::vector<LabeledScore>;

/// Throws DataError when label and category disagree or the category is unknown.
void check_labels(const LabeledScoreSet& set);

double auc(const LabeledScoreSet& set);

struct CategoryAuc {
  std::string category;  // a defect category or "All"
  int n_good = 0;
  int n_defect = 0;
  double auc = 0.0;
};

/// Each defect category against all goods, in vocabulary order, then "All"
/// (goods against every defect, pooled). Empty categories are skipped with
/// a warning. Throws DataError without goods or without defects.
std::vector<CategoryAuc> per_category_auc(const LabeledScoreSet& set);

struct EvalReport {
  std::string title;
  std::vector<CategoryAuc> categories;
  EerResult eer;
  std::vector<RocPoint> roc;
};

EvalReport evaluate(const LabeledScoreSet& set, std::string title = {});

nlohmann::json to_json(const EvalReport& report);
/// Aligned text table: category, #good, #defect, AUC; EER on the last line.
std::string format_table(const EvalReport& report);
/// Standalone SVG with ROC (left) and DET (right) panels on linear axes.
std::string render_svg(const EvalReport& report);

}  // namespace weldad::evaluation
