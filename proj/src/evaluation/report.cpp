#include "weldad/evaluation/report.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "weldad/error.hpp"
#include "weldad/log.hpp"

namespace weldad::evaluation {

namespace {

std::pair<std::vector<double>, std::vector<data::Label>> columns(const LabeledScoreSet& set) {
  std::vector<double> s;
  std::vector<data::Label> l;
  for (const auto& e : set) {
    s.push_back(e.score);
    l.push_back(e.label);
  }
  return {std::move(s), std::move(l)};
}

nlohmann::json threshold_json(double t) {
  return std::isfinite(t) ? nlohmann::json(t) : nlohmann::json(nullptr);
}

}  // namespace

void check_labels(const LabeledScoreSet& set) {
  for (const auto& e : set) {
    if (data::label_for_category(e.category) != e.label) {
      throw DataError("sample \"" + e.sample_id + "\": label " +
                      std::string(data::to_string(e.label)) + " contradicts category \"" +
                      e.category + "\"");
    }
  }
}

double auc(const LabeledScoreSet& set) {
  const auto [s, l] = columns(set);
  return auc(s, l);
}

std::vector<CategoryAuc> per_category_auc(const LabeledScoreSet& set) {
  check_labels(set);
  LabeledScoreSet goods;
  for (const auto& e : set) {
    if (e.label == data::Label::kGood) goods.push_back(e);
  }
  if (goods.empty()) throw DataError("per-category AUC needs good samples");
  std::vector<CategoryAuc> out;
  int total_defects = 0;
  for (std::string_view category : data::kCategories) {
    if (category == data::kGoodCategory) continue;
    LabeledScoreSet subset = goods;
    for (const auto& e : set) {
      if (e.category == category) subset.push_back(e);
    }
    const int n_def = static_cast<int>(subset.size() - goods.size());
    if (n_def == 0) {
      log().warn("no samples for category \"{}\"; skipped", category);
      continue;
    }
    total_defects += n_def;
    out.push_back({std::string(category), static_cast<int>(goods.size()), n_def, auc(subset)});
  }
  if (total_defects == 0) throw DataError("per-category AUC needs defect samples");
  out.push_back({"All", static_cast<int>(goods.size()), total_defects, auc(set)});
  return out;
}

EvalReport evaluate(const LabeledScoreSet& set, std::string title) {
  EvalReport r;
  r.title = std::move(title);
  r.categories = per_category_auc(set);
  const auto [s, l] = columns(set);
  r.eer = eer(s, l);
  r.roc = roc_curve(s, l);
  return r;
}

nlohmann::json to_json(const EvalReport& report) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : report.categories) {
    cats.push_back({{"category", c.category}, {"n_good", c.n_good},
                    {"n_defect", c.n_defect}, {"auc", c.auc}});
  }
  auto det_point = [](const DetPoint& p) {
    return nlohmann::json{{"fpr", p.fpr}, {"fnr", p.fnr}, {"threshold", threshold_json(p.threshold)}};
  };
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : report.roc) {
    roc.push_back({{"fpr", p.fpr}, {"tpr", p.tpr}, {"threshold", threshold_json(p.threshold)}});
  }
  return {{"schema", "weldad.eval_report/1"},
          {"title", report.title},
          {"categories", cats},
          {"eer", {{"eer", report.eer.eer},
                   {"lower", det_point(report.eer.lower)},
                   {"upper", det_point(report.eer.upper)}}},
          {"roc", roc}};
}

std::string format_table(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  if (!report.title.empty()) out << report.title << '\n';
  std::snprintf(line, sizeof line, "%-34s %6s %8s %8s\n", "Category", "#good", "#defect", "AUC");
  out << line;
  for (const auto& c : report.categories) {
    std::snprintf(line, sizeof line, "%-34s %6d %8d %8.4f\n", c.category.c_str(), c.n_good,
                  c.n_defect, c.auc);
    out << line;
  }
  std::snprintf(line, sizeof line, "EER %.4f\n", report.eer.eer);
  out << line;
  return out.str();
}

std::string render_svg(const EvalReport& report) {
  constexpr int kPanel = 320, kPad = 40, kWidth = 2 * kPanel + 3 * kPad, kHeight = kPanel + 2 * kPad;
  std::ostringstream svg;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" "
                "font-family=\"sans-serif\" font-size=\"12\">\n",
                kWidth, kHeight);
  svg << buf;
  auto panel = [&](int x0, const char* title, const char* xlabel, const char* ylabel,
                   const std::vector<std::pair<double, double>>& pts, bool diagonal_up) {
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%d\" y=\"%d\" width=\"%d\" height=\"%d\" fill=\"none\" stroke=\"#333\"/>\n",
                  x0, kPad, kPanel, kPanel);
    svg << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\">%s</text>\n",
                  x0 + kPanel / 2, kPad - 12, title);
    svg << buf;
    std::snprintf(buf, sizeof buf, "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\">%s</text>\n",
                  x0 + kPanel / 2, kPad + kPanel + 28, xlabel);
    svg << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%d\" y=\"%d\" text-anchor=\"middle\" transform=\"rotate(-90 %d %d)\">%s</text>\n",
                  x0 - 24, kPad + kPanel / 2, x0 - 24, kPad + kPanel / 2, ylabel);
    svg << buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"#bbb\" stroke-dasharray=\"4\"/>\n",
                  x0, diagonal_up ? kPad + kPanel : kPad, x0 + kPanel,
                  diagonal_up ? kPad : kPad + kPanel);
    svg << buf;
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x0 + x * kPanel, kPad + (1.0 - y) * kPanel);
      svg << buf;
    }
    svg << "\"/>\n";
  };
  std::vector<std::pair<double, double>> roc, det;
  for (const auto& p : report.roc) {
    roc.emplace_back(p.fpr, p.tpr);
    det.emplace_back(p.fpr, 1.0 - p.tpr);
  }
  const double all_auc = report.categories.empty() ? 0.0 : report.categories.back().auc;
  char title[64];
  std::snprintf(title, sizeof title, "ROC (AUC %.4f)", all_auc);
  panel(kPad, title, "false positive rate", "true positive rate", roc, true);
  std::snprintf(title, sizeof title, "DET (EER %.4f)", report.eer.eer);
  panel(2 * kPad + kPanel, title, "false positive rate", "false negative rate", det, false);
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace weldad::evaluation
