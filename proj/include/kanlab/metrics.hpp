#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kanlab/common.hpp"
#include "kanlab/dataset.hpp"
#include "kanlab/optim.hpp"
#include "kanlab/rng.hpp"

namespace kanlab {

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::uint64_t total() const { return tp + fp + tn + fn; }
};

/// Binary-classification report. Rates whose denominator is empty (no
/// predicted positives, single-class labels) are explicitly absent rather
/// than 0 or NaN, so degenerate runs cannot corrupt rankings.
struct MetricsReport {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  double accuracy = 0.0;
  std::optional<double> auc_roc;
  std::optional<double> tpr;
  std::optional<double> fpr;
  std::optional<double> tnr;
  double logloss = 0.0;
  ConfusionCounts counts;
};

/// Thresholded confusion metrics plus rank-statistic AUC (0.5 credit for
/// ties) and clipped log loss.
inline MetricsReport compute_metrics(std::span<const double> probs,
                                     std::span<const int> labels,
                                     double threshold) {
  if (probs.size() != labels.size())
    throw DataError("compute_metrics: length mismatch");
  if (probs.empty()) throw DataError("compute_metrics: empty input");

  MetricsReport rep;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool pred = probs[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (pred && actual) ++rep.counts.tp;
    else if (pred && !actual) ++rep.counts.fp;
    else if (!pred && actual) ++rep.counts.fn;
    else ++rep.counts.tn;
  }
  const auto& c = rep.counts;
  const double n = static_cast<double>(c.total());
  rep.accuracy = static_cast<double>(c.tp + c.tn) / n;
  if (c.tp + c.fp > 0)
    rep.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) {
    rep.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    rep.tpr = rep.recall;
  }
  if (c.fp + c.tn > 0) {
    rep.fpr = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
    rep.tnr = 1.0 - *rep.fpr;
  }
  if (rep.precision && rep.recall) {
    const double pr = *rep.precision + *rep.recall;
    rep.f1 = pr > 0 ? 2.0 * *rep.precision * *rep.recall / pr : 0.0;
  }

  // AUC via average ranks: equals the all-pairs count with 0.5 per tie.
  const std::uint64_t pos = c.tp + c.fn;
  const std::uint64_t neg = c.fp + c.tn;
  if (pos > 0 && neg > 0) {
    std::vector<std::size_t> order(probs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return probs[a] < probs[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
      std::size_t j = i;
      while (j < order.size() && probs[order[j]] == probs[order[i]]) ++j;
      const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
      for (std::size_t k = i; k < j; ++k)
        if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
      i = j;
    }
    const double p = static_cast<double>(pos);
    rep.auc_roc = (rank_sum_pos - p * (p + 1.0) / 2.0) /
                  (p * static_cast<double>(neg));
  }

  double ll = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::min(std::max(probs[i], 1e-15), 1.0 - 1e-15);
    ll -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  rep.logloss = ll / n;
  return rep;
}

/// Optional hyperparameter context printed ahead of the metric rows.
struct ReportContext {
  std::vector<int> width;
  int k = 0;
  int grid = 0;
};

inline std::string format_width(const std::vector<int>& width) {
  std::string out = "{";
  for (std::size_t i = 0; i < width.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(width[i]);
  }
  out += "}";
  return out;
}

namespace detail {

inline std::string metric_cell(const std::optional<double>& v) {
  return v ? format_fixed(*v, 4) : "undefined (0/0)";
}

inline const std::vector<std::pair<std::string, std::optional<double> MetricsReport::*>>&
metric_rows() {
  static const std::vector<std::pair<std::string, std::optional<double> MetricsReport::*>>
      rows = {
          {"Precision", &MetricsReport::precision},
          {"Recall", &MetricsReport::recall},
          {"F1 Score", &MetricsReport::f1},
          {"AUC-ROC", &MetricsReport::auc_roc},
          {"True Positive Rate (Sensitivity)", &MetricsReport::tpr},
          {"False Positive Rate", &MetricsReport::fpr},
          {"True Negative Rate", &MetricsReport::tnr},
      };
  return rows;
}

}  // namespace detail

enum class ReportFormat { text, json, csv };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "text") return ReportFormat::text;
  if (s == "json") return ReportFormat::json;
  if (s == "csv") return ReportFormat::csv;
  throw ConfigError("unknown report format '" + s + "'");
}

/// Render a report. Text lists the metric rows with their paper names in
/// table order; csv emits a header plus one row (hyperparameters first when
/// a context is given, matching the trial-log column layout).
inline std::string render_report(const MetricsReport& rep, ReportFormat format,
                                 const std::optional<ReportContext>& ctx = {}) {
  if (format == ReportFormat::text) {
    std::ostringstream out;
    const int name_w = 34;
    auto row = [&](const std::string& name, const std::string& value) {
      out << name << std::string(static_cast<std::size_t>(std::max(1, name_w - static_cast<int>(name.size()))), ' ')
          << value << "\n";
    };
    row("Metric", "Value");
    if (ctx) {
      row("Width", format_width(ctx->width));
      row("K", std::to_string(ctx->k));
      row("Grid", std::to_string(ctx->grid));
    }
    row("Precision", detail::metric_cell(rep.precision));
    row("Recall", detail::metric_cell(rep.recall));
    row("F1 Score", detail::metric_cell(rep.f1));
    row("Accuracy", format_fixed(rep.accuracy, 4));
    row("AUC-ROC", detail::metric_cell(rep.auc_roc));
    row("True Positive Rate (Sensitivity)", detail::metric_cell(rep.tpr));
    row("False Positive Rate", detail::metric_cell(rep.fpr));
    row("True Negative Rate", detail::metric_cell(rep.tnr));
    row("Logarithmic Loss", format_fixed(rep.logloss, 4));
    row("Confusion (tp fp tn fn)",
        std::to_string(rep.counts.tp) + " " + std::to_string(rep.counts.fp) + " " +
            std::to_string(rep.counts.tn) + " " + std::to_string(rep.counts.fn));
    return out.str();
  }
  if (format == ReportFormat::json) {
    nlohmann::json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
      if (v) j[key] = *v; else j[key] = nullptr;
    };
    if (ctx) {
      j["width"] = ctx->width;
      j["k"] = ctx->k;
      j["grid"] = ctx->grid;
    }
    put("precision", rep.precision);
    put("recall", rep.recall);
    put("f1", rep.f1);
    j["accuracy"] = rep.accuracy;
    put("auc_roc", rep.auc_roc);
    put("tpr", rep.tpr);
    put("fpr", rep.fpr);
    put("tnr", rep.tnr);
    j["logloss"] = rep.logloss;
    j["counts"] = {{"tp", rep.counts.tp}, {"fp", rep.counts.fp},
                   {"tn", rep.counts.tn}, {"fn", rep.counts.fn}};
    return j.dump(2) + "\n";
  }
  // csv
  std::vector<std::string> header;
  std::vector<std::string> row;
  auto cell = [&](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("undefined");
  };
  if (ctx) {
    header.insert(header.end(), {"width", "k", "grid"});
    row.push_back(format_width(ctx->width));
    row.push_back(std::to_string(ctx->k));
    row.push_back(std::to_string(ctx->grid));
  }
  header.insert(header.end(),
                {"precision", "recall", "f1", "accuracy", "auc_roc", "tpr", "fpr",
                 "tnr", "logloss", "tp", "fp", "tn", "fn"});
  row.push_back(cell(rep.precision));
  row.push_back(cell(rep.recall));
  row.push_back(cell(rep.f1));
  row.push_back(format_double(rep.accuracy));
  row.push_back(cell(rep.auc_roc));
  row.push_back(cell(rep.tpr));
  row.push_back(cell(rep.fpr));
  row.push_back(cell(rep.tnr));
  row.push_back(format_double(rep.logloss));
  row.push_back(std::to_string(rep.counts.tp));
  row.push_back(std::to_string(rep.counts.fp));
  row.push_back(std::to_string(rep.counts.tn));
  row.push_back(std::to_string(rep.counts.fn));
  return csv::write_row(header) + csv::write_row(row);
}

/// Inverse of the text renderer, for round-trip checks and scripting.
inline MetricsReport parse_report_text(const std::string& text) {
  MetricsReport rep;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto starts = [&](const char* name) {
      return line.rfind(name, 0) == 0;
    };
    auto tail = [&](const char* name) {
      std::string v = line.substr(std::string(name).size());
      const auto a = v.find_first_not_of(' ');
      return a == std::string::npos ? std::string() : v.substr(a);
    };
    auto opt = [&](const char* name) -> std::optional<double> {
      const std::string v = tail(name);
      if (v.rfind("undefined", 0) == 0) return std::nullopt;
      return parse_double(v);
    };
    if (starts("Precision")) rep.precision = opt("Precision");
    else if (starts("Recall")) rep.recall = opt("Recall");
    else if (starts("F1 Score")) rep.f1 = opt("F1 Score");
    else if (starts("Accuracy")) rep.accuracy = parse_double(tail("Accuracy"));
    else if (starts("AUC-ROC")) rep.auc_roc = opt("AUC-ROC");
    else if (starts("True Positive Rate (Sensitivity)"))
      rep.tpr = opt("True Positive Rate (Sensitivity)");
    else if (starts("False Positive Rate")) rep.fpr = opt("False Positive Rate");
    else if (starts("True Negative Rate")) rep.tnr = opt("True Negative Rate");
    else if (starts("Logarithmic Loss"))
      rep.logloss = parse_double(tail("Logarithmic Loss"));
    else if (starts("Confusion (tp fp tn fn)")) {
      std::istringstream cs(tail("Confusion (tp fp tn fn)"));
      cs >> rep.counts.tp >> rep.counts.fp >> rep.counts.tn >> rep.counts.fn;
    }
  }
  return rep;
}

/// Confusion matrix as a 2x2 CSV (actual rows x predicted columns).
inline std::string confusion_csv(const ConfusionCounts& c) {
  std::string out = csv::write_row({"", "pred_0", "pred_1"});
  out += csv::write_row({"actual_0", std::to_string(c.tn), std::to_string(c.fp)});
  out += csv::write_row({"actual_1", std::to_string(c.fn), std::to_string(c.tp)});
  return out;
}

/// L2-regularized logistic regression, full-batch Adam, deterministic under
/// the seed. The sanity-comparison row for KAN reports.
inline MetricsReport logistic_baseline(const SplitDataset& data,
                                       std::uint64_t seed = 0,
                                       double threshold = 0.5) {
  const std::size_t d = data.train.dim();
  const std::size_t n = data.train.size();
  if (n == 0 || data.test.size() == 0)
    throw DataError("logistic_baseline: empty split");

  Rng rng(derive_seed(seed, seed_stream::baseline));
  std::vector<double> params(d + 1, 0.0);  // weights then bias
  for (std::size_t i = 0; i < d; ++i) params[i] = rng.normal(0.0, 0.01);

  const double l2 = 1e-4;
  const int epochs = 400;
  Adam opt(params.size(), 0.05);
  std::vector<double> grads(params.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::fill(grads.begin(), grads.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto x = data.train.features.row(r);
      double z = params[d];
      for (std::size_t i = 0; i < d; ++i) z += params[i] * x[i];
      const double err = sigmoid(z) - data.train.labels[r];
      for (std::size_t i = 0; i < d; ++i) grads[i] += err * x[i];
      grads[d] += err;
    }
    for (std::size_t i = 0; i < d; ++i)
      grads[i] = grads[i] / static_cast<double>(n) + l2 * params[i];
    grads[d] /= static_cast<double>(n);
    opt.step(params, grads);
  }

  std::vector<double> probs(data.test.size());
  for (std::size_t r = 0; r < data.test.size(); ++r) {
    const auto x = data.test.features.row(r);
    double z = params[d];
    for (std::size_t i = 0; i < d; ++i) z += params[i] * x[i];
    probs[r] = sigmoid(z);
  }
  return compute_metrics(probs, data.test.labels, threshold);
}

}  // namespace kanlab
