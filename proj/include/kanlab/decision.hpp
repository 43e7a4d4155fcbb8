#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "kanlab/common.hpp"
#include "kanlab/dataset.hpp"
#include "kanlab/pca.hpp"
#include "kanlab/pipeline.hpp"
#include "kanlab/rng.hpp"
#include "kanlab/spline.hpp"

namespace kanlab {

/// Which projected axis the boundary spline is a function of.
enum class Orientation { pc2_of_pc1 = 0, pc1_of_pc2 = 1 };

inline const char* to_string(Orientation o) {
  return o == Orientation::pc2_of_pc1 ? "pc2_of_pc1" : "pc1_of_pc2";
}

struct GridScore {
  int grid = 0;
  Orientation orientation = Orientation::pc2_of_pc1;
  double score = 0.0;  // held-out balanced accuracy
};

struct SeparabilityReport {
  double best_score = 0.0;
  int best_grid = 0;
  Orientation best_orientation = Orientation::pc2_of_pc1;
  double threshold = 0.9;
  bool suitable = false;
  std::vector<GridScore> per_grid_scores;  // sorted by (grid, orientation)
};

namespace detail {

/// Degree-3 boundary spline fit by plain gradient descent on the logistic
/// loss of label against the signed distance v - b(u). 500 steps, lr 0.05.
inline SplineFunction fit_boundary(std::span<const double> u,
                                   std::span<const double> v,
                                   std::span<const int> y, int grid) {
  double lo = u[0], hi = u[0];
  for (double x : u) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  SplineFunction b;
  b.knots = make_knots(lo, hi, grid, 3);
  double vbar = 0.0;
  for (double x : v) vbar += x;
  vbar /= static_cast<double>(v.size());
  b.coeffs.assign(static_cast<std::size_t>(b.knots.basis_count()), vbar);

  const int steps = 500;
  const double lr = 0.05;
  const double inv_n = 1.0 / static_cast<double>(u.size());
  std::vector<double> grad(b.coeffs.size());
  double window[8];
  for (int step = 0; step < steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t i = 0; i < u.size(); ++i) {
      const int first = basis_window(b.knots, u[i], window);
      double bu = 0.0;
      for (int r = 0; r <= 3; ++r)
        bu += b.coeffs[static_cast<std::size_t>(first + r)] * window[r];
      const double err = sigmoid(v[i] - bu) - static_cast<double>(y[i]);
      for (int r = 0; r <= 3; ++r)
        grad[static_cast<std::size_t>(first + r)] -= err * window[r] * inv_n;
    }
    for (std::size_t m = 0; m < b.coeffs.size(); ++m) b.coeffs[m] -= lr * grad[m];
  }
  return b;
}

/// Balanced accuracy of classifying positive when v - b(u) > 0 (or < 0 with
/// flip, for datasets whose positive class sits below the boundary).
inline double balanced_accuracy(const SplineFunction& b, std::span<const double> u,
                                std::span<const double> v, std::span<const int> y,
                                bool flip) {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    bool pred = v[i] - spline_eval(b, u[i]) > 0.0;
    if (flip) pred = !pred;
    if (y[i] == 1) (pred ? tp : fn)++;
    else (pred ? fp : tn)++;
  }
  const double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double tnr = static_cast<double>(tn) / static_cast<double>(tn + fp);
  return 0.5 * (tpr + tnr);
}

struct FitHoldout {
  std::vector<std::size_t> fit;
  std::vector<std::size_t> holdout;
};

/// Stratified 70/30 split of indices, seeded.
inline FitHoldout decision_split(std::span<const int> labels, std::uint64_t seed) {
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(i);
  if (by_class[0].empty() || by_class[1].empty())
    throw DataError("assess_separability: single-class input");

  Rng rng(derive_seed(seed, seed_stream::decision_split));
  FitHoldout out;
  for (auto& cls : by_class) {
    rng.shuffle(cls);
    std::size_t n_fit = static_cast<std::size_t>(
        std::floor(0.7 * static_cast<double>(cls.size()) + 1e-12));
    n_fit = std::min(std::max<std::size_t>(n_fit, 1), cls.size() - 1);
    out.fit.insert(out.fit.end(), cls.begin(), cls.begin() + n_fit);
    out.holdout.insert(out.holdout.end(), cls.begin() + n_fit, cls.end());
  }
  return out;
}

inline SeparabilityReport assess_presplit(const Matrix& points,
                                          std::span<const int> labels,
                                          const FitHoldout& parts,
                                          std::span<const int> grids,
                                          double threshold) {
  SeparabilityReport report;
  report.threshold = threshold;

  const auto gather = [&](const std::vector<std::size_t>& idx, std::size_t axis) {
    std::vector<double> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = points(idx[i], axis);
    return out;
  };
  const auto gather_labels = [&](const std::vector<std::size_t>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
  };
  const std::vector<int> y_fit = gather_labels(parts.fit);
  const std::vector<int> y_hold = gather_labels(parts.holdout);
  const std::vector<int> y_fit_flipped = [&] {
    std::vector<int> f(y_fit.size());
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = 1 - y_fit[i];
    return f;
  }();

  for (int grid : grids) {
    if (grid < 1) throw ConfigError("assess_separability: grids must be >= 1");
    for (Orientation orient : {Orientation::pc2_of_pc1, Orientation::pc1_of_pc2}) {
      const std::size_t ax_u = orient == Orientation::pc2_of_pc1 ? 0 : 1;
      const std::size_t ax_v = 1 - ax_u;
      const std::vector<double> u_fit = gather(parts.fit, ax_u);
      const std::vector<double> v_fit = gather(parts.fit, ax_v);
      const std::vector<double> u_hold = gather(parts.holdout, ax_u);
      const std::vector<double> v_hold = gather(parts.holdout, ax_v);

      // PCA sign conventions may place the positive class on either side of
      // the boundary, so fit both polarities and keep the better one.
      const SplineFunction b_up = fit_boundary(u_fit, v_fit, y_fit, grid);
      const SplineFunction b_dn = fit_boundary(u_fit, v_fit, y_fit_flipped, grid);
      const double s_up = balanced_accuracy(b_up, u_hold, v_hold, y_hold, false);
      const double s_dn = balanced_accuracy(b_dn, u_hold, v_hold, y_hold, true);
      report.per_grid_scores.push_back({grid, orient, std::max(s_up, s_dn)});
    }
  }

  std::stable_sort(report.per_grid_scores.begin(), report.per_grid_scores.end(),
                   [](const GridScore& a, const GridScore& b) {
                     if (a.grid != b.grid) return a.grid < b.grid;
                     return static_cast<int>(a.orientation) < static_cast<int>(b.orientation);
                   });
  report.best_score = -1.0;
  for (const auto& gs : report.per_grid_scores) {
    if (gs.score > report.best_score) {
      report.best_score = gs.score;
      report.best_grid = gs.grid;
      report.best_orientation = gs.orientation;
    }
  }
  report.suitable = report.best_score >= threshold;
  return report;
}

}  // namespace detail

/// Score how well a spline boundary separates labeled 2D points: for each
/// grid count and axis orientation, fit a degree-3 boundary on a 70% split
/// and report held-out balanced accuracy. suitable = best >= threshold.
inline SeparabilityReport assess_separability(const Matrix& points,
                                              std::span<const int> labels,
                                              std::span<const int> grids,
                                              double threshold,
                                              std::uint64_t seed = 0) {
  if (points.rows != labels.size())
    throw DataError("assess_separability: points/labels length mismatch");
  if (points.cols != 2) throw DataError("assess_separability: points must be n x 2");
  if (points.rows < 20)
    throw DataError("assess_separability: insufficient data, need at least 20 points");
  if (grids.empty()) throw ConfigError("assess_separability: grids must be non-empty");
  const auto parts = detail::decision_split(labels, seed);
  return detail::assess_presplit(points, labels, parts, grids, threshold);
}

struct QuickDecision {
  SeparabilityReport report;
  PcaModel pca;
  Matrix points2d;          // all rows, projected
  std::vector<int> labels;  // aligned with points2d
};

/// The screening rule: standardize, project to 2D with PCA, and test spline
/// separability. Scaler and PCA statistics come from the 70% fit split only;
/// the held-out 30% produces the score.
inline QuickDecision quick_decision(const Dataset& raw, std::span<const int> grids,
                                    double threshold, std::uint64_t seed = 0) {
  if (raw.size() < 20)
    throw DataError("quick_decision: insufficient data, need at least 20 rows");
  if (grids.empty()) throw ConfigError("quick_decision: grids must be non-empty");

  const auto parts = detail::decision_split(
      std::span<const int>(raw.labels.data(), raw.labels.size()), seed);

  const Dataset fit_rows = subset(raw, parts.fit);
  const Scaler scaler = standardize_fit(fit_rows);
  const Dataset fit_std = standardize_apply(scaler, fit_rows);
  const Dataset all_std = standardize_apply(scaler, raw);

  QuickDecision out;
  out.pca = pca_fit(fit_std.features);
  out.points2d = pca_transform(out.pca, all_std.features);
  out.labels = raw.labels;
  out.report = detail::assess_presplit(
      out.points2d, std::span<const int>(raw.labels.data(), raw.labels.size()),
      parts, grids, threshold);
  return out;
}

}  // namespace kanlab
