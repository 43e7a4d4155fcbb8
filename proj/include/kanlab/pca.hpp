#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <vector>

#include "kanlab/common.hpp"

namespace kanlab {

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order with matching eigenvectors as
/// rows of `vectors`.
struct EigenResult {
  std::vector<double> values;
  Matrix vectors;  // row i is the eigenvector for values[i]
};

inline EigenResult jacobi_eigen_sym(Matrix a, double tol = 1e-12,
                                    int max_sweeps = 100) {
  const std::size_t d = a.rows;
  if (a.cols != d) throw DataError("jacobi_eigen_sym: matrix not square");

  Matrix v(d, d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v(i, i) = 1.0;

  double norm = 0.0;
  for (double x : a.data) norm += x * x;
  const double off_tol = tol * std::max(1.0, std::sqrt(norm));

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < d; ++p)
      for (std::size_t q = p + 1; q < d; ++q) off += 2.0 * a(p, q) * a(p, q);
    if (std::sqrt(off) <= off_tol) break;

    for (std::size_t p = 0; p < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = tau >= 0.0 ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                    : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (std::size_t i = 0; i < d; ++i) {
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = c * aip - s * aiq;
          a(i, q) = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double api = a(p, i);
          const double aqi = a(q, i);
          a(p, i) = c * api - s * aqi;
          a(q, i) = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < d; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = c * vip - s * viq;
          v(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  EigenResult res;
  res.values.resize(d);
  res.vectors = Matrix(d, d);
  for (std::size_t r = 0; r < d; ++r) {
    res.values[r] = a(order[r], order[r]);
    for (std::size_t i = 0; i < d; ++i) res.vectors(r, i) = v(i, order[r]);
  }
  return res;
}

/// PCA to exactly two components: mean plus two orthonormal axes ordered by
/// explained variance. Sign convention: the largest-magnitude entry of each
/// component is positive, so repeated fits are bit-identical.
struct PcaModel {
  std::vector<double> mean;
  Matrix components;  // 2 x d
  std::array<double, 2> explained_variance{0.0, 0.0};
  std::array<double, 2> explained_ratio{0.0, 0.0};
};

inline Matrix covariance(const Matrix& data, std::vector<double>& mean_out) {
  const std::size_t n = data.rows;
  const std::size_t d = data.cols;
  mean_out.assign(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) mean_out[c] += data(r, c);
  for (double& m : mean_out) m /= static_cast<double>(n);

  Matrix cov(d, d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i) {
      const double di = data(r, i) - mean_out[i];
      for (std::size_t j = i; j < d; ++j)
        cov(i, j) += di * (data(r, j) - mean_out[j]);
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= static_cast<double>(n - 1);
      cov(j, i) = cov(i, j);
    }
  return cov;
}

inline PcaModel pca_fit(const Matrix& data) {
  if (data.rows < 3) throw DataError("pca_fit: need at least 3 rows");
  if (data.cols < 2) throw DataError("pca_fit: need at least 2 columns");
  for (double x : data.data)
    if (!std::isfinite(x)) throw DataError("pca_fit: non-finite input");

  PcaModel model;
  const Matrix cov = covariance(data, model.mean);
  double trace = 0.0;
  for (std::size_t i = 0; i < data.cols; ++i) trace += cov(i, i);
  if (trace <= 0.0) throw DataError("pca_fit: degenerate data, covariance is all-zero");

  const EigenResult eig = jacobi_eigen_sym(cov);
  model.components = Matrix(2, data.cols);
  for (std::size_t comp = 0; comp < 2; ++comp) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < data.cols; ++i)
      if (std::abs(eig.vectors(comp, i)) > std::abs(eig.vectors(comp, arg))) arg = i;
    const double sign = eig.vectors(comp, arg) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < data.cols; ++i)
      model.components(comp, i) = sign * eig.vectors(comp, i);
    model.explained_variance[comp] = std::max(0.0, eig.values[comp]);
    model.explained_ratio[comp] = model.explained_variance[comp] / trace;
  }
  return model;
}

inline Matrix pca_transform(const PcaModel& model, const Matrix& data) {
  if (data.cols != model.mean.size())
    throw DataError("pca_transform: dimension mismatch");
  Matrix out(data.rows, 2);
  for (std::size_t r = 0; r < data.rows; ++r)
    for (std::size_t comp = 0; comp < 2; ++comp) {
      double acc = 0.0;
      for (std::size_t c = 0; c < data.cols; ++c)
        acc += (data(r, c) - model.mean[c]) * model.components(comp, c);
      out(r, comp) = acc;
    }
  return out;
}

}  // namespace kanlab
