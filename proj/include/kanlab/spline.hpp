#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "kanlab/common.hpp"

namespace kanlab {

/// Uniform B-spline knot vector on [domain_lo, domain_hi] with `grid`
/// interior intervals and `degree`-fold uniform extension past both ends.
/// The extension (rather than clamped end knots) keeps the basis a partition
/// of unity over the whole domain.
struct KnotVector {
  double domain_lo = 0.0;
  double domain_hi = 1.0;
  int grid = 1;
  int degree = 1;
  std::vector<double> knots;  // size grid + 2*degree + 1, uniform spacing

  int basis_count() const { return grid + degree; }

  double spacing() const { return (domain_hi - domain_lo) / grid; }

  double clamp(double t) const {
    return std::min(std::max(t, domain_lo), domain_hi);
  }

  bool in_domain(double t) const { return t >= domain_lo && t <= domain_hi; }

  /// Index s of the interior span containing t, in [degree, degree+grid-1].
  /// t == domain_hi maps to the last interior span.
  int find_span(double t) const {
    const int cell = static_cast<int>(std::floor((t - domain_lo) / spacing()));
    return degree + std::min(std::max(cell, 0), grid - 1);
  }
};

inline KnotVector make_knots(double domain_lo, double domain_hi, int grid,
                             int degree) {
  if (!(domain_lo < domain_hi))
    throw ConfigError("make_knots: invalid range, domain_lo must be < domain_hi");
  if (grid < 1 || degree < 1)
    throw ConfigError("make_knots: invalid parameter, grid and degree must be >= 1");
  if (degree > 60)
    throw ConfigError("make_knots: invalid parameter, degree must be <= 60");
  KnotVector kv;
  kv.domain_lo = domain_lo;
  kv.domain_hi = domain_hi;
  kv.grid = grid;
  kv.degree = degree;
  const double h = (domain_hi - domain_lo) / grid;
  kv.knots.resize(static_cast<std::size_t>(grid + 2 * degree + 1));
  for (int i = 0; i <= grid + 2 * degree; ++i)
    kv.knots[static_cast<std::size_t>(i)] = domain_lo + (i - degree) * h;
  return kv;
}

namespace detail {

/// Cox-de Boor triangle at span s for the given degree. Writes the deg+1
/// nonzero values N_{s-deg+r, deg}(t), r = 0..deg, into `out`.
inline void deboor_window(const std::vector<double>& knots, int s, int deg,
                          double t, double* out) {
  out[0] = 1.0;
  // left[j] = t - knots[s+1-j], right[j] = knots[s+j] - t
  double left[64];
  double right[64];
  for (int j = 1; j <= deg; ++j) {
    left[j] = t - knots[static_cast<std::size_t>(s + 1 - j)];
    right[j] = knots[static_cast<std::size_t>(s + j)] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = out[r] / (right[r + 1] + left[j - r]);
      out[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    out[j] = saved;
  }
}

}  // namespace detail

/// Nonzero basis window at t (clamped into the domain): values of the
/// degree+1 basis functions with indices first..first+degree.
/// `out` must hold degree+1 doubles. Returns `first`.
inline int basis_window(const KnotVector& kv, double t, double* out) {
  if (!std::isfinite(t)) throw DataError("basis_window: non-finite input");
  const double tc = kv.clamp(t);
  const int s = kv.find_span(tc);
  detail::deboor_window(kv.knots, s, kv.degree, tc, out);
  return s - kv.degree;
}

/// All grid+degree basis function values at t. Non-negative, sum to 1.
inline std::vector<double> basis_values(const KnotVector& kv, double t) {
  std::vector<double> vals(static_cast<std::size_t>(kv.basis_count()), 0.0);
  double window[64];
  const int first = basis_window(kv, t, window);
  for (int r = 0; r <= kv.degree; ++r)
    vals[static_cast<std::size_t>(first + r)] = window[r];
  return vals;
}

/// A univariate spline: coefficient per basis function on a shared knot
/// vector. These are the learnable edge activations of the KAN and the
/// boundary curves of the decision rule.
struct SplineFunction {
  KnotVector knots;
  std::vector<double> coeffs;  // size grid + degree

  bool valid() const {
    return coeffs.size() == static_cast<std::size_t>(knots.basis_count());
  }
};

inline double spline_eval(const SplineFunction& f, double t) {
  double window[64];
  const int first = basis_window(f.knots, t, window);
  double acc = 0.0;
  for (int r = 0; r <= f.knots.degree; ++r)
    acc += f.coeffs[static_cast<std::size_t>(first + r)] * window[r];
  return acc;
}

/// Gradient of spline_eval with respect to the coefficients: the basis
/// values at (clamped) t.
inline std::vector<double> spline_grad_coeffs(const SplineFunction& f, double t) {
  return basis_values(f.knots, t);
}

/// d/dt spline_eval at (clamped) t, via the B-spline derivative identity:
/// f'(t) = sum_i deg * (c_i - c_{i-1}) / (knots[i+deg] - knots[i]) * N_{i,deg-1}(t).
inline double spline_deriv_input(const SplineFunction& f, double t) {
  const int deg = f.knots.degree;
  if (deg < 1) throw ConfigError("spline_deriv_input: unsupported degree 0");
  if (!std::isfinite(t)) throw DataError("spline_deriv_input: non-finite input");
  const double tc = f.knots.clamp(t);
  const int s = f.knots.find_span(tc);
  double window[64];
  detail::deboor_window(f.knots.knots, s, deg - 1, tc, window);
  double acc = 0.0;
  for (int r = 0; r < deg; ++r) {
    const int i = s - deg + 1 + r;
    const double dt = f.knots.knots[static_cast<std::size_t>(i + deg)] -
                      f.knots.knots[static_cast<std::size_t>(i)];
    acc += deg *
           (f.coeffs[static_cast<std::size_t>(i)] -
            f.coeffs[static_cast<std::size_t>(i - 1)]) /
           dt * window[r];
  }
  return acc;
}

}  // namespace kanlab
