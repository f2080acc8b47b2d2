#include "layercard/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "layercard/errors.hpp"

namespace layercard {

namespace {

double suffix_sum(const std::vector<double>& per_layer, Index from) {
  double acc = 0.0;
  for (std::size_t i = static_cast<std::size_t>(from - 1); i < per_layer.size(); ++i) {
    acc += per_layer[i];
  }
  return acc;
}

// Exact nonnegative least squares for tiny column counts: enumerate active
// sets, solve each face unconstrained, keep the feasible face with the
// smallest residual (ties broken toward fewer active coefficients).
struct NnlsFit {
  Vector coeffs;
  double rms = 0.0;
};

NnlsFit nnls(const Matrix& x, const Vector& y) {
  const Index p = x.cols();
  const double tie = 1e-9 * (1.0 + y.norm());
  double best_res = std::numeric_limits<double>::infinity();
  int best_active = p + 1;
  Vector best = Vector::Zero(p);
  for (int mask = 0; mask < (1 << p); ++mask) {
    std::vector<Index> cols;
    for (Index j = 0; j < p; ++j) {
      if (mask & (1 << j)) cols.push_back(j);
    }
    Vector cand = Vector::Zero(p);
    double res;
    if (cols.empty()) {
      res = y.norm();
    } else {
      Matrix xs(x.rows(), static_cast<Index>(cols.size()));
      for (std::size_t j = 0; j < cols.size(); ++j) xs.col(static_cast<Index>(j)) = x.col(cols[j]);
      const Vector sol = xs.colPivHouseholderQr().solve(y);
      bool feasible = true;
      for (Index j = 0; j < sol.size(); ++j) feasible = feasible && sol(j) >= 0.0;
      if (!feasible) continue;
      for (std::size_t j = 0; j < cols.size(); ++j) cand(cols[j]) = sol(static_cast<Index>(j));
      res = (xs * sol - y).norm();
    }
    const int active = static_cast<int>(cols.size());
    if (res < best_res - tie || (res < best_res + tie && active < best_active)) {
      best_res = res;
      best_active = active;
      best = cand;
    }
  }
  NnlsFit fit;
  fit.coeffs = best;
  fit.rms = best_res / std::sqrt(static_cast<double>(x.rows()));
  return fit;
}

// Numerical column rank with a relative threshold.
Index design_rank(const Matrix& x) {
  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  return qr.rank();
}

}  // namespace

CostEstimate estimate(const LayerSet& s, Index layers,
                      const std::vector<double>& layer_flops,
                      const std::vector<double>& layer_act, const CostCoeffs& coeffs) {
  if (s.empty()) throw EmptySelection("costmodel: empty layer selection");
  validate_layer_set(s, layers, "costmodel estimate");
  if (static_cast<Index>(layer_flops.size()) != layers ||
      static_cast<Index>(layer_act.size()) != layers) {
    throw DimensionMismatch("costmodel: per-layer cost vectors must have length L");
  }
  const Index lmin = s.front();
  CostEstimate e;
  e.backprop_depth = layers - lmin + 1;
  e.retained_layers = layers - lmin + 1;
  e.time_units = coeffs.t0 + coeffs.t1 * suffix_sum(layer_flops, lmin) +
                 coeffs.t2 * static_cast<double>(s.size());
  e.memory_units = coeffs.m0 + coeffs.m1 * suffix_sum(layer_act, lmin);
  return e;
}

CalibrationResult calibrate(const std::vector<CostMeasurement>& measured, Index layers,
                            const std::vector<double>& layer_flops,
                            const std::vector<double>& layer_act) {
  if (static_cast<Index>(layer_flops.size()) != layers ||
      static_cast<Index>(layer_act.size()) != layers) {
    throw DimensionMismatch("costmodel: per-layer cost vectors must have length L");
  }
  std::set<Index> mins;
  for (const CostMeasurement& m : measured) {
    if (m.s.empty()) throw EmptySelection("costmodel: measurement with empty selection");
    validate_layer_set(m.s, layers, "costmodel calibrate");
    mins.insert(m.s.front());
  }
  if (measured.size() < 3 || mins.size() < 3) {
    throw CalibrationUnderdetermined(
        "costmodel: need at least 3 measurements with distinct earliest layers");
  }

  const Index n = static_cast<Index>(measured.size());
  Matrix xt(n, 3), xm(n, 2);
  Vector yt(n), ym(n);
  for (Index i = 0; i < n; ++i) {
    const CostMeasurement& m = measured[static_cast<std::size_t>(i)];
    xt(i, 0) = 1.0;
    xt(i, 1) = suffix_sum(layer_flops, m.s.front());
    xt(i, 2) = static_cast<double>(m.s.size());
    xm(i, 0) = 1.0;
    xm(i, 1) = suffix_sum(layer_act, m.s.front());
    yt(i) = m.time_units;
    ym(i) = m.memory_units;
  }
  if (design_rank(xt.leftCols(2)) < 2 || design_rank(xm) < 2) {
    throw CalibrationUnderdetermined("costmodel: cost design matrix is rank deficient");
  }
  // A constant selection size cannot separate t2 from t0; drop it and let the
  // per-layer term absorb the offset.
  const bool fit_t2 = design_rank(xt) == 3;

  CalibrationResult r;
  if (fit_t2) {
    const NnlsFit ft = nnls(xt, yt);
    r.coeffs.t0 = ft.coeffs(0);
    r.coeffs.t1 = ft.coeffs(1);
    r.coeffs.t2 = ft.coeffs(2);
    r.time_residual = ft.rms;
  } else {
    const NnlsFit ft = nnls(xt.leftCols(2), yt);
    r.coeffs.t0 = ft.coeffs(0);
    r.coeffs.t1 = ft.coeffs(1);
    r.coeffs.t2 = 0.0;
    r.time_residual = ft.rms;
  }
  const NnlsFit fm = nnls(xm, ym);
  r.coeffs.m0 = fm.coeffs(0);
  r.coeffs.m1 = fm.coeffs(1);
  r.memory_residual = fm.rms;
  return r;
}

}  // namespace layercard
