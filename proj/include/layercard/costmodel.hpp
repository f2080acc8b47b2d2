#pragma once

#include <vector>

#include "layercard/linalg.hpp"
#include "layercard/quadratic.hpp"

namespace layercard {

// Depth-dependent fine-tuning cost model. Reverse mode must propagate to the
// earliest adapted layer, so both time and memory key on min(S): every layer
// from min(S) to the output contributes its flops to the backward path and
// its activations to the retained set.

struct CostCoeffs {
  double t0 = 0.0;  // fixed time overhead
  double t1 = 0.0;  // per-flop-unit backward-path time
  double t2 = 0.0;  // per-adapted-layer time
  double m0 = 0.0;  // fixed memory overhead
  double m1 = 0.0;  // per-activation-unit retained memory
};

struct CostEstimate {
  double time_units = 0.0;
  double memory_units = 0.0;
  Index backprop_depth = 0;    // L - min(S) + 1
  Index retained_layers = 0;   // L - min(S) + 1
};

struct CostMeasurement {
  LayerSet s;
  double time_units = 0.0;
  double memory_units = 0.0;
};

struct CalibrationResult {
  CostCoeffs coeffs;
  double time_residual = 0.0;    // rms over measurements
  double memory_residual = 0.0;  // rms over measurements
};

CostEstimate estimate(const LayerSet& s, Index layers,
                      const std::vector<double>& layer_flops,
                      const std::vector<double>& layer_act, const CostCoeffs& coeffs);

// Nonnegative least-squares fit of the coefficients from measured runs.
// Needs at least 3 measurements with distinct min(S) and a full-rank design.
CalibrationResult calibrate(const std::vector<CostMeasurement>& measured, Index layers,
                            const std::vector<double>& layer_flops,
                            const std::vector<double>& layer_act);

}  // namespace layercard
