#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "layercard/linalg.hpp"

namespace layercard {

// Ordered set of 1-based layer indices. Validated against a Partition by the
// operations that consume it: entries strictly increasing and within 1..L.
using LayerSet = std::vector<Index>;

void validate_layer_set(const LayerSet& s, Index layers, const char* where);

// Quadratic surrogate Q(theta) = q0 + g.theta + theta.H.theta / 2 over a
// layer-partitioned parameter vector.
struct QuadraticModel {
  Vector g;
  SymMatrix h;
  Partition partition;
  double q0 = 0.0;

  QuadraticModel(Vector g_in, SymMatrix h_in, Partition p, double q0_in = 0.0);

  Index layers() const { return partition.layers(); }
  Index dim() const { return partition.dim(); }
  double value(const Vector& theta) const;
};

// Second-order residual map captured at a set of probe inputs: row i of jac
// is the residual gradient at probe i, kx[i] the residual Hessian there.
struct ResidualMap {
  Matrix jac;
  std::vector<SymMatrix> kx;

  ResidualMap(Matrix jac_in, std::vector<SymMatrix> kx_in);

  Index probes() const { return jac.rows(); }
  Index dim() const { return jac.cols(); }
};

// Curvature-normalized coupling: spectral norm of D^{-1/2} E D^{-1/2} where
// (D, E) is the block split of H.
double coupling_rho(const QuadraticModel& m);

// Joint minimizer -H^{-1} g.
Vector global_oracle(const QuadraticModel& m);

// Blockwise minimizers -H_ll^{-1} g_l stacked in layer order.
Vector local_oracle(const QuadraticModel& m);

// Gap between the oracles together with the first-order coupling bound
// rho/(1-rho) * ||D^{-1}||_2 * ||g||_2. Requires rho < 1.
struct GapBound {
  double gap;
  double bound;
};

GapBound additivity_gap(const QuadraticModel& m);

// Exact decomposition of the pointwise residual difference r(x; local) -
// r(x; global) at probe x_index into four second-order terms: cross gradient,
// mixed curvature, squared-gap curvature, and off-diagonal curvature at the
// global optimum. gap equals the sum of the terms up to roundoff.
struct ResidualGap {
  double gap;
  std::array<double, 4> terms;
};

ResidualGap residual_gap_terms(const ResidualMap& rm, const QuadraticModel& m, Index x_index);

// Surrogate gain of tuning exactly the layers in s with the rest frozen at
// zero: g_S . H_SS^{-1} g_S / 2.
double gain(const QuadraticModel& m, const LayerSet& s);

// Additive gain approximation and the coupling sandwich around the joint
// gain: delta_add/(1+rho_s) <= delta <= delta_add/(1-rho_s).
struct SandwichReport {
  double delta;
  double delta_add;
  double rho_s;
  double lower;
};

SandwichReport sandwich_check(const QuadraticModel& m, const LayerSet& s);

// Freezing penalty of layer `layer` when every other layer compensates:
// penalty = gtilde . H_cond^{-1} gtilde / 2 from the Schur reduction, with
// whitened diagnostics. kappa = ||H_ll^{-1/2} H_lR H_RR^{-1/2}||_2^2 must be
// < 1 for the upper bound; s is the compensation-slack lower-bound argument
// max(||u|| - c_compens, 0).
struct FreezeReport {
  double penalty;
  double lower;
  double upper;
  double kappa;
  double w_norm_sq;
  double s;
  double u_norm;
  double c_compens;
};

FreezeReport freeze_penalty(const QuadraticModel& m, Index layer);

// Checks that freezing a superset cannot help: with frozen set F containing
// `layer`, min over the complement of Q is >= the single-layer frozen optimum
// up to 1e-10 slack. Returns the comparison outcome.
bool freeze_monotonicity(const QuadraticModel& m, const LayerSet& frozen, Index layer);

// Synthetic layer-coupled SPD instance. Off-diagonal blocks carry whitened
// spectral norm exactly strength * decay^{|l-k|} before the (rare) diagonal
// shift that restores positive definiteness; per-layer whitened gradient
// energies are drawn in [0.9, 1.1] so layer gains are comparable.
QuadraticModel gen_coupled_instance(Index layers, const std::vector<Index>& sizes,
                                    double decay, double strength, std::uint64_t seed);

// Restricted optimum value min over the layers NOT in `frozen` of Q with the
// frozen layers pinned at zero. Empty complement returns Q(0).
double frozen_optimum(const QuadraticModel& m, const LayerSet& frozen);

// Extraction helpers for layer subsets (concatenated in layer order).
Matrix extract_block(const SymMatrix& h, const Partition& p, const LayerSet& rows,
                     const LayerSet& cols);
Vector extract_segment(const Vector& g, const Partition& p, const LayerSet& s);

}  // namespace layercard
