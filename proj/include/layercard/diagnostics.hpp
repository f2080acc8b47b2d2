#pragma once

#include <vector>

#include "layercard/linalg.hpp"

namespace layercard {

// Empirical second moments of a feature map against a scalar target
// residual: sigma = E[phi phi^T], c = E[phi r*], population 1/n
// normalization throughout.
struct FeatureStats {
  SymMatrix sigma;
  Vector c;
  long n_samples = 0;
  double sigma_energy = 0.0;  // trace(sigma)/d
  Index d = 0;
};

// phi_rows holds one sample per row; r_star one scalar residual per sample.
FeatureStats accumulate_stats(const Matrix& phi_rows, const Vector& r_star);
// Covariance-only variant for spectrum diagnostics (c stays zero).
FeatureStats accumulate_stats(const Matrix& phi_rows);

// Weighted-moment merge; equals single-pass accumulation of the
// concatenated samples.
FeatureStats merge_stats(const FeatureStats& a, const FeatureStats& b);

// Squared projected-residual norm c^T Sigma^{-1} c. ridge adds eps*I before
// inversion; the default refuses ill-conditioned Sigma instead of masking it.
double projected_resnorm(const FeatureStats& fs, double ridge = 0.0);

// Gradient-over-energy proxy mean(grad_norms)/sqrt(mean(phi_sqnorms)/d).
// Pass d = 1 for the non-dimension-normalized variant.
double resnorm_proxy(const std::vector<double>& grad_norms,
                     const std::vector<double>& phi_sqnorms, Index d);

// Expected excess risk from gradient noise with covariance gamma:
// tr(gamma Sigma^{-1}) / 2.
double noise_excess(const FeatureStats& fs, const SymMatrix& gamma, double ridge = 0.0);

// Norm-budget hardness floor (||Sigma^{-1/2} c|| - sqrt(lambda_max) * b)_+^2 / 2.
double budget_floor(const FeatureStats& fs, double b, double ridge = 0.0);

// Entropy effective rank of the feature spectrum; eigenvalues below
// 1e-12 * lambda_max count as exact zeros.
double effective_rank(const FeatureStats& fs);

// Risk floor for amplitude-bounded nonlinear adapter families:
// (r_star_norm - amplitude_bound * sqrt(d * sigma))_+^2 / 2.
double nonlinear_floor(double r_star_norm, double amplitude_bound, Index d, double sigma);

// Lipschitz flatness envelope on risk differences:
// lipschitz * dtheta_norm * sqrt(mean_sq_input) * resid_norm
//   + lipschitz^2 * dtheta_norm^2 * mean_sq_input / 2.
double nonlinear_flatness_bound(double lipschitz, double dtheta_norm, double mean_sq_input,
                                double resid_norm);

// Lower bound on the whitened cross-layer coupling of a partitioned feature
// covariance, using projectors onto eigendirections with eigenvalue at most
// twice the layer's activation energy (inclusive within 1e-12 relative).
double sigma_coupling_bound(const SymMatrix& sigma_full, const Partition& p);

// Bundled hardness diagnostics for one feature map.
struct HardnessReport {
  Vector theta_star;
  double resnorm = 0.0;
  double noise_excess = 0.0;
  double budget_floor = 0.0;
  double erank = 0.0;
  Vector spectrum_normalized;  // descending, scaled to sum to 1
};

HardnessReport hardness_report(const FeatureStats& fs, const SymMatrix& gamma, double b,
                               double ridge = 0.0);

}  // namespace layercard
