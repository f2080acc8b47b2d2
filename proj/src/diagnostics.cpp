#include "layercard/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace layercard {

FeatureStats accumulate_stats(const Matrix& phi_rows, const Vector& r_star) {
  const Index n = phi_rows.rows();
  const Index d = phi_rows.cols();
  if (n == 0) throw InvalidArgument("accumulate_stats: no samples");
  if (r_star.size() != n) {
    throw DimensionMismatch("accumulate_stats: residual count != sample count");
  }
  FeatureStats fs;
  fs.d = d;
  fs.n_samples = static_cast<long>(n);
  fs.sigma = SymMatrix(Matrix(phi_rows.transpose() * phi_rows / static_cast<double>(n)));
  fs.c = phi_rows.transpose() * r_star / static_cast<double>(n);
  fs.sigma_energy = fs.sigma.mat().trace() / static_cast<double>(d);
  return fs;
}

FeatureStats accumulate_stats(const Matrix& phi_rows) {
  return accumulate_stats(phi_rows, Vector::Zero(phi_rows.rows()));
}

FeatureStats merge_stats(const FeatureStats& a, const FeatureStats& b) {
  if (a.d != b.d) throw DimensionMismatch("merge_stats: feature dims differ");
  if (a.n_samples <= 0 || b.n_samples <= 0) {
    throw InvalidArgument("merge_stats: empty accumulator");
  }
  const double na = static_cast<double>(a.n_samples);
  const double nb = static_cast<double>(b.n_samples);
  const double n = na + nb;
  FeatureStats fs;
  fs.d = a.d;
  fs.n_samples = a.n_samples + b.n_samples;
  fs.sigma = SymMatrix(Matrix((na * a.sigma.mat() + nb * b.sigma.mat()) / n));
  fs.c = (na * a.c + nb * b.c) / n;
  fs.sigma_energy = fs.sigma.mat().trace() / static_cast<double>(fs.d);
  return fs;
}

namespace {

SymMatrix ridged(const SymMatrix& sigma, double ridge) {
  if (ridge < 0.0) throw InvalidArgument("ridge must be nonnegative");
  if (ridge == 0.0) return sigma;
  return SymMatrix(Matrix(sigma.mat() + ridge * Matrix::Identity(sigma.dim(), sigma.dim())));
}

void check_psd(const SymMatrix& m, const char* what) {
  const Spectrum s = eigendecompose(m);
  const double floor = -1e-10 * std::max(1.0, std::abs(s.eigenvalues(0)));
  if (s.eigenvalues(m.dim() - 1) < floor) {
    throw InvalidMatrix(std::string(what) + " must be positive semidefinite");
  }
}

}  // namespace

double projected_resnorm(const FeatureStats& fs, double ridge) {
  const SymMatrix sigma = ridged(fs.sigma, ridge);
  return fs.c.dot(spd_solve(sigma, fs.c));
}

double resnorm_proxy(const std::vector<double>& grad_norms,
                     const std::vector<double>& phi_sqnorms, Index d) {
  if (grad_norms.empty() || phi_sqnorms.empty()) {
    throw InvalidArgument("resnorm_proxy: empty input lists");
  }
  if (d < 1) throw InvalidArgument("resnorm_proxy: dimension must be positive");
  double mean_grad = 0.0;
  for (double g : grad_norms) mean_grad += g;
  mean_grad /= static_cast<double>(grad_norms.size());
  double mean_energy = 0.0;
  for (double e : phi_sqnorms) mean_energy += e;
  mean_energy /= static_cast<double>(phi_sqnorms.size());
  const double sigma_hat = mean_energy / static_cast<double>(d);
  if (sigma_hat < 1e-15) {
    throw DegenerateActivation("resnorm_proxy: activation energy below 1e-15");
  }
  return mean_grad / std::sqrt(sigma_hat);
}

double noise_excess(const FeatureStats& fs, const SymMatrix& gamma, double ridge) {
  if (gamma.dim() != fs.d) throw DimensionMismatch("noise_excess: gamma dim != feature dim");
  check_psd(gamma, "noise_excess: gamma");
  const SymMatrix sigma = ridged(fs.sigma, ridge);
  // tr(Gamma Sigma^{-1}) through one SPD solve per column.
  const Matrix x = spd_solve(sigma, gamma.mat());
  return 0.5 * x.trace();
}

double budget_floor(const FeatureStats& fs, double b, double ridge) {
  if (b < 0.0) throw InvalidArgument("budget_floor: negative budget");
  const SymMatrix sigma = ridged(fs.sigma, ridge);
  const double whitened_target = std::sqrt(std::max(0.0, fs.c.dot(spd_solve(sigma, fs.c))));
  const Spectrum s = eigendecompose(sigma);
  const double lambda_max = s.eigenvalues(0);
  if (lambda_max <= 0.0) throw NotPositiveDefinite("budget_floor: sigma has no positive mass");
  const double reachable = std::sqrt(lambda_max) * b;
  const double slack = std::max(whitened_target - reachable, 0.0);
  return 0.5 * slack * slack;
}

double effective_rank(const FeatureStats& fs) {
  const Spectrum s = eigendecompose(fs.sigma);
  const double lambda_max = s.eigenvalues(0);
  if (!(lambda_max > 0.0)) throw DegenerateActivation("effective_rank: zero spectrum");
  const double cutoff = 1e-12 * lambda_max;
  double total = 0.0;
  for (Index i = 0; i < s.eigenvalues.size(); ++i) {
    if (s.eigenvalues(i) > cutoff) total += s.eigenvalues(i);
  }
  if (!(total > 0.0)) throw DegenerateActivation("effective_rank: zero trace");
  double entropy = 0.0;
  for (Index i = 0; i < s.eigenvalues.size(); ++i) {
    if (s.eigenvalues(i) > cutoff) {
      const double p = s.eigenvalues(i) / total;
      entropy -= p * std::log(p);
    }
  }
  return std::exp(entropy);
}

double nonlinear_floor(double r_star_norm, double amplitude_bound, Index d, double sigma) {
  if (r_star_norm < 0.0 || amplitude_bound < 0.0 || sigma < 0.0 || d < 0) {
    throw InvalidArgument("nonlinear_floor: negative input");
  }
  const double reach = amplitude_bound * std::sqrt(static_cast<double>(d) * sigma);
  const double slack = std::max(r_star_norm - reach, 0.0);
  return 0.5 * slack * slack;
}

double nonlinear_flatness_bound(double lipschitz, double dtheta_norm, double mean_sq_input,
                                double resid_norm) {
  if (lipschitz < 0.0 || dtheta_norm < 0.0 || mean_sq_input < 0.0 || resid_norm < 0.0) {
    throw InvalidArgument("nonlinear_flatness_bound: negative input");
  }
  return lipschitz * dtheta_norm * std::sqrt(mean_sq_input) * resid_norm +
         0.5 * lipschitz * lipschitz * dtheta_norm * dtheta_norm * mean_sq_input;
}

double sigma_coupling_bound(const SymMatrix& sigma_full, const Partition& p) {
  if (sigma_full.dim() != p.dim()) {
    throw PartitionMismatch("sigma_coupling_bound: matrix dim != partition dim");
  }
  const Index layers = p.layers();
  std::vector<Matrix> projectors;
  std::vector<double> energies;
  projectors.reserve(static_cast<std::size_t>(layers));
  energies.reserve(static_cast<std::size_t>(layers));
  for (Index l = 1; l <= layers; ++l) {
    const Index o = p.offset(l);
    const Index n = p.size(l);
    const SymMatrix block(Matrix(sigma_full.mat().block(o, o, n, n)));
    if (!is_spd(block)) {
      throw NotPositiveDefinite("sigma_coupling_bound: diagonal block " + std::to_string(l) +
                                " is not positive definite");
    }
    const double sigma_l = block.mat().trace() / static_cast<double>(n);
    const Spectrum s = eigendecompose(block);
    // Projector onto eigendirections with eigenvalue <= 2*sigma_l, boundary
    // inclusive within 1e-12 relative.
    Matrix proj = Matrix::Zero(n, n);
    const double threshold = 2.0 * sigma_l * (1.0 + 1e-12);
    for (Index i = 0; i < n; ++i) {
      if (s.eigenvalues(i) <= threshold) {
        proj += s.eigenvectors.col(i) * s.eigenvectors.col(i).transpose();
      }
    }
    projectors.push_back(std::move(proj));
    energies.push_back(sigma_l);
  }

  double sum = 0.0;
  for (Index l = 1; l <= layers; ++l) {
    for (Index k = 1; k <= layers; ++k) {
      if (l == k) continue;
      const Matrix cross = projectors[static_cast<std::size_t>(l - 1)] *
                           sigma_full.mat().block(p.offset(l), p.offset(k), p.size(l), p.size(k)) *
                           projectors[static_cast<std::size_t>(k - 1)];
      sum += cross.squaredNorm() /
             (energies[static_cast<std::size_t>(l - 1)] * energies[static_cast<std::size_t>(k - 1)]);
    }
  }
  return std::sqrt(sum / (4.0 * static_cast<double>(p.dim())));
}

HardnessReport hardness_report(const FeatureStats& fs, const SymMatrix& gamma, double b,
                               double ridge) {
  HardnessReport r;
  const SymMatrix sigma = ridged(fs.sigma, ridge);
  r.theta_star = spd_solve(sigma, fs.c);
  r.resnorm = fs.c.dot(r.theta_star);
  r.noise_excess = noise_excess(fs, gamma, ridge);
  r.budget_floor = budget_floor(fs, b, ridge);
  r.erank = effective_rank(fs);
  const Spectrum s = eigendecompose(fs.sigma);
  r.spectrum_normalized = s.eigenvalues / s.eigenvalues.sum();
  return r;
}

}  // namespace layercard
