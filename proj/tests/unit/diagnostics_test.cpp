#include <cmath>
#include <vector>

#include "doctest.h"
#include "layercard/diagnostics.hpp"
#include "layercard/quadratic.hpp"
#include "layercard/rng.hpp"
#include "oracles.hpp"

using namespace layercard;

namespace {

// Random over-determined linear-adapter problem: n samples of phi in R^d and
// a scalar target r generated from a planted parameter plus noise.
struct LinearProblem {
  Matrix phi;    // n x d
  Vector target; // n
};

LinearProblem random_problem(Index n, Index d, CounterRng& rng, double noise = 0.3) {
  LinearProblem p;
  p.phi.resize(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) p.phi(i, j) = rng.normal();
  const Vector planted = oracles::random_vector(d, rng);
  p.target = p.phi * planted;
  for (Index i = 0; i < n; ++i) p.target(i) += noise * rng.normal();
  return p;
}

// Empirical half-squared risk R(theta) = mean((phi.theta - r)^2) / 2.
double risk(const LinearProblem& p, const Vector& theta) {
  return (p.phi * theta - p.target).squaredNorm() / (2.0 * static_cast<double>(p.phi.rows()));
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("stat accumulation on pinned samples") {
  Matrix phi(1, 2);
  phi << 1.0, 0.0;
  Vector r(1);
  r << 2.0;
  const FeatureStats one = accumulate_stats(phi, r);
  CHECK(one.sigma(0, 0) == doctest::Approx(1.0));
  CHECK(one.sigma(1, 1) == doctest::Approx(0.0));
  CHECK(one.c(0) == doctest::Approx(2.0));
  CHECK(one.c(1) == doctest::Approx(0.0));
  CHECK(one.n_samples == 1);
  CHECK(one.sigma_energy == doctest::Approx(0.5));

  Matrix phi2(2, 2);
  phi2 << 1.0, 1.0, -1.0, 1.0;
  Vector r2(2);
  r2 << 1.0, -1.0;
  const FeatureStats two = accumulate_stats(phi2, r2);
  CHECK(two.sigma(0, 0) == doctest::Approx(1.0));
  CHECK(two.sigma(0, 1) == doctest::Approx(0.0));
  CHECK(two.sigma(1, 1) == doctest::Approx(1.0));
  CHECK(two.c(0) == doctest::Approx(1.0));
  CHECK(two.c(1) == doctest::Approx(0.0));

  CHECK_THROWS_AS(accumulate_stats(Matrix(0, 2), Vector(0)), InvalidArgument);
  CHECK_THROWS_AS(accumulate_stats(phi2, r), DimensionMismatch);
}

TEST_CASE("accumulation matches a naive two-pass recomputation") {
  CounterRng rng(211, fnv1a64("accumulate_audit"));
  const Index n = 40, d = 5;
  const LinearProblem p = random_problem(n, d, rng);
  const FeatureStats fs = accumulate_stats(p.phi, p.target);

  Matrix sigma = Matrix::Zero(d, d);
  Vector c = Vector::Zero(d);
  for (Index i = 0; i < n; ++i) {
    sigma += p.phi.row(i).transpose() * p.phi.row(i);
    c += p.phi.row(i).transpose() * p.target(i);
  }
  sigma /= static_cast<double>(n);
  c /= static_cast<double>(n);
  CHECK((fs.sigma.mat() - sigma).norm() <= 1e-12 * sigma.norm());
  CHECK((fs.c - c).norm() <= 1e-12 * std::max(1.0, c.norm()));
  CHECK(fs.sigma_energy == doctest::Approx(sigma.trace() / d).epsilon(1e-12));
}

TEST_CASE("parallel merge equals serial accumulation") {
  CounterRng rng(223, fnv1a64("merge_audit"));
  const Index d = 4;
  const LinearProblem p = random_problem(30, d, rng);
  const FeatureStats whole = accumulate_stats(p.phi, p.target);
  const FeatureStats head = accumulate_stats(p.phi.topRows(12), p.target.head(12));
  const FeatureStats tail = accumulate_stats(p.phi.bottomRows(18), p.target.tail(18));
  const FeatureStats merged = merge_stats(head, tail);
  CHECK((merged.sigma.mat() - whole.sigma.mat()).norm() <= 1e-12);
  CHECK((merged.c - whole.c).norm() <= 1e-12);
  CHECK(merged.n_samples == whole.n_samples);
  CHECK(merged.sigma_energy == doctest::Approx(whole.sigma_energy).epsilon(1e-12));
}

TEST_CASE("projected resnorm on pinned covariances") {
  FeatureStats fs;
  fs.d = 2;
  fs.n_samples = 1;
  fs.sigma = SymMatrix::identity(2);
  fs.c.resize(2);
  fs.c << 3.0, 4.0;
  fs.sigma_energy = 1.0;
  CHECK(projected_resnorm(fs) == doctest::Approx(25.0).epsilon(1e-12));

  Matrix d2 = Matrix::Zero(2, 2);
  d2.diagonal() << 1.0, 4.0;
  fs.sigma = SymMatrix(d2);
  fs.c << 2.0, 2.0;
  CHECK(projected_resnorm(fs) == doctest::Approx(5.0).epsilon(1e-12));

  fs.c.setZero();
  CHECK(projected_resnorm(fs) == doctest::Approx(0.0));

  // Singular covariance refuses instead of regularizing silently.
  Matrix sing(2, 2);
  sing << 1.0, 1.0, 1.0, 1.0;
  fs.sigma = SymMatrix(sing);
  fs.c << 1.0, 0.0;
  CHECK_THROWS_AS(projected_resnorm(fs), NotPositiveDefinite);
  CHECK(projected_resnorm(fs, 1e-6) >= 0.0);
}

TEST_CASE("projected resnorm equals twice the least-squares loss drop") {
  CounterRng rng(227, fnv1a64("resnorm_oracle"));
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 1 + trial % 20;
    const Index n = d + 25;
    const LinearProblem p = random_problem(n, d, rng);
    const FeatureStats fs = accumulate_stats(p.phi, p.target);

    // Independent route: QR least squares on the raw samples, direct risk
    // evaluation at zero and at the minimizer.
    const Vector theta_hat = p.phi.colPivHouseholderQr().solve(p.target);
    const double drop = 2.0 * (risk(p, Vector::Zero(d)) - risk(p, theta_hat));
    const double lib = projected_resnorm(fs);
    CHECK(lib == doctest::Approx(drop).epsilon(1e-8));
  }
}

TEST_CASE("optimality gap is the sigma-weighted distance to the oracle") {
  CounterRng rng(229, fnv1a64("weighted_distance"));
  for (int trial = 0; trial < 50; ++trial) {
    const Index d = 2 + trial % 6;
    const LinearProblem p = random_problem(d + 30, d, rng);
    const FeatureStats fs = accumulate_stats(p.phi, p.target);
    const Vector theta_star = spd_solve(fs.sigma, fs.c);
    const Vector theta = theta_star + oracles::random_vector(d, rng);
    const double gap = risk(p, theta) - risk(p, theta_star);
    const double half_weighted =
        0.5 * (theta - theta_star).dot(fs.sigma.mat() * (theta - theta_star));
    CHECK(gap == doctest::Approx(half_weighted).epsilon(1e-9));
  }
}

TEST_CASE("diagonalized identities for resnorm and noise trace") {
  CounterRng rng(233, fnv1a64("diagonalized"));
  for (int trial = 0; trial < 25; ++trial) {
    const Index d = 3 + trial % 5;
    const LinearProblem p = random_problem(d + 20, d, rng);
    const FeatureStats fs = accumulate_stats(p.phi, p.target);
    const SymMatrix gamma(oracles::random_spd(d, rng, 0.05));

    const Spectrum s = eigendecompose(fs.sigma);
    const Vector c_tilde = s.eigenvectors.transpose() * fs.c;
    const Matrix gamma_tilde = s.eigenvectors.transpose() * gamma.mat() * s.eigenvectors;
    double resnorm_diag = 0.0, trace_diag = 0.0;
    for (Index i = 0; i < d; ++i) {
      resnorm_diag += c_tilde(i) * c_tilde(i) / s.eigenvalues(i);
      trace_diag += gamma_tilde(i, i) / s.eigenvalues(i);
    }
    CHECK(projected_resnorm(fs) == doctest::Approx(resnorm_diag).epsilon(1e-8));
    CHECK(noise_excess(fs, gamma) == doctest::Approx(0.5 * trace_diag).epsilon(1e-8));
  }
}

TEST_CASE("resnorm proxy algebra and degeneracy") {
  CHECK(resnorm_proxy({2.0, 2.0}, {4.0, 4.0}, 1) == doctest::Approx(1.0));
  CHECK(resnorm_proxy({0.0, 0.0}, {4.0, 4.0}, 2) == doctest::Approx(0.0));
  CHECK_THROWS_AS(resnorm_proxy({}, {1.0}, 1), InvalidArgument);
  CHECK_THROWS_AS(resnorm_proxy({1.0}, {1e-16}, 1), DegenerateActivation);
}

TEST_CASE("resnorm proxy is invariant under uniform feature rescaling") {
  // In a linear least-squares layer the gradient at zero is phi * r, so
  // scaling phi by alpha scales grad norms by alpha and sqrt(sigma) by alpha.
  CounterRng rng(239, fnv1a64("proxy_scale"));
  const Index n = 50, d = 6;
  const LinearProblem p = random_problem(n, d, rng);
  const double alpha = 3.7;

  std::vector<double> grads, energies, grads_scaled, energies_scaled;
  for (Index i = 0; i < n; ++i) {
    const Vector phi = p.phi.row(i).transpose();
    grads.push_back((phi * p.target(i)).norm());
    energies.push_back(phi.squaredNorm());
    grads_scaled.push_back((alpha * phi * p.target(i)).norm());
    energies_scaled.push_back((alpha * phi).squaredNorm());
  }
  const double base = resnorm_proxy(grads, energies, d);
  const double scaled = resnorm_proxy(grads_scaled, energies_scaled, d);
  CHECK(scaled == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("noise excess on pinned covariances") {
  FeatureStats fs;
  fs.d = 3;
  fs.n_samples = 1;
  fs.sigma = SymMatrix::identity(3);
  fs.c = Vector::Zero(3);
  fs.sigma_energy = 1.0;
  Matrix gamma = 0.25 * Matrix::Identity(3, 3);
  CHECK(noise_excess(fs, SymMatrix(gamma)) == doctest::Approx(0.25 * 3.0 / 2.0));

  Matrix d2 = Matrix::Zero(2, 2);
  d2.diagonal() << 1.0, 0.01;
  FeatureStats fs2;
  fs2.d = 2;
  fs2.n_samples = 1;
  fs2.sigma = SymMatrix(d2);
  fs2.c = Vector::Zero(2);
  fs2.sigma_energy = d2.trace() / 2.0;
  CHECK(noise_excess(fs2, SymMatrix::identity(2)) == doctest::Approx(50.5).epsilon(1e-12));

  Matrix indef(2, 2);
  indef << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(noise_excess(fs2, SymMatrix(indef)), InvalidMatrix);
}

TEST_CASE("noise excess matches Monte Carlo excess risk") {
  CounterRng rng(241, fnv1a64("noise_mc"));
  for (int trial = 0; trial < 3; ++trial) {
    const Index d = 3 + trial;
    const Index n = 60;
    const LinearProblem p = random_problem(n, d, rng);
    const FeatureStats fs = accumulate_stats(p.phi, p.target);
    const Matrix gamma_half = oracles::random_spd(d, rng, 0.05).llt().matrixL();
    const SymMatrix gamma(Matrix(gamma_half * gamma_half.transpose()));

    const Vector theta_star = spd_solve(fs.sigma, fs.c);
    const double r_star = risk(p, theta_star);
    const int draws = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int k = 0; k < draws; ++k) {
      Vector z(d);
      for (Index i = 0; i < d; ++i) z(i) = rng.normal();
      const Vector theta = spd_solve(fs.sigma, Vector(fs.c + gamma_half * z));
      const double excess = risk(p, theta) - r_star;
      sum += excess;
      sumsq += excess * excess;
    }
    const double mean = sum / draws;
    const double se = std::sqrt((sumsq / draws - mean * mean) / draws);
    const double predicted = noise_excess(fs, gamma);
    CHECK(std::abs(mean - predicted) <= 3.0 * se);
  }
}

TEST_CASE("budget floor on the pinned diagonal system") {
  Matrix d2 = Matrix::Zero(2, 2);
  d2.diagonal() << 1.0, 0.01;
  FeatureStats fs;
  fs.d = 2;
  fs.n_samples = 1;
  fs.sigma = SymMatrix(d2);
  fs.c.resize(2);
  fs.c << 0.0, 0.1;
  fs.sigma_energy = d2.trace() / 2.0;
  CHECK(budget_floor(fs, 0.5) == doctest::Approx(0.125).epsilon(1e-12));
  // Zero budget leaves the full squared target: half the resnorm.
  CHECK(budget_floor(fs, 0.0) == doctest::Approx(0.5 * projected_resnorm(fs)).epsilon(1e-12));
  // A large budget reaches the unconstrained optimum.
  CHECK(budget_floor(fs, 1e3) == doctest::Approx(0.0));
  CHECK_THROWS_AS(budget_floor(fs, -1.0), InvalidArgument);
}

TEST_CASE("budget floor never exceeds the constrained-minimization oracle") {
  CounterRng rng(251, fnv1a64("budget_oracle"));
  for (int trial = 0; trial < 30; ++trial) {
    const Index d = 1 + trial % 4;
    const LinearProblem p = random_problem(d + 25, d, rng);
    const FeatureStats fs = accumulate_stats(p.phi, p.target);
    const Vector theta_star = spd_solve(fs.sigma, fs.c);
    const double budget = rng.uniform(0.0, theta_star.norm() * 1.2);

    // Projected gradient descent on the ball constraint; convex objective,
    // so the limit is the constrained optimum.
    const double lmax = eigendecompose(fs.sigma).eigenvalues(0);
    Vector theta = theta_star;
    if (theta.norm() > budget) theta *= budget / theta.norm();
    const double step = 1.0 / lmax;
    for (int it = 0; it < 4000; ++it) {
      const Vector grad = fs.sigma.mat() * theta - fs.c;
      theta -= step * grad;
      const double norm = theta.norm();
      if (norm > budget) theta *= budget / norm;
    }
    double achieved = risk(p, theta) - risk(p, theta_star);

    // Dense direction grid refinement at low dims.
    if (d <= 2 && budget > 0.0) {
      for (int a = 0; a < 720; ++a) {
        Vector cand(d);
        if (d == 1) {
          cand(0) = (a < 360 ? 1.0 : -1.0) * budget * (a % 360) / 359.0;
        } else {
          const double angle = 2.0 * M_PI * a / 720.0;
          const double radius = budget * ((a % 6) + 1) / 6.0;
          cand << radius * std::cos(angle), radius * std::sin(angle);
        }
        achieved = std::min(achieved, risk(p, cand) - risk(p, theta_star));
      }
    }
    CHECK(budget_floor(fs, budget) <= achieved + 1e-9);
  }
}

TEST_CASE("effective rank of pinned spectra") {
  FeatureStats fs;
  fs.d = 5;
  fs.n_samples = 1;
  fs.sigma = SymMatrix::identity(5);
  fs.c = Vector::Zero(5);
  fs.sigma_energy = 1.0;
  CHECK(effective_rank(fs) == doctest::Approx(5.0).epsilon(1e-12));

  Matrix rank1 = Matrix::Zero(2, 2);
  rank1(0, 0) = 1.0;
  fs.d = 2;
  fs.sigma = SymMatrix(rank1);
  CHECK(effective_rank(fs) == doctest::Approx(1.0).epsilon(1e-12));

  Matrix spread = Matrix::Zero(3, 3);
  spread.diagonal() << 0.7, 0.2, 0.1;
  fs.d = 3;
  fs.sigma = SymMatrix(spread);
  Vector evs(3);
  evs << 0.7, 0.2, 0.1;
  CHECK(effective_rank(fs) ==
        doctest::Approx(oracles::entropy_effective_rank(evs)).epsilon(1e-12));
  CHECK(effective_rank(fs) == doctest::Approx(2.2296).epsilon(1e-4));

  fs.sigma = SymMatrix::zero(3);
  CHECK_THROWS_AS(effective_rank(fs), DegenerateActivation);
}

TEST_CASE("effective rank stays within [1, d] on random covariances") {
  CounterRng rng(257, fnv1a64("erank_range"));
  for (int trial = 0; trial < 50; ++trial) {
    const Index d = 2 + trial % 7;
    const LinearProblem p = random_problem(d + 10, d, rng);
    const FeatureStats fs = accumulate_stats(p.phi, p.target);
    const double er = effective_rank(fs);
    CHECK(er >= 1.0);
    CHECK(er <= static_cast<double>(d) * (1.0 + 1e-12));
    const Spectrum s = eigendecompose(fs.sigma);
    CHECK(er == doctest::Approx(oracles::entropy_effective_rank(s.eigenvalues)).epsilon(1e-10));
  }
}

TEST_CASE("hardness monotonicity when a trailing eigenvalue shrinks") {
  CounterRng rng(263, fnv1a64("hardness_monotone"));
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 4;
    const LinearProblem p = random_problem(40, d, rng);
    const FeatureStats fs = accumulate_stats(p.phi, p.target);
    const Spectrum s = eigendecompose(fs.sigma);

    // Shrink the smallest eigenvalue, keep c fixed.
    Vector shrunk = s.eigenvalues;
    shrunk(d - 1) *= 0.25;
    FeatureStats harder = fs;
    harder.sigma =
        SymMatrix(Matrix(s.eigenvectors * shrunk.asDiagonal() * s.eigenvectors.transpose()));

    const SymMatrix gamma(oracles::random_spd(d, rng, 0.05));
    CHECK(noise_excess(harder, gamma) >= noise_excess(fs, gamma) - 1e-10);
    const double budget = rng.uniform(0.0, 1.0);
    CHECK(budget_floor(harder, budget) >= budget_floor(fs, budget) - 1e-10);
  }
}

TEST_CASE("nonlinear floor clamps and decays") {
  CHECK(nonlinear_floor(2.0, 1.0, 4, 0.0) == doctest::Approx(2.0));
  CHECK(nonlinear_floor(1.0, 2.0, 4, 1.0) == doctest::Approx(0.0));
  CHECK(nonlinear_floor(3.0, 0.5, 4, 1.0) == doctest::Approx(0.5 * 2.0 * 2.0));
  // Monotone nonincreasing in sigma and amplitude bound.
  double prev = nonlinear_floor(3.0, 0.5, 4, 0.0);
  for (double sigma : {0.5, 1.0, 2.0, 4.0}) {
    const double cur = nonlinear_floor(3.0, 0.5, 4, sigma);
    CHECK(cur <= prev + 1e-15);
    prev = cur;
  }
}

TEST_CASE("nonlinear floor lower-bounds grid search for tanh adapters") {
  // Family G_theta(u) = theta . tanh(W u) with orthonormal rows of W: the
  // amplitude bound A(B) equals the parameter budget B. Risk is against a
  // fixed residual vector over probe inputs.
  CounterRng rng(269, fnv1a64("tanh_grid"));
  for (int trial = 0; trial < 10; ++trial) {
    const Index d = 2 + trial % 2;  // parameter dim <= 3
    const Index n = 24;
    // Orthonormal rows via QR of a random square matrix.
    const Matrix gauss = oracles::random_spd(d, rng, 0.4);
    const Eigen::HouseholderQR<Matrix> qr(gauss);
    const Matrix w = Matrix(qr.householderQ()).topRows(d);

    Matrix inputs(n, d);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < d; ++j) inputs(i, j) = rng.normal();
    Vector r_star(n);
    for (Index i = 0; i < n; ++i) r_star(i) = rng.normal();

    // Features tanh(W u) per sample.
    Matrix feats(n, d);
    for (Index i = 0; i < n; ++i) {
      feats.row(i) = (w * inputs.row(i).transpose()).array().tanh().transpose();
    }

    const double budget = rng.uniform(0.1, 0.8);
    const double sigma = inputs.squaredNorm() / static_cast<double>(n * d);
    const double floor =
        nonlinear_floor(r_star.norm() / std::sqrt(static_cast<double>(n)), budget, d, sigma);

    // Dense grid over the parameter ball.
    double best = r_star.squaredNorm() / (2.0 * n);
    const int steps = (d == 2) ? 41 : 17;
    std::vector<Vector> grid;
    Vector point(d);
    const auto sweep = [&](auto&& self, Index coord) -> void {
      if (coord == d) {
        if (point.norm() <= budget) {
          const double value =
              (feats * point - r_star).squaredNorm() / (2.0 * static_cast<double>(n));
          best = std::min(best, value);
        }
        return;
      }
      for (int s = 0; s < steps; ++s) {
        point(coord) = -budget + 2.0 * budget * s / (steps - 1);
        self(self, coord + 1);
      }
    };
    sweep(sweep, 0);
    CHECK(floor <= best + 1e-9);
  }
}

TEST_CASE("flatness bound evaluates and dominates risk differences") {
  CHECK(nonlinear_flatness_bound(1.0, 0.0, 2.0, 1.0) == doctest::Approx(0.0));
  CHECK(nonlinear_flatness_bound(1.0, 1.0, 0.0, 1.0) == doctest::Approx(0.0));

  // tanh adapter: risk differences against the Lipschitz envelope.
  CounterRng rng(271, fnv1a64("flatness_mc"));
  const Index d = 3, n = 50;
  Matrix inputs(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) inputs(i, j) = rng.normal();
  Vector r_star(n);
  for (Index i = 0; i < n; ++i) r_star(i) = rng.normal();
  Matrix feats(n, d);
  for (Index i = 0; i < n; ++i) {
    feats.row(i) = inputs.row(i).array().tanh();
  }
  const double e_xsq = inputs.squaredNorm() / static_cast<double>(n);

  int verified = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vector theta = oracles::random_vector(d, rng) * 0.5;
    const Vector theta2 = theta + oracles::random_vector(d, rng) * rng.uniform(0.0, 0.5);
    const Vector pred = feats * theta;
    const Vector pred2 = feats * theta2;
    const double r1 = (pred - r_star).squaredNorm() / (2.0 * n);
    const double r2 = (pred2 - r_star).squaredNorm() / (2.0 * n);
    const double resid = (pred - r_star).norm() / std::sqrt(static_cast<double>(n));
    // |tanh| <= 1 and tanh is 1-Lipschitz, so per-sample predictions are
    // 1-Lipschitz in theta against ||x||.
    const double bound =
        nonlinear_flatness_bound(1.0, (theta2 - theta).norm(), e_xsq, resid);
    CHECK(std::abs(r2 - r1) <= bound + 1e-9);
    ++verified;
  }
  CHECK(verified == 1000);
}

TEST_CASE("sigma coupling bound on pinned blocks") {
  const Partition p({1, 1});
  Matrix diag = Matrix::Identity(2, 2);
  CHECK(sigma_coupling_bound(SymMatrix(diag), p) == doctest::Approx(0.0));

  const double a = 0.6;
  Matrix coupled(2, 2);
  coupled << 1.0, a, a, 1.0;
  CHECK(sigma_coupling_bound(SymMatrix(coupled), p) == doctest::Approx(a / 2.0).epsilon(1e-12));
}

TEST_CASE("sigma coupling bound stays below the whitened coupling norm") {
  CounterRng rng(277, fnv1a64("sigma_vs_rho"));
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Index> sizes;
    const int layers = rng.uniform_int(2, 4);
    for (int l = 0; l < layers; ++l) sizes.push_back(rng.uniform_int(1, 3));
    const QuadraticModel m = gen_coupled_instance(
        layers, sizes, rng.uniform(0.3, 0.9), rng.uniform(0.0, 0.8), rng.next_u64());
    const double bound = sigma_coupling_bound(m.h, m.partition);
    const double rho = coupling_rho(m);
    CHECK(bound <= rho * (1.0 + 1e-9) + 1e-12);
    ++checked;
  }
  CHECK(checked == 500);
}

TEST_CASE("hardness report bundles the diagnostics consistently") {
  CounterRng rng(281, fnv1a64("hardness_report"));
  const Index d = 5;
  const LinearProblem p = random_problem(40, d, rng);
  const FeatureStats fs = accumulate_stats(p.phi, p.target);
  const SymMatrix gamma(oracles::random_spd(d, rng, 0.05));
  const HardnessReport r = hardness_report(fs, gamma, 0.3);

  CHECK(r.resnorm == doctest::Approx(projected_resnorm(fs)).epsilon(1e-9));
  CHECK(r.noise_excess == doctest::Approx(noise_excess(fs, gamma)).epsilon(1e-12));
  CHECK(r.budget_floor == doctest::Approx(budget_floor(fs, 0.3)).epsilon(1e-12));
  CHECK(r.erank >= 1.0);
  CHECK(r.erank <= static_cast<double>(d));
  CHECK(r.spectrum_normalized.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (Index i = 0; i + 1 < d; ++i) {
    CHECK(r.spectrum_normalized(i) >= r.spectrum_normalized(i + 1));
  }
  CHECK((fs.sigma.mat() * r.theta_star - fs.c).norm() <= 1e-9 * fs.c.norm());
}

}  // TEST_SUITE
