#include "layercard/quadratic.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "layercard/rng.hpp"

namespace layercard {

void validate_layer_set(const LayerSet& s, Index layers, const char* where) {
  Index prev = 0;
  for (Index l : s) {
    if (l < 1 || l > layers) {
      throw InvalidArgument(std::string(where) + ": layer " + std::to_string(l) +
                            " outside 1.." + std::to_string(layers));
    }
    if (l <= prev) {
      throw InvalidArgument(std::string(where) + ": layer set not strictly increasing");
    }
    prev = l;
  }
}

QuadraticModel::QuadraticModel(Vector g_in, SymMatrix h_in, Partition p, double q0_in)
    : g(std::move(g_in)), h(std::move(h_in)), partition(std::move(p)), q0(q0_in) {
  if (g.size() != h.dim()) {
    throw DimensionMismatch("QuadraticModel: gradient length " + std::to_string(g.size()) +
                            " != Hessian dim " + std::to_string(h.dim()));
  }
  if (h.dim() != partition.dim()) {
    throw PartitionMismatch("QuadraticModel: Hessian dim != partition dim");
  }
}

double QuadraticModel::value(const Vector& theta) const {
  if (theta.size() != dim()) throw DimensionMismatch("QuadraticModel::value: size mismatch");
  return q0 + g.dot(theta) + 0.5 * theta.dot(h.mat() * theta);
}

ResidualMap::ResidualMap(Matrix jac_in, std::vector<SymMatrix> kx_in)
    : jac(std::move(jac_in)), kx(std::move(kx_in)) {
  if (static_cast<Index>(kx.size()) != jac.rows()) {
    throw DimensionMismatch("ResidualMap: one curvature matrix per probe required");
  }
  for (const SymMatrix& k : kx) {
    if (k.dim() != jac.cols()) {
      throw DimensionMismatch("ResidualMap: curvature dim != parameter dim");
    }
  }
}

double coupling_rho(const QuadraticModel& m) {
  return spectral_norm(whitened_offdiag(m.h, m.partition));
}

Vector global_oracle(const QuadraticModel& m) { return -spd_solve(m.h, m.g); }

Vector local_oracle(const QuadraticModel& m) {
  const Partition& p = m.partition;
  Vector theta(p.dim());
  for (Index l = 1; l <= p.layers(); ++l) {
    const Index o = p.offset(l);
    const Index n = p.size(l);
    const SymMatrix block(Matrix(m.h.mat().block(o, o, n, n)));
    theta.segment(o, n) = -spd_solve(block, Vector(m.g.segment(o, n)));
  }
  return theta;
}

namespace {

// ||D^{-1}||_2 for the block-diagonal part: the largest inverse eigenvalue
// over the diagonal blocks.
double block_diag_inverse_norm(const QuadraticModel& m) {
  const Partition& p = m.partition;
  double out = 0.0;
  for (Index l = 1; l <= p.layers(); ++l) {
    const Index o = p.offset(l);
    const Index n = p.size(l);
    const Spectrum s = eigendecompose(SymMatrix(Matrix(m.h.mat().block(o, o, n, n))));
    const double lambda_min = s.eigenvalues(n - 1);
    if (lambda_min <= 0.0) {
      throw NotPositiveDefinite("additivity_gap: diagonal block " + std::to_string(l) +
                                " is not positive definite");
    }
    out = std::max(out, 1.0 / lambda_min);
  }
  return out;
}

}  // namespace

GapBound additivity_gap(const QuadraticModel& m) {
  const double rho = coupling_rho(m);
  if (rho >= 1.0) {
    throw CouplingTooStrong("additivity_gap: coupling rho = " + std::to_string(rho) + " >= 1");
  }
  const Vector diff = global_oracle(m) - local_oracle(m);
  GapBound out;
  out.gap = diff.norm();
  out.bound = rho / (1.0 - rho) * block_diag_inverse_norm(m) * m.g.norm();
  return out;
}

ResidualGap residual_gap_terms(const ResidualMap& rm, const QuadraticModel& m, Index x_index) {
  if (rm.dim() != m.dim()) {
    throw DimensionMismatch("residual_gap_terms: residual map dim != model dim");
  }
  if (x_index < 0 || x_index >= rm.probes()) {
    throw InvalidArgument("residual_gap_terms: probe index out of range");
  }

  const Partition& p = m.partition;
  const Vector theta_glob = global_oracle(m);
  const Vector theta_loc = local_oracle(m);
  const Vector dtheta = theta_glob - theta_loc;

  const Vector j = rm.jac.row(x_index).transpose();
  const Matrix& k = rm.kx[static_cast<std::size_t>(x_index)].mat();

  // Direct evaluation: second-order residual of the joint oracle minus the
  // sum of single-layer residuals.
  const double r_glob = j.dot(theta_glob) + 0.5 * theta_glob.dot(k * theta_glob);
  double r_loc_sum = 0.0;
  for (Index l = 1; l <= p.layers(); ++l) {
    const Index o = p.offset(l);
    const Index n = p.size(l);
    const Vector tl = theta_loc.segment(o, n);
    r_loc_sum += j.segment(o, n).dot(tl) + 0.5 * tl.dot(k.block(o, o, n, n) * tl);
  }

  ResidualGap out;
  out.gap = r_glob - r_loc_sum;
  out.terms = {0.0, 0.0, 0.0, 0.0};
  out.terms[0] = j.dot(dtheta);
  for (Index l = 1; l <= p.layers(); ++l) {
    const Index o = p.offset(l);
    const Index n = p.size(l);
    const Matrix kll = k.block(o, o, n, n);
    out.terms[1] += theta_loc.segment(o, n).dot(kll * dtheta.segment(o, n));
    out.terms[2] += 0.5 * dtheta.segment(o, n).dot(kll * dtheta.segment(o, n));
  }
  // Off-diagonal curvature picked up only by the joint oracle.
  Matrix e_k = k;
  for (Index l = 1; l <= p.layers(); ++l) {
    const Index o = p.offset(l);
    const Index n = p.size(l);
    e_k.block(o, o, n, n).setZero();
  }
  out.terms[3] = 0.5 * theta_glob.dot(e_k * theta_glob);
  return out;
}

Matrix extract_block(const SymMatrix& h, const Partition& p, const LayerSet& rows,
                     const LayerSet& cols) {
  Index nr = 0, nc = 0;
  for (Index l : rows) nr += p.size(l);
  for (Index l : cols) nc += p.size(l);
  Matrix out(nr, nc);
  Index ro = 0;
  for (Index lr : rows) {
    Index co = 0;
    for (Index lc : cols) {
      out.block(ro, co, p.size(lr), p.size(lc)) =
          h.mat().block(p.offset(lr), p.offset(lc), p.size(lr), p.size(lc));
      co += p.size(lc);
    }
    ro += p.size(lr);
  }
  return out;
}

Vector extract_segment(const Vector& g, const Partition& p, const LayerSet& s) {
  Index n = 0;
  for (Index l : s) n += p.size(l);
  Vector out(n);
  Index o = 0;
  for (Index l : s) {
    out.segment(o, p.size(l)) = g.segment(p.offset(l), p.size(l));
    o += p.size(l);
  }
  return out;
}

double gain(const QuadraticModel& m, const LayerSet& s) {
  if (s.empty()) throw EmptySelection("gain: empty layer set");
  validate_layer_set(s, m.layers(), "gain");
  const Matrix h_ss = extract_block(m.h, m.partition, s, s);
  const Vector g_s = extract_segment(m.g, m.partition, s);
  return 0.5 * g_s.dot(spd_solve(SymMatrix(h_ss), g_s));
}

SandwichReport sandwich_check(const QuadraticModel& m, const LayerSet& s) {
  if (s.empty()) throw EmptySelection("sandwich_check: empty layer set");
  validate_layer_set(s, m.layers(), "sandwich_check");
  const Partition& p = m.partition;

  std::vector<Index> sub_sizes;
  sub_sizes.reserve(s.size());
  for (Index l : s) sub_sizes.push_back(p.size(l));
  const Partition sub(sub_sizes);
  const SymMatrix h_ss(extract_block(m.h, p, s, s));

  SandwichReport out;
  out.rho_s = spectral_norm(whitened_offdiag(h_ss, sub));
  if (out.rho_s >= 1.0) {
    throw CouplingTooStrong("sandwich_check: restricted coupling rho_S = " +
                            std::to_string(out.rho_s) + " >= 1");
  }
  out.delta = gain(m, s);
  out.delta_add = 0.0;
  for (Index l : s) {
    const Index o = p.offset(l);
    const Index n = p.size(l);
    const SymMatrix block(Matrix(m.h.mat().block(o, o, n, n)));
    const Vector g_l = m.g.segment(o, n);
    out.delta_add += 0.5 * g_l.dot(spd_solve(block, g_l));
  }
  out.lower = out.delta_add / (1.0 + out.rho_s);
  return out;
}

FreezeReport freeze_penalty(const QuadraticModel& m, Index layer) {
  const Partition& p = m.partition;
  if (p.layers() < 2) throw InvalidArgument("freeze_penalty: needs at least two layers");

  const SchurReduced red = schur_reduce(m.h, m.g, p, layer);

  const Index o = p.offset(layer);
  const Index n = p.size(layer);
  const SymMatrix h_ll(Matrix(m.h.mat().block(o, o, n, n)));
  const SymMatrix s_ll = inv_sqrt(h_ll);

  const std::vector<Index> rest = p.complement_indices(layer);
  const Index mdim = static_cast<Index>(rest.size());
  Matrix h_rr(mdim, mdim);
  Matrix h_lr(n, mdim);
  Vector g_r(mdim);
  for (Index i = 0; i < mdim; ++i) {
    g_r(i) = m.g(rest[static_cast<std::size_t>(i)]);
    for (Index jj = 0; jj < mdim; ++jj) {
      h_rr(i, jj) = m.h(rest[static_cast<std::size_t>(i)], rest[static_cast<std::size_t>(jj)]);
    }
    for (Index jj = 0; jj < n; ++jj) {
      h_lr(jj, i) = m.h(o + jj, rest[static_cast<std::size_t>(i)]);
    }
  }
  const SymMatrix s_rr = inv_sqrt(SymMatrix(h_rr));

  FreezeReport out;
  out.penalty = 0.5 * red.g_cond.dot(spd_solve(red.h_cond, red.g_cond));

  const Vector w = s_ll.mat() * red.g_cond;
  out.w_norm_sq = w.squaredNorm();
  out.lower = 0.5 * out.w_norm_sq;

  // kappa = largest squared singular value of the whitened interaction block.
  const Matrix b = s_ll.mat() * h_lr * s_rr.mat();
  out.kappa = spectral_norm(SymMatrix(b * b.transpose()));
  if (out.kappa >= 1.0) {
    throw CouplingTooStrong("freeze_penalty: whitened interaction kappa = " +
                            std::to_string(out.kappa) + " >= 1");
  }
  out.upper = out.w_norm_sq / (2.0 * (1.0 - out.kappa));

  const Vector u = s_ll.mat() * m.g.segment(o, n);
  out.u_norm = u.norm();
  out.c_compens = std::sqrt(out.kappa) * (s_rr.mat() * g_r).norm();
  out.s = std::max(out.u_norm - out.c_compens, 0.0);
  return out;
}

double frozen_optimum(const QuadraticModel& m, const LayerSet& frozen) {
  validate_layer_set(frozen, m.layers(), "frozen_optimum");
  LayerSet complement;
  for (Index l = 1; l <= m.layers(); ++l) {
    if (!std::binary_search(frozen.begin(), frozen.end(), l)) complement.push_back(l);
  }
  if (complement.empty()) return m.q0;
  const Matrix h_cc = extract_block(m.h, m.partition, complement, complement);
  const Vector g_c = extract_segment(m.g, m.partition, complement);
  return m.q0 - 0.5 * g_c.dot(spd_solve(SymMatrix(h_cc), g_c));
}

bool freeze_monotonicity(const QuadraticModel& m, const LayerSet& frozen, Index layer) {
  validate_layer_set(frozen, m.layers(), "freeze_monotonicity");
  if (!std::binary_search(frozen.begin(), frozen.end(), layer)) {
    throw InvalidArgument("freeze_monotonicity: layer " + std::to_string(layer) +
                          " not in the frozen set");
  }
  const double q_star = m.q0 - 0.5 * m.g.dot(spd_solve(m.h, m.g));
  const double q_frozen_set = frozen_optimum(m, frozen);
  const double q_frozen_layer = frozen_optimum(m, {layer});
  return (q_frozen_set - q_star) >= (q_frozen_layer - q_star) - 1e-10;
}

QuadraticModel gen_coupled_instance(Index layers, const std::vector<Index>& sizes,
                                    double decay, double strength, std::uint64_t seed) {
  if (layers != static_cast<Index>(sizes.size())) {
    throw InvalidArgument("gen_coupled_instance: layer count != len(sizes)");
  }
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw InvalidArgument("gen_coupled_instance: decay outside (0,1]");
  }
  if (!(strength >= 0.0)) throw InvalidArgument("gen_coupled_instance: negative strength");

  const Partition p(sizes);
  const Index dim = p.dim();
  CounterRng root(seed, fnv1a64("gen_coupled_instance"));

  // Diagonal blocks: random rotation times eigenvalues in [0.5, 2], kept
  // alongside their square roots so off-diagonal blocks can be whitened
  // exactly by construction.
  std::vector<Matrix> sqrt_blocks;
  sqrt_blocks.reserve(static_cast<std::size_t>(layers));
  Matrix h = Matrix::Zero(dim, dim);
  for (Index l = 1; l <= layers; ++l) {
    const Index n = p.size(l);
    CounterRng rng = root.fork("diag:" + std::to_string(l));
    Matrix gauss(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) gauss(i, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(gauss);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < n; ++j) {
      if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    Vector lambda(n);
    for (Index i = 0; i < n; ++i) lambda(i) = rng.uniform(0.5, 2.0);
    const Matrix block = q * lambda.asDiagonal() * q.transpose();
    h.block(p.offset(l), p.offset(l), n, n) = 0.5 * (block + block.transpose());
    sqrt_blocks.push_back(q * lambda.cwiseSqrt().asDiagonal() * q.transpose());
  }

  // Off-diagonal blocks: H_lk = H_ll^{1/2} G H_kk^{1/2} with G rescaled to
  // spectral norm strength * decay^{k-l}, so the whitened coupling magnitude
  // is exact before any positive-definiteness shift.
  for (Index l = 1; l <= layers; ++l) {
    for (Index k = l + 1; k <= layers; ++k) {
      const Index nl = p.size(l), nk = p.size(k);
      const double target = strength * std::pow(decay, static_cast<double>(k - l));
      Matrix block = Matrix::Zero(nl, nk);
      if (target > 0.0) {
        CounterRng rng = root.fork("off:" + std::to_string(l) + ":" + std::to_string(k));
        Matrix gauss(nl, nk);
        for (Index i = 0; i < nl; ++i)
          for (Index j = 0; j < nk; ++j) gauss(i, j) = rng.normal();
        Eigen::JacobiSVD<Matrix> svd(gauss);
        const double norm = svd.singularValues()(0);
        if (norm > 0.0) {
          gauss *= target / norm;
          block = sqrt_blocks[static_cast<std::size_t>(l - 1)] * gauss *
                  sqrt_blocks[static_cast<std::size_t>(k - 1)];
        }
      }
      h.block(p.offset(l), p.offset(k), nl, nk) = block;
      h.block(p.offset(k), p.offset(l), nk, nl) = block.transpose();
    }
  }

  // Smallest diagonal shift in {0, 2^j * 1e-6} that restores positive
  // definiteness; usually zero for decaying coupling.
  SymMatrix hs(h);
  if (!is_spd(hs)) {
    double shift = 1e-6;
    while (true) {
      SymMatrix candidate(h + shift * Matrix::Identity(dim, dim));
      if (is_spd(candidate)) {
        hs = candidate;
        break;
      }
      shift *= 2.0;
    }
  }

  // Gradient with controlled whitened per-layer energy: g_l = H_ll^{1/2} v_l,
  // ||v_l|| in [0.9, 1.1], direction uniform on the sphere.
  Vector g(dim);
  for (Index l = 1; l <= layers; ++l) {
    const Index n = p.size(l);
    CounterRng rng = root.fork("grad:" + std::to_string(l));
    Vector v(n);
    double norm = 0.0;
    do {
      for (Index i = 0; i < n; ++i) v(i) = rng.normal();
      norm = v.norm();
    } while (norm == 0.0);
    v *= rng.uniform(0.9, 1.1) / norm;
    g.segment(p.offset(l), n) = sqrt_blocks[static_cast<std::size_t>(l - 1)] * v;
  }

  return QuadraticModel(std::move(g), std::move(hs), p, 0.0);
}

}  // namespace layercard
