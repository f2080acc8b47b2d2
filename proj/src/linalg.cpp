#include "layercard/linalg.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <string>

namespace layercard {

SymMatrix::SymMatrix(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw InvalidMatrix("SymMatrix: input is " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + ", expected square");
  }
  if (!a.allFinite()) throw InvalidMatrix("SymMatrix: non-finite entries");
  m_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(Index n) {
  SymMatrix s;
  s.m_ = Matrix::Identity(n, n);
  return s;
}

SymMatrix SymMatrix::zero(Index n) {
  SymMatrix s;
  s.m_ = Matrix::Zero(n, n);
  return s;
}

SymMatrix SymMatrix::from_symmetric(Matrix a) {
  if (a.rows() != a.cols()) throw InvalidMatrix("from_symmetric: not square");
  if (!a.allFinite()) throw InvalidMatrix("from_symmetric: non-finite entries");
  if (a != a.transpose()) throw InvalidMatrix("from_symmetric: not exactly symmetric");
  SymMatrix s;
  s.m_ = std::move(a);
  return s;
}

Partition::Partition(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw PartitionMismatch("Partition: no layers");
  offsets_.reserve(sizes_.size());
  for (Index d : sizes_) {
    if (d <= 0) throw PartitionMismatch("Partition: nonpositive layer size");
    offsets_.push_back(total_);
    total_ += d;
  }
}

void Partition::check_layer(Index layer) const {
  if (layer < 1 || layer > layers()) {
    throw PartitionMismatch("Partition: layer " + std::to_string(layer) +
                            " outside 1.." + std::to_string(layers()));
  }
}

Index Partition::size(Index layer) const {
  check_layer(layer);
  return sizes_[static_cast<std::size_t>(layer - 1)];
}

Index Partition::offset(Index layer) const {
  check_layer(layer);
  return offsets_[static_cast<std::size_t>(layer - 1)];
}

std::vector<Index> Partition::complement_indices(Index layer) const {
  check_layer(layer);
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(dim() - size(layer)));
  const Index lo = offset(layer);
  const Index hi = lo + size(layer);
  for (Index i = 0; i < dim(); ++i) {
    if (i < lo || i >= hi) idx.push_back(i);
  }
  return idx;
}

namespace {

void check_partition(const SymMatrix& h, const Partition& p, const char* where) {
  if (h.dim() != p.dim()) {
    throw PartitionMismatch(std::string(where) + ": matrix dim " + std::to_string(h.dim()) +
                            " != partition dim " + std::to_string(p.dim()));
  }
}

// Cholesky with the relative pivot threshold. Returns false when Eigen
// reports failure or any squared pivot falls below tol * max diagonal.
bool cholesky_with_threshold(const Matrix& a, Matrix* factor) {
  if (a.rows() == 0) {
    if (factor) factor->resize(0, 0);
    return true;
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  const Matrix l = llt.matrixL();
  const double max_diag = a.diagonal().maxCoeff();
  const double floor = kSpdPivotTol * max_diag;
  for (Index i = 0; i < l.rows(); ++i) {
    const double pivot = l(i, i) * l(i, i);
    if (!(pivot >= floor) || !std::isfinite(pivot)) return false;
  }
  if (factor) *factor = l;
  return true;
}

}  // namespace

Spectrum eigendecompose(const SymMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a.mat());
  if (solver.info() != Eigen::Success) {
    throw InvalidMatrix("eigendecompose: iteration failed to converge");
  }
  const Index n = a.dim();
  Spectrum s;
  s.eigenvalues = solver.eigenvalues().reverse();
  s.eigenvectors.resize(n, n);
  for (Index j = 0; j < n; ++j) {
    s.eigenvectors.col(j) = solver.eigenvectors().col(n - 1 - j);
  }
  return s;
}

double spectral_norm(const SymMatrix& m) {
  if (m.dim() == 0) return 0.0;
  if (!m.mat().allFinite()) throw InvalidMatrix("spectral_norm: non-finite entries");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m.mat(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw InvalidMatrix("spectral_norm: iteration failed to converge");
  }
  const Vector& ev = solver.eigenvalues();
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

std::pair<SymMatrix, SymMatrix> block_split(const SymMatrix& h, const Partition& p) {
  check_partition(h, p, "block_split");
  Matrix d = Matrix::Zero(h.dim(), h.dim());
  for (Index l = 1; l <= p.layers(); ++l) {
    const Index o = p.offset(l);
    const Index n = p.size(l);
    d.block(o, o, n, n) = h.mat().block(o, o, n, n);
  }
  Matrix e = h.mat() - d;
  return {SymMatrix::from_symmetric(std::move(d)), SymMatrix::from_symmetric(std::move(e))};
}

SchurReduced schur_reduce(const SymMatrix& h, const Vector& g, const Partition& p, Index layer) {
  check_partition(h, p, "schur_reduce");
  if (g.size() != p.dim()) throw DimensionMismatch("schur_reduce: gradient length mismatch");
  if (p.layers() < 2) throw InvalidArgument("schur_reduce: needs at least two layers");
  if (!cholesky_with_threshold(h.mat(), nullptr)) {
    throw NotPositiveDefinite("schur_reduce: H is not positive definite");
  }

  const Index o = p.offset(layer);
  const Index n = p.size(layer);
  const std::vector<Index> rest = p.complement_indices(layer);
  const Index m = static_cast<Index>(rest.size());

  Matrix h_rr(m, m);
  Matrix h_rl(m, n);
  Vector g_r(m);
  for (Index i = 0; i < m; ++i) {
    g_r(i) = g(rest[static_cast<std::size_t>(i)]);
    for (Index j = 0; j < m; ++j) {
      h_rr(i, j) = h(rest[static_cast<std::size_t>(i)], rest[static_cast<std::size_t>(j)]);
    }
    for (Index j = 0; j < n; ++j) {
      h_rl(i, j) = h(rest[static_cast<std::size_t>(i)], o + j);
    }
  }

  Matrix l_rr;
  if (!cholesky_with_threshold(h_rr, &l_rr)) {
    throw NotPositiveDefinite("schur_reduce: complement block is not positive definite");
  }
  // X = H_RR^{-1} H_Rl and y = H_RR^{-1} g_R via the shared factor.
  const Matrix x = l_rr.transpose().triangularView<Eigen::Upper>().solve(
      l_rr.triangularView<Eigen::Lower>().solve(h_rl));
  const Vector y = l_rr.transpose().triangularView<Eigen::Upper>().solve(
      l_rr.triangularView<Eigen::Lower>().solve(g_r));

  const Matrix h_ll = h.mat().block(o, o, n, n);
  SchurReduced out;
  out.h_cond = SymMatrix(h_ll - h_rl.transpose() * x);
  out.g_cond = g.segment(o, n) - h_rl.transpose() * y;
  return out;
}

Vector spd_solve(const SymMatrix& a, const Vector& b) {
  if (a.dim() != b.size()) throw DimensionMismatch("spd_solve: size mismatch");
  Matrix l;
  if (!cholesky_with_threshold(a.mat(), &l)) {
    throw NotPositiveDefinite("spd_solve: matrix is not positive definite");
  }
  return l.transpose().triangularView<Eigen::Upper>().solve(
      l.triangularView<Eigen::Lower>().solve(b));
}

Matrix spd_solve(const SymMatrix& a, const Matrix& b) {
  if (a.dim() != b.rows()) throw DimensionMismatch("spd_solve: size mismatch");
  Matrix l;
  if (!cholesky_with_threshold(a.mat(), &l)) {
    throw NotPositiveDefinite("spd_solve: matrix is not positive definite");
  }
  return l.transpose().triangularView<Eigen::Upper>().solve(
      l.triangularView<Eigen::Lower>().solve(b));
}

Matrix spd_cholesky(const SymMatrix& a) {
  Matrix l;
  if (!cholesky_with_threshold(a.mat(), &l)) {
    throw NotPositiveDefinite("spd_cholesky: matrix is not positive definite");
  }
  return l;
}

bool is_spd(const SymMatrix& a) {
  return a.dim() == 0 || cholesky_with_threshold(a.mat(), nullptr);
}

SymMatrix inv_sqrt(const SymMatrix& a) {
  if (!is_spd(a)) throw NotPositiveDefinite("inv_sqrt: matrix is not positive definite");
  const Spectrum s = eigendecompose(a);
  const Vector scaled = s.eigenvalues.array().rsqrt();
  return SymMatrix(s.eigenvectors * scaled.asDiagonal() * s.eigenvectors.transpose());
}

SymMatrix psd_sqrt(const SymMatrix& a) {
  const Spectrum s = eigendecompose(a);
  Vector scaled = s.eigenvalues.array().max(0.0).sqrt();
  return SymMatrix(s.eigenvectors * scaled.asDiagonal() * s.eigenvectors.transpose());
}

std::vector<Matrix> block_inv_sqrt(const SymMatrix& h, const Partition& p) {
  check_partition(h, p, "block_inv_sqrt");
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(p.layers()));
  for (Index l = 1; l <= p.layers(); ++l) {
    const Index o = p.offset(l);
    const Index n = p.size(l);
    const SymMatrix block(Matrix(h.mat().block(o, o, n, n)));
    if (!is_spd(block)) {
      throw NotPositiveDefinite("block_inv_sqrt: diagonal block " + std::to_string(l) +
                                " is not positive definite");
    }
    out.push_back(inv_sqrt(block).mat());
  }
  return out;
}

SymMatrix whitened_offdiag(const SymMatrix& h, const Partition& p) {
  check_partition(h, p, "whitened_offdiag");
  const std::vector<Matrix> scale = block_inv_sqrt(h, p);
  Matrix m = Matrix::Zero(h.dim(), h.dim());
  for (Index l = 1; l <= p.layers(); ++l) {
    for (Index k = l + 1; k <= p.layers(); ++k) {
      const Index ol = p.offset(l), nl = p.size(l);
      const Index ok = p.offset(k), nk = p.size(k);
      const Matrix block = scale[static_cast<std::size_t>(l - 1)] *
                           h.mat().block(ol, ok, nl, nk) *
                           scale[static_cast<std::size_t>(k - 1)];
      m.block(ol, ok, nl, nk) = block;
      m.block(ok, ol, nk, nl) = block.transpose();
    }
  }
  return SymMatrix::from_symmetric(std::move(m));
}

}  // namespace layercard
