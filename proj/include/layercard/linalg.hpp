#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "layercard/errors.hpp"

namespace layercard {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Relative pivot threshold for the positive-definiteness test: after a
// Cholesky factorization, every squared pivot must clear this fraction of
// the largest diagonal entry of the input.
inline constexpr double kSpdPivotTol = 1e-12;

// Dense symmetric matrix. Construction symmetrizes (A + A^T)/2 and rejects
// non-finite entries; downstream code may assume exact symmetry.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& a);

  static SymMatrix identity(Index n);
  static SymMatrix zero(Index n);
  // Adopts a matrix that is already exactly symmetric (checked cheaply).
  static SymMatrix from_symmetric(Matrix a);

  Index dim() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }
  double operator()(Index i, Index j) const { return m_(i, j); }

 private:
  Matrix m_;
};

// Contiguous layer partition of a parameter vector: block l (1-based) covers
// indices [offset(l), offset(l) + size(l)). Sizes must be positive.
class Partition {
 public:
  explicit Partition(std::vector<Index> sizes);

  Index layers() const { return static_cast<Index>(sizes_.size()); }
  Index dim() const { return total_; }
  Index size(Index layer) const;    // layer in 1..layers()
  Index offset(Index layer) const;  // start index of layer in 1..layers()
  const std::vector<Index>& sizes() const { return sizes_; }

  // Indices covered by the complement of {layer}, in ascending order.
  std::vector<Index> complement_indices(Index layer) const;

 private:
  void check_layer(Index layer) const;

  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
  Index total_ = 0;
};

// Eigendecomposition of a symmetric matrix, eigenvalues descending and
// eigenvector columns aligned with them.
struct Spectrum {
  Vector eigenvalues;
  Matrix eigenvectors;
};

Spectrum eigendecompose(const SymMatrix& a);

// Largest absolute eigenvalue. Zero-dimensional input is norm zero.
double spectral_norm(const SymMatrix& m);

// Splits H into its block-diagonal part D (layer-diagonal blocks kept) and
// the off-diagonal remainder E = H - D.
std::pair<SymMatrix, SymMatrix> block_split(const SymMatrix& h, const Partition& p);

// Schur complement reduction of a partitioned SPD system onto one layer:
// conditional curvature H_ll - H_lR H_RR^{-1} H_Rl and compensated gradient
// g_l - H_lR H_RR^{-1} g_R, where R collects all other layers.
struct SchurReduced {
  SymMatrix h_cond;
  Vector g_cond;
};

SchurReduced schur_reduce(const SymMatrix& h, const Vector& g, const Partition& p, Index layer);

// Solves A x = b for SPD A by Cholesky. Throws NotPositiveDefinite when the
// factorization fails the pivot threshold.
Vector spd_solve(const SymMatrix& a, const Vector& b);
Matrix spd_solve(const SymMatrix& a, const Matrix& b);

// Lower Cholesky factor of an SPD matrix, with the same pivot threshold.
Matrix spd_cholesky(const SymMatrix& a);

bool is_spd(const SymMatrix& a);

// Inverse symmetric square root A^{-1/2} of an SPD matrix.
SymMatrix inv_sqrt(const SymMatrix& a);

// Symmetric square root A^{1/2} of a PSD matrix (eigenvalues clamped at 0).
SymMatrix psd_sqrt(const SymMatrix& a);

// Per-layer inverse square roots of the diagonal blocks of an SPD-blocked
// matrix. Throws NotPositiveDefinite naming the offending layer.
std::vector<Matrix> block_inv_sqrt(const SymMatrix& h, const Partition& p);

// Whitened off-diagonal interaction M = D^{-1/2} E D^{-1/2} assembled from
// per-block inverse square roots.
SymMatrix whitened_offdiag(const SymMatrix& h, const Partition& p);

}  // namespace layercard
