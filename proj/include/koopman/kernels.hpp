#pragma once

// Per-block kernels of the LMI pipeline. Every kernel exists twice: an OpenMP version
// used by the library and a plain serial loop kept as the reference for tests and the
// benchmark. Parallel reductions go through fixed-size chunks summed in chunk order, so
// results do not depend on the thread count.

#include "koopman/sdp.hpp"

#include <functional>
#include <vector>

namespace koopman::kernels
{

inline constexpr std::size_t chunk_size = 64;

/// One constraint block: its family (shared coefficients) and its own base matrix.
struct BlockRef
{
  const BlockFamily* family;
  const Matrix* base;
  std::size_t family_index;
};

/// Blocks in family order, members in insertion order. Per-block matrices passed to the
/// kernels below use the same order.
std::vector<BlockRef> flatten(const SdpProblem& p);

/// Indices of the coefficient matrices that are not identically zero, per family.
std::vector<std::vector<int>> active_coefficients(const SdpProblem& p);

using BlockMatrices = std::vector<Matrix>;

using InputMatrixFn = std::function<Matrix(const Vector& x, const Vector& u)>;

struct ArgMax
{
  double value = 0.0;
  std::size_t index = 0;
};

namespace serial
{
/// M_ij = sum over blocks of tr(F_i X F_j Zinv).
Matrix schur_complement(const SdpProblem& p, const BlockMatrices& X, const BlockMatrices& Zinv);
/// v_i = sum over blocks of <F_i, G>.
Vector constraint_map(const SdpProblem& p, const BlockMatrices& G);
/// Largest alpha with V + alpha dV positive semidefinite in every block (V positive
/// definite); infinity when dV never leaves the cone, 0 when V is not positive definite.
double max_psd_step(const BlockMatrices& V, const BlockMatrices& dV);
double min_block_eigenvalue(const SdpProblem& p, const Vector& y);
std::vector<Matrix> input_matrices(const InputMatrixFn& fn, const std::vector<Vector>& xs,
                                   const std::vector<Vector>& us);
ArgMax max_deviation_norm(const std::vector<Matrix>& b_values, const Matrix& B_hat);
} // namespace serial

namespace parallel
{
Matrix schur_complement(const SdpProblem& p, const BlockMatrices& X, const BlockMatrices& Zinv);
Vector constraint_map(const SdpProblem& p, const BlockMatrices& G);
double max_psd_step(const BlockMatrices& V, const BlockMatrices& dV);
double min_block_eigenvalue(const SdpProblem& p, const Vector& y);
std::vector<Matrix> input_matrices(const InputMatrixFn& fn, const std::vector<Vector>& xs,
                                   const std::vector<Vector>& us);
ArgMax max_deviation_norm(const std::vector<Matrix>& b_values, const Matrix& B_hat);
} // namespace parallel

/// Induced 2-norm (largest singular value); Euclidean norm for a single column.
double induced_two_norm(const Matrix& M);

} // namespace koopman::kernels
