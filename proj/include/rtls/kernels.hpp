#pragma once

// Data-parallel inner loops. Each kernel exists twice: a plain serial loop
// kept as the reference, and an OpenMP version that partitions the same
// independent work items. Both perform the identical sequence of floating
// point operations per output element, so their results agree bitwise and
// the choice between them never changes a run's output.

#include <span>
#include <vector>

namespace rtls::kernels {

/// Matrices are row-major `rows x cols`.
struct MatView {
  std::span<const double> data;
  int rows;
  int cols;
};

namespace serial {

/// y += A x
void gemv_acc(MatView a, std::span<const double> x, std::span<double> y);
/// y += A^T x
void gemv_t_acc(MatView a, std::span<const double> x, std::span<double> y);
/// A += u v^T
void ger_acc(std::span<double> a, int rows, int cols, std::span<const double> u,
             std::span<const double> v);
/// Hop count between every ordered pair, row-major Z x Z; `unreachable` marks
/// pairs in different components.
std::vector<int> all_pairs_hops(const std::vector<std::vector<int>>& adjacency, int unreachable);

}  // namespace serial

namespace parallel {

void gemv_acc(MatView a, std::span<const double> x, std::span<double> y);
void gemv_t_acc(MatView a, std::span<const double> x, std::span<double> y);
void ger_acc(std::span<double> a, int rows, int cols, std::span<const double> u,
             std::span<const double> v);
std::vector<int> all_pairs_hops(const std::vector<std::vector<int>>& adjacency, int unreachable);

}  // namespace parallel

/// Work size (multiply-adds) above which the dispatching wrappers below use
/// the OpenMP kernels.
inline constexpr long kParallelThreshold = 1L << 16;

void gemv_acc(MatView a, std::span<const double> x, std::span<double> y);
void gemv_t_acc(MatView a, std::span<const double> x, std::span<double> y);
void ger_acc(std::span<double> a, int rows, int cols, std::span<const double> u,
             std::span<const double> v);

/// Number of OpenMP threads available (1 when built without OpenMP).
int max_threads();

}  // namespace rtls::kernels
