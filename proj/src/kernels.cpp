#include "rtls/kernels.hpp"

#include <cassert>
#include <queue>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rtls::kernels {

namespace {

std::vector<int> bfs_row(const std::vector<std::vector<int>>& adjacency, int source,
                         int unreachable) {
  std::vector<int> dist(adjacency.size(), unreachable);
  std::queue<int> frontier;
  dist[source] = 0;
  frontier.push(source);
  while (!frontier.empty()) {
    const int node = frontier.front();
    frontier.pop();
    for (int next : adjacency[node]) {
      if (dist[next] == unreachable) {
        dist[next] = dist[node] + 1;
        frontier.push(next);
      }
    }
  }
  return dist;
}

}  // namespace

namespace serial {

void gemv_acc(MatView a, std::span<const double> x, std::span<double> y) {
  assert(static_cast<int>(x.size()) == a.cols && static_cast<int>(y.size()) == a.rows);
  for (int r = 0; r < a.rows; ++r) {
    const double* row = a.data.data() + static_cast<std::size_t>(r) * a.cols;
    double acc = y[r];
    for (int c = 0; c < a.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void gemv_t_acc(MatView a, std::span<const double> x, std::span<double> y) {
  assert(static_cast<int>(x.size()) == a.rows && static_cast<int>(y.size()) == a.cols);
  for (int c = 0; c < a.cols; ++c) {
    double acc = y[c];
    for (int r = 0; r < a.rows; ++r) acc += a.data[static_cast<std::size_t>(r) * a.cols + c] * x[r];
    y[c] = acc;
  }
}

void ger_acc(std::span<double> a, int rows, int cols, std::span<const double> u,
             std::span<const double> v) {
  for (int r = 0; r < rows; ++r) {
    double* row = a.data() + static_cast<std::size_t>(r) * cols;
    const double ur = u[r];
    for (int c = 0; c < cols; ++c) row[c] += ur * v[c];
  }
}

std::vector<int> all_pairs_hops(const std::vector<std::vector<int>>& adjacency, int unreachable) {
  const int n = static_cast<int>(adjacency.size());
  std::vector<int> out(static_cast<std::size_t>(n) * n);
  for (int s = 0; s < n; ++s) {
    auto row = bfs_row(adjacency, s, unreachable);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(s) * n);
  }
  return out;
}

}  // namespace serial

namespace parallel {

void gemv_acc(MatView a, std::span<const double> x, std::span<double> y) {
  assert(static_cast<int>(x.size()) == a.cols && static_cast<int>(y.size()) == a.rows);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < a.rows; ++r) {
    const double* row = a.data.data() + static_cast<std::size_t>(r) * a.cols;
    double acc = y[r];
    for (int c = 0; c < a.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

void gemv_t_acc(MatView a, std::span<const double> x, std::span<double> y) {
  assert(static_cast<int>(x.size()) == a.rows && static_cast<int>(y.size()) == a.cols);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < a.cols; ++c) {
    double acc = y[c];
    for (int r = 0; r < a.rows; ++r) acc += a.data[static_cast<std::size_t>(r) * a.cols + c] * x[r];
    y[c] = acc;
  }
}

void ger_acc(std::span<double> a, int rows, int cols, std::span<const double> u,
             std::span<const double> v) {
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    double* row = a.data() + static_cast<std::size_t>(r) * cols;
    const double ur = u[r];
    for (int c = 0; c < cols; ++c) row[c] += ur * v[c];
  }
}

std::vector<int> all_pairs_hops(const std::vector<std::vector<int>>& adjacency, int unreachable) {
  const int n = static_cast<int>(adjacency.size());
  std::vector<int> out(static_cast<std::size_t>(n) * n);
#pragma omp parallel for schedule(dynamic, 4)
  for (int s = 0; s < n; ++s) {
    auto row = bfs_row(adjacency, s, unreachable);
    std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(s) * n);
  }
  return out;
}

}  // namespace parallel

namespace {
bool use_parallel(long work) {
#ifdef _OPENMP
  return work >= kParallelThreshold && omp_get_max_threads() > 1 && !omp_in_parallel();
#else
  (void)work;
  return false;
#endif
}
}  // namespace

void gemv_acc(MatView a, std::span<const double> x, std::span<double> y) {
  if (use_parallel(static_cast<long>(a.rows) * a.cols))
    parallel::gemv_acc(a, x, y);
  else
    serial::gemv_acc(a, x, y);
}

void gemv_t_acc(MatView a, std::span<const double> x, std::span<double> y) {
  if (use_parallel(static_cast<long>(a.rows) * a.cols))
    parallel::gemv_t_acc(a, x, y);
  else
    serial::gemv_t_acc(a, x, y);
}

void ger_acc(std::span<double> a, int rows, int cols, std::span<const double> u,
             std::span<const double> v) {
  if (use_parallel(static_cast<long>(rows) * cols))
    parallel::ger_acc(a, rows, cols, u, v);
  else
    serial::ger_acc(a, rows, cols, u, v);
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace rtls::kernels
