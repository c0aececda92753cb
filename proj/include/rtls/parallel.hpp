#pragma once

#include <exception>

namespace rtls {

/// Runs fn(i) for i in [0, n) across OpenMP threads. Work items must be
/// independent. An exception thrown by any item is rethrown on the calling
/// thread once the loop finishes.
template <class Fn>
void parallel_for(long n, Fn&& fn) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < n; ++i) {
    try {
      fn(i);
    } catch (...) {
#pragma omp critical(rtls_parallel_for_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

/// Serial counterpart with the same contract.
template <class Fn>
void serial_for(long n, Fn&& fn) {
  for (long i = 0; i < n; ++i) fn(i);
}

}  // namespace rtls
