#pragma once

// Index-parallel map used by the embarrassingly parallel kernels (policy
// enumeration, multi-seed runs, rho grids). The serial path is the reference
// implementation; tests check both paths produce identical results.

#include <cstddef>
#include <exception>
#include <optional>
#include <type_traits>
#include <vector>

#include <omp.h>

namespace apelab {

enum class Execution { Serial, Parallel };

/// Number of OpenMP workers used by Execution::Parallel; 0 keeps the runtime
/// default (available parallelism).
inline void set_worker_count(int workers) {
  if (workers > 0) omp_set_num_threads(workers);
}

template <typename F>
auto parallel_map(std::size_t n, F&& fn, Execution exec = Execution::Parallel)
    -> std::vector<std::invoke_result_t<F&, std::size_t>> {
  using T = std::invoke_result_t<F&, std::size_t>;
  std::vector<std::optional<T>> slots(n);
  if (exec == Execution::Serial) {
    for (std::size_t i = 0; i < n; ++i) slots[i].emplace(fn(i));
  } else {
    std::exception_ptr error;
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1)
    for (long long i = 0; i < count; ++i) {
      try {
        slots[static_cast<std::size_t>(i)].emplace(fn(static_cast<std::size_t>(i)));
      } catch (...) {
#pragma omp critical(apelab_parallel_map_error)
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
  }
  std::vector<T> out;
  out.reserve(n);
  for (auto& slot : slots) out.push_back(std::move(*slot));
  return out;
}

}  // namespace apelab
