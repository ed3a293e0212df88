#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <string_view>

namespace seqdispatch {

/// Every OpenMP kernel in the library has a serial twin selected by this
/// flag. Both produce bit-identical results: work items write to disjoint
/// slots and any reduction runs afterwards in index order.
enum class ExecPolicy { serial, parallel };

std::string_view to_string(ExecPolicy policy) noexcept;
ExecPolicy exec_policy_from_string(std::string_view s);

/// 0 means "use the OpenMP default".
int resolve_jobs(int jobs) noexcept;

/// Runs f(i) for i in [0, n). The first exception thrown by any item is
/// rethrown on the calling thread after the loop finishes.
template <typename F>
void for_each_index(ExecPolicy policy, std::size_t n, int jobs, F&& f) {
  if (policy == ExecPolicy::serial || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) num_threads(resolve_jobs(jobs))
  for (long long i = 0; i < count; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace seqdispatch
