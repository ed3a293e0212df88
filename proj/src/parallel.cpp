#include "seqdispatch/parallel.hpp"

#include <omp.h>

#include <string>

#include "seqdispatch/error.hpp"

namespace seqdispatch {

std::string_view to_string(ExecPolicy policy) noexcept {
  return policy == ExecPolicy::serial ? "serial" : "parallel";
}

ExecPolicy exec_policy_from_string(std::string_view s) {
  if (s == "serial") return ExecPolicy::serial;
  if (s == "parallel") return ExecPolicy::parallel;
  throw Error(ErrorCode::ValidationError, "unknown execution policy '" + std::string(s) + "'");
}

int resolve_jobs(int jobs) noexcept { return jobs > 0 ? jobs : omp_get_max_threads(); }

}  // namespace seqdispatch
