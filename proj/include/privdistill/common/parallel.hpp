#pragma once

#include <cstddef>
#include <functional>

namespace privdistill {

// Number of workers to use when the caller passes 0.
std::size_t default_workers();

// Runs body(i) for i in [0, n) on up to `workers` threads. Each index is
// processed exactly once; callers write results into slot i so the merged
// output is independent of scheduling. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

}  // namespace privdistill
