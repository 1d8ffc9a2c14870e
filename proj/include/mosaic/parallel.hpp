#pragma once

#include <cstddef>
#include <functional>

namespace mosaic {

// Serial reference for the task loop. Kept alongside the OpenMP path so the
// two can be compared directly in tests and benchmarks.
void serial_for(std::size_t count, const std::function<void(std::size_t)>& body);

// Runs body(i) for i in [0, count) on worker_count OpenMP threads with
// round-robin task assignment. Tasks must be independent; any exception is
// captured and rethrown after the loop joins. worker_count <= 1 (or a build
// without OpenMP) uses serial_for.
void parallel_for(std::size_t count, int worker_count,
                  const std::function<void(std::size_t)>& body);

// Number of hardware threads, or 1 when unknown.
int hardware_workers();

}  // namespace mosaic
