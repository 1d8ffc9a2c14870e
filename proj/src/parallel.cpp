#include "mosaic/parallel.hpp"

#include <exception>
#include <thread>

namespace mosaic {

void serial_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    for (std::size_t i = 0; i < count; ++i) body(i);
}

void parallel_for(std::size_t count, int worker_count,
                  const std::function<void(std::size_t)>& body) {
    if (worker_count <= 1 || count <= 1) {
        serial_for(count, body);
        return;
    }
#ifdef _OPENMP
    std::exception_ptr first_error = nullptr;
#pragma omp parallel for schedule(static, 1) num_threads(worker_count)
    for (long long i = 0; i < static_cast<long long>(count); ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(mosaic_parallel_for_error)
            {
                if (!first_error) first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
#else
    serial_for(count, body);
#endif
}

int hardware_workers() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace mosaic
