#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include <omp.h>

namespace isaclab {

/// Every data-parallel kernel has a plain-loop reference path. Both paths
/// write per-index results and reduce in index order, so they agree bit
/// for bit.
enum class Exec { serial, parallel };

template <class Fn>
void for_each_index(Exec exec, std::size_t n, Fn&& fn)
{
    if (exec == Exec::serial || n < 2) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) {
                error = std::current_exception();
            }
        }
    }
    if (error) {
        std::rethrow_exception(error);
    }
}

inline int max_threads()
{
    return omp_get_max_threads();
}

} // namespace isaclab
