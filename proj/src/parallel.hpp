#pragma once

#include <cstddef>
#include <exception>

#include "stlcbf/controller.hpp"

namespace stlcbf::detail {

// Runs body(i) for i in [0, n); the first exception raised is rethrown.
template <class Body>
void for_each_index(std::size_t n, Exec exec, Body&& body)
{
    if (exec == Exec::Serial) {
        for (std::size_t i = 0; i < n; ++i)
            body(i);
        return;
    }
    std::exception_ptr err;
    const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(stlcbf_kernel_error)
            if (!err)
                err = std::current_exception();
        }
    }
    if (err)
        std::rethrow_exception(err);
}

}  // namespace stlcbf::detail
