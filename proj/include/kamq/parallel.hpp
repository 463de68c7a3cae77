#pragma once

#include <cstddef>
#include <functional>

namespace kamq {

// Process-wide worker count; 0 or 1 runs inline.
void set_thread_count(int n);
int thread_count();

// Calls body(i) once for every i in [0, n). Callers write results per index, so the
// outcome does not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace kamq
