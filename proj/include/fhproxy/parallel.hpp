#pragma once

#include <cstddef>
#include <functional>

namespace fhproxy {

// Runs fn(0..count-1) across up to `threads` workers (0 = hardware count).
// Indices are claimed from a shared atomic counter; the work items must be
// independent. Exceptions from workers are rethrown on the calling thread.
void parallel_for(size_t count, unsigned threads, const std::function<void(size_t)>& fn);

} // namespace fhproxy
