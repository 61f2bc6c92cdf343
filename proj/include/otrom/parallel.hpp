#pragma once

#include <cstddef>
#include <exception>
#include <functional>

namespace otrom {

/// Thread cap from OTROM_THREADS, else hardware concurrency (at least 1).
unsigned default_thread_count();

/// Runs fn(k) for k in [0, n) on up to `threads` workers. Rethrows the
/// exception of the lowest failing k after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace otrom
