#pragma once

#include <cstddef>
#include <functional>

namespace approx8 {

/// Worker cap: APPROX8_THREADS if set and positive, else hardware concurrency.
unsigned worker_count();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks are
/// processed concurrently when n >= min_parallel and more than one worker is
/// available; otherwise body(0, n) runs inline.
void parallel_chunks(std::size_t n, std::size_t min_parallel,
                     const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace approx8
