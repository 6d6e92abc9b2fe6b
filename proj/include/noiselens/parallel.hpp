#pragma once

#include <cstddef>
#include <functional>

namespace noiselens {

/// Caps the number of worker threads used by parallel loops. 0 restores the
/// default (hardware concurrency).
void set_max_threads(std::size_t n);
std::size_t max_threads();

/// Runs body(begin, end) over [0, n) split into contiguous chunks. Chunks
/// write disjoint outputs, so results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

/// Fixed block size for deterministic blocked reductions. Partial sums are
/// formed per block and combined in block order regardless of threading.
inline constexpr std::size_t kReductionBlock = 1024;

}  // namespace noiselens
