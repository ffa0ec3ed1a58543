#pragma once

#include <cstddef>
#include <functional>

namespace selfgnn {

/// Worker count used by row-parallel kernels. Defaults to 1.
void set_num_threads(int n);
int num_threads();

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunks never share
/// an output row, so results do not depend on the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body,
                  std::size_t min_chunk = 64);

}  // namespace selfgnn
