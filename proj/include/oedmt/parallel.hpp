#pragma once

#include <cstddef>
#include <functional>

namespace oedmt {

// Worker count from OEDMT_THREADS (clamped to >= 1); defaults to the hardware
// concurrency. Work items must be independent; results are written to
// per-item slots so artifacts do not depend on the thread count.
int worker_count();

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace oedmt
