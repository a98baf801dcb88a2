#pragma once

#include <cstddef>
#include <functional>

namespace egml {

// Worker count: EGML_THREADS if set (>=1), otherwise hardware concurrency.
unsigned worker_count();

// Runs fn(i) for i in [0, n). Work is split into fixed-size blocks handed to
// workers; fn must write only to slots indexed by i, so results do not depend
// on scheduling. Exceptions are captured and rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace egml
