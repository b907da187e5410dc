// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace itpatch {

// Hardware concurrency, at least 1.
int default_jobs();

// Calls fn(i) for i in [0, n) on up to `jobs` threads (jobs <= 0 means
// default_jobs()). Each index runs exactly once; the first exception thrown is
// rethrown after all workers stop.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

}  // namespace itpatch
