#pragma once

#include <cstddef>
#include <functional>

namespace physgen {

/// Worker count: PHYSGEN_THREADS if set and positive, otherwise hardware concurrency.
int worker_count();

/// Runs body(i) for i in [0, count). Work items must not share mutable state.
/// The first exception thrown by any item is rethrown after all workers join.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace physgen
