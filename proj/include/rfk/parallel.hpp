#pragma once

#include <cstddef>
#include <functional>

namespace rfk {

/// 0 means "use available parallelism".
unsigned resolve_threads(unsigned requested);

/// Run body(i) for i in [0, count) on up to `threads` workers. Indices are claimed dynamically,
/// so body must write only to slots owned by i. The first exception thrown is rethrown.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

}  // namespace rfk
