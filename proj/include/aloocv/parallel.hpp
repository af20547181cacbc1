#pragma once

#include <functional>

#include "aloocv/types.hpp"

namespace aloocv {

/// Runs body(i) for i in [0, count), on up to `threads` workers. Each
/// index is visited exactly once, so bodies that write only to their
/// own slot produce results identical to the sequential run. Exceptions
/// from workers are rethrown on the calling thread.
void parallel_for(Index count, int threads,
                  const std::function<void(Index)>& body);

}  // namespace aloocv
