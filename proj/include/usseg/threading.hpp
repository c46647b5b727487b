#ifndef USSEG_THREADING_HPP
#define USSEG_THREADING_HPP

#include <cstddef>
#include <functional>

namespace usseg {

// Global worker count. 1 = run everything inline on the caller.
void set_thread_count(int n);
int thread_count();

// Splits [0,n) into one contiguous chunk per worker and runs
// fn(begin, end) on each. Chunk boundaries depend only on n and the
// configured worker count, never on scheduling, so any computation whose
// chunks write disjoint outputs is bit-reproducible across runs and
// thread schedules. Not reentrant from inside a worker.
void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn);

} // namespace usseg

#endif
