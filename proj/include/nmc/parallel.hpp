#ifndef NMC_PARALLEL_HPP
#define NMC_PARALLEL_HPP

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "nmc/types.hpp"

namespace nmc {

// Runs f(begin, end) over a fixed partition of [0, n) into `workers`
// contiguous ranges.  The partition depends only on (n, workers), and every
// result slot is indexed by its global position, so outputs are identical
// for any worker count.  The first exception thrown by any range is
// rethrown on the calling thread.
template <class F>
void parallel_for(Index n, int workers, F&& f) {
  if (n <= 0) return;
  if (workers < 1) workers = 1;
  const Index chunks = std::min<Index>(workers, n);
  if (chunks == 1) {
    f(Index{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(chunks) - 1);
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&](Index begin, Index end) {
    try {
      f(begin, end);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
    }
  };
  const Index base = n / chunks;
  const Index extra = n % chunks;
  Index begin = 0;
  for (Index c = 0; c < chunks; ++c) {
    const Index len = base + (c < extra ? 1 : 0);
    if (c + 1 == chunks) {
      run(begin, begin + len);
    } else {
      pool.emplace_back(run, begin, begin + len);
    }
    begin += len;
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace nmc

#endif  // NMC_PARALLEL_HPP
