#ifndef SDLAB_PARALLEL_HPP
#define SDLAB_PARALLEL_HPP

#include <atomic>
#include <thread>
#include <mutex>
#include <vector>
#include <functional>
#include <exception>
#include <stdexcept>

namespace sdlab {

inline int default_workers() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : (int)hc;
}

// Runs fn(replica) for replica in [0, n). Each replica owns its output slot
// and derives its RNG stream from its index, so results are identical for any
// worker count or scheduling order.
inline void parallel_replicas(long long n, int workers, const std::function<void(long long)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (long long r = 0; r < n; ++r) fn(r);
    return;
  }
  std::atomic<long long> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  auto work = [&] {
    for (;;) {
      long long r = next.fetch_add(1);
      if (r >= n) return;
      try {
        fn(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < std::min<long long>(workers, n); ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace sdlab

#endif
