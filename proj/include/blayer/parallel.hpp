#pragma once

// Index-parallel loops. Every index writes its own slot, so results do not
// depend on the thread count.

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace blayer {

namespace detail {
inline std::atomic<int>& thread_setting() {
  static std::atomic<int> n{0};
  return n;
}
}  // namespace detail

/// Threads used by parallel_for: set_thread_count() if called with n > 0,
/// else BLAYER_THREADS, else 1.
inline int thread_count() {
  const int n = detail::thread_setting().load();
  if (n > 0) return n;
  if (const char* env = std::getenv("BLAYER_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
  }
  return 1;
}

inline void set_thread_count(int n) { detail::thread_setting().store(std::max(0, n)); }

template <class F>
void parallel_for(std::size_t count, F&& f) {
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) f(i);
  };
  std::vector<std::thread> pool;
  pool.reserve(threads - 1);
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace blayer
