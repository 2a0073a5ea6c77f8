#include "emuval/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace emuval {
namespace {

std::size_t initial_thread_count() {
  if (const char* env = std::getenv("EMUVAL_THREADS")) {
    try {
      auto n = std::stoul(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::atomic<std::size_t>& configured_threads() {
  static std::atomic<std::size_t> n{initial_thread_count()};
  return n;
}

thread_local bool in_parallel_region = false;

}  // namespace

std::size_t thread_count() { return configured_threads().load(); }

void set_thread_count(std::size_t n) { configured_threads().store(std::max<std::size_t>(1, n)); }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(thread_count(), count);
  if (workers <= 1 || in_parallel_region) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr error;

  auto work = [&] {
    in_parallel_region = true;
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        // Report the failure with the lowest index so errors are reproducible.
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
    in_parallel_region = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace emuval
