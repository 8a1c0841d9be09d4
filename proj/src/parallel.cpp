#include "ncgl/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace ncgl {

namespace {
std::atomic<std::size_t> g_threads{0};
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("NC_GRAPH_LAB_THREADS")) {
    try {
      const long value = std::stol(env);
      if (value >= 1) return static_cast<std::size_t>(value);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

void set_thread_count(std::size_t threads) { g_threads = std::max<std::size_t>(1, threads); }

std::size_t thread_count() {
  std::size_t t = g_threads.load();
  if (t == 0) {
    t = default_thread_count();
    g_threads = t;
  }
  return t;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t workers = std::min(thread_count(), count);
  if (workers <= 1) {
    if (count > 0) body(0, count);
    return;
  }
  std::vector<std::jthread> pool;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const std::size_t block = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = std::min(count, begin + block);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace ncgl
