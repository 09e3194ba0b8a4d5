#include "lf4d/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace lf4d {

int worker_count() {
  if (const char* env = std::getenv("LF4D_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::ptrdiff_t count, const std::function<void(std::ptrdiff_t)>& body) {
  if (count <= 0) return;
  const std::ptrdiff_t workers = std::min<std::ptrdiff_t>(worker_count(), count);
  if (workers <= 1) {
    for (std::ptrdiff_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(static_cast<std::size_t>(workers));
  for (std::ptrdiff_t w = 0; w < workers; ++w) {
    const std::ptrdiff_t lo = count * w / workers;
    const std::ptrdiff_t hi = count * (w + 1) / workers;
    threads.emplace_back([&, lo, hi] {
      try {
        for (std::ptrdiff_t i = lo; i < hi; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace lf4d
