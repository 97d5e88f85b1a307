#include "vortexlab/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vortexlab {

namespace {
std::atomic<int> g_threads{1};

void run_chunks(std::size_t chunks, const std::function<void(std::size_t)>& job) {
  const int workers = std::min<int>(g_threads.load(), static_cast<int>(chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) job(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      try {
        for (std::size_t c = next++; c < chunks; c = next++) job(c);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = chunks;
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}
}  // namespace

void set_thread_count(int n) { g_threads = std::max(1, n); }
int thread_count() { return g_threads.load(); }

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t chunks = (n + kParallelChunk - 1) / kParallelChunk;
  run_chunks(chunks, [&](std::size_t c) {
    body(c * kParallelChunk, std::min(n, (c + 1) * kParallelChunk));
  });
}

double parallel_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& body) {
  const std::size_t chunks = (n + kParallelChunk - 1) / kParallelChunk;
  std::vector<double> partial(chunks, 0.0);
  run_chunks(chunks, [&](std::size_t c) {
    partial[c] = body(c * kParallelChunk, std::min(n, (c + 1) * kParallelChunk));
  });
  double s = 0.0;
  for (double v : partial) s += v;
  return s;
}

}  // namespace vortexlab
