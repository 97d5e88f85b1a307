#pragma once

#include <cstddef>
#include <functional>

namespace vortexlab {

// Worker count used by parallel_for / parallel_sum. Defaults to 1.
void set_thread_count(int n);
int thread_count();

// Work is split into fixed chunks whose boundaries do not depend on the
// thread count, and partial sums are combined in chunk order, so results are
// bit-identical for any number of workers.
constexpr std::size_t kParallelChunk = 4096;

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);
double parallel_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& body);

}  // namespace vortexlab
