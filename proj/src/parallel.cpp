#include "parallel.hpp"

namespace llmfrac {

namespace {
std::atomic<int> g_threads{1};
}

int worker_threads() { return g_threads.load(std::memory_order_relaxed); }

void set_worker_threads(int n) {
  g_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed);
}

} // namespace llmfrac
