#include "lamod/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace lamod {

int thread_count() {
  static const int count = [] {
    const char* env = std::getenv("LAMOD_NUM_THREADS");
    if (!env) return 1;
    try {
      return std::clamp(std::stoi(env), 1, 256);
    } catch (...) {
      return 1;
    }
  }();
  return count;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
  if (workers <= 1) {
    for (std::size_t k = 0; k < n; ++k) body(k);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t k = w; k < n; k += workers) body(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  // rethrow the first failure by worker index, independent of timing
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace lamod
