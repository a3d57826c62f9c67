#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace littleyolo {

inline unsigned default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

// Splits [0, count) into contiguous chunks whose boundaries are multiples of
// `grain` and runs fn(begin, end) for each on its own thread. The partition
// only decides who computes an index, never how it is computed, so callers
// that keep per-index work independent get identical results for any
// thread count.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, std::size_t grain, Fn&& fn) {
  if (count == 0) return;
  grain = std::max<std::size_t>(grain, 1);
  std::size_t blocks = (count + grain - 1) / grain;
  std::size_t workers = std::min<std::size_t>(std::max(threads, 1u), blocks);
  if (workers <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  std::size_t per = (blocks + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t begin = std::min(count, w * per * grain);
    std::size_t end = std::min(count, (w + 1) * per * grain);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace littleyolo
