#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace opaque {

/// Number of worker threads used by parallel loops. 0 restores the default
/// (hardware concurrency).
void set_thread_count(unsigned count);
unsigned thread_count();

/// Runs body(begin, end, worker) over contiguous chunks of [0, n). Each index
/// is visited by exactly one worker; callers write per-index results and
/// reduce afterwards in index order, so results do not depend on the thread
/// count.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), n);
  if (workers <= 1) {
    if (n > 0) body(std::size_t{0}, n, std::size_t{0});
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  threads.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    threads.emplace_back([&, begin, end, w] {
      try {
        if (begin < end) body(begin, end, w);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace opaque

namespace opaque {

/// Splits [0, n) into fixed chunks of `chunk` indices, folds each chunk with
/// body(begin, end, accumulator) in parallel, and sums the chunk results in
/// chunk order. The chunking does not depend on the thread count, so the
/// floating-point result is reproducible.
template <typename T, typename Body>
T ordered_chunk_reduce(std::size_t n, std::size_t chunk, const T& zero, Body&& body) {
  if (chunk == 0) chunk = 1;
  const std::size_t chunks = (n + chunk - 1) / chunk;
  std::vector<T> partial(chunks, zero);
  parallel_for(chunks, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t c = begin; c < end; ++c) {
      body(c * chunk, std::min(n, (c + 1) * chunk), partial[c]);
    }
  });
  T total = zero;
  for (const auto& p : partial) total += p;
  return total;
}

}  // namespace opaque
