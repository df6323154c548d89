#pragma once

#include <algorithm>
#include <cstdlib>
#include <cstddef>
#include <string>
#include <thread>
#include <vector>

namespace datapricer {

// Worker cap: DATAPRICER_THREADS when set, otherwise the hardware default.
inline unsigned worker_count() {
  if (const char* env = std::getenv("DATAPRICER_THREADS")) {
    const long parsed = std::strtol(env, nullptr, 10);
    if (parsed >= 1) return static_cast<unsigned>(parsed);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

// Runs fn(begin, end, chunk_index) over fixed-size chunks of [0, count).
// The chunk layout depends only on `count`, never on the worker cap, so any
// per-chunk results can be merged in chunk order for thread-count-independent
// output.
template <typename Fn>
void parallel_chunks(std::size_t count, std::size_t chunk_count, Fn&& fn) {
  if (count == 0 || chunk_count == 0) return;
  chunk_count = std::min(chunk_count, count);
  const std::size_t chunk_size = (count + chunk_count - 1) / chunk_count;
  const unsigned workers = std::min<std::size_t>(worker_count(), chunk_count);

  if (workers <= 1) {
    for (std::size_t c = 0; c * chunk_size < count; ++c) {
      fn(c * chunk_size, std::min(count, (c + 1) * chunk_size), c);
    }
    return;
  }

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t c = w; c * chunk_size < count; c += workers) {
        fn(c * chunk_size, std::min(count, (c + 1) * chunk_size), c);
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace datapricer
