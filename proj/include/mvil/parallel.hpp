#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace mvil {

// Runs fn(chunk_index, begin, end) over a fixed number of index chunks.
// The chunking is independent of the hardware thread count, so any
// reduction that combines per-chunk results in chunk order is
// bit-reproducible across machines with different core counts.
inline void parallel_chunks(int n, int num_chunks, const std::function<void(int, int, int)>& fn) {
  if (n <= 0) return;
  num_chunks = std::max(1, std::min(num_chunks, n));
  const int per = (n + num_chunks - 1) / num_chunks;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (hw == 1 || num_chunks == 1) {
    for (int c = 0; c < num_chunks; ++c) {
      const int b = c * per;
      if (b >= n) break;
      fn(c, b, std::min(n, b + per));
    }
    return;
  }
  std::vector<std::thread> threads;
  std::atomic<int> next{0};
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(num_chunks));
  for (unsigned t = 0; t < workers; ++t) {
    threads.emplace_back([&]() {
      for (;;) {
        const int c = next.fetch_add(1);
        if (c >= num_chunks) return;
        const int b = c * per;
        if (b >= n) continue;
        fn(c, b, std::min(n, b + per));
      }
    });
  }
  for (auto& th : threads) th.join();
}

}  // namespace mvil
