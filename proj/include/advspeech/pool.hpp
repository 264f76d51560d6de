#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "advspeech/errors.hpp"

namespace advspeech {

// Run fn(0..n_items-1) on up to n_jobs threads. Work is claimed from a shared
// counter, so results must be written into per-index slots by the callee;
// determinism then holds regardless of scheduling. The first exception is
// rethrown after all workers join.
inline void run_indexed_jobs(int n_jobs, int n_items,
                             const std::function<void(int)>& fn) {
  if (n_jobs < 1) throw ConfigError("run_indexed_jobs: n_jobs must be >= 1");
  if (n_items <= 0) return;
  n_jobs = std::min(n_jobs, n_items);

  if (n_jobs == 1) {
    for (int i = 0; i < n_items; ++i) fn(i);
    return;
  }

  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;

  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const int i = next.fetch_add(1);
      if (i >= n_items) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        failed.store(true);
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(n_jobs));
  for (int j = 0; j < n_jobs; ++j) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace advspeech
