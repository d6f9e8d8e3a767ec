#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "spk/common.hpp"

namespace spk {

// Worker threads are capped by the SPK_THREADS environment variable.
inline std::size_t thread_cap() {
  if (const char* env = std::getenv("SPK_THREADS")) {
    try {
      std::size_t cap = std::stoul(env);
      if (cap >= 1) return cap;
    } catch (const std::exception&) {
      // fall through to hardware default
    }
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Splits [0, items) into `shards` contiguous chunks, runs `work` on each,
// and returns the per-shard states in shard order, so a monoidal merge of
// the result is independent of the thread schedule.
template <typename State, typename Work>
std::vector<State> run_sharded(std::size_t items, std::size_t shards,
                               const Work& work) {
  if (shards == 0) shards = 1;
  if (shards > items && items > 0) shards = items;
  std::vector<State> states(shards);
  if (items == 0) return states;
  std::vector<std::exception_ptr> failures(shards);
  std::size_t workers = std::min(shards, thread_cap());
  auto run_shard = [&](std::size_t s) {
    std::size_t begin = items * s / shards;
    std::size_t end = items * (s + 1) / shards;
    try {
      states[s] = work(begin, end);
    } catch (...) {
      failures[s] = std::current_exception();
    }
  };
  if (workers <= 1) {
    for (std::size_t s = 0; s < shards; ++s) run_shard(s);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        while (true) {
          std::size_t s = next.fetch_add(1);
          if (s >= shards) return;
          run_shard(s);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }
  for (std::exception_ptr& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }
  return states;
}

}  // namespace spk
