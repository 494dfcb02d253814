#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>

namespace pairfreeze {

// Process-wide accounting of tracked allocations (tensor data, gradients,
// optimizer state, snapshots). Peak is a high-water mark that callers reset
// to the current live figure at the start of a measured run.
class AllocCounter {
 public:
  static AllocCounter& instance() {
    static AllocCounter counter;
    return counter;
  }

  void add(std::size_t bytes) {
    std::uint64_t live = live_.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::uint64_t peak = peak_.load(std::memory_order_relaxed);
    while (live > peak &&
           !peak_.compare_exchange_weak(peak, live, std::memory_order_relaxed)) {
    }
  }

  void remove(std::size_t bytes) {
    live_.fetch_sub(bytes, std::memory_order_relaxed);
  }

  std::uint64_t live_bytes() const { return live_.load(std::memory_order_relaxed); }
  std::uint64_t peak_bytes() const { return peak_.load(std::memory_order_relaxed); }

  // Start a new measurement window: peak restarts from whatever is live now.
  void reset_peak() { peak_.store(live_bytes(), std::memory_order_relaxed); }

 private:
  AllocCounter() = default;
  std::atomic<std::uint64_t> live_{0};
  std::atomic<std::uint64_t> peak_{0};
};

}  // namespace pairfreeze
