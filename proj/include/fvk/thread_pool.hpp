#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <exception>
#include <functional>
#include <latch>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

namespace fvk {

/// Fixed-size worker pool.
///
/// parallelFor partitions [0, n) into contiguous chunks and returns once every
/// chunk has finished (a global wait). The first exception thrown by a chunk
/// is rethrown on the calling thread. Bodies must not block on the pool.
class ThreadPool {
 public:
  explicit ThreadPool(std::size_t workers) {
    if (workers == 0) throw std::invalid_argument("thread pool needs at least one worker");
    threads_.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) {
      threads_.emplace_back([this] { workerLoop(); });
    }
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    ready_.notify_all();
    for (auto& t : threads_) t.join();
  }

  [[nodiscard]] std::size_t size() const noexcept { return threads_.size(); }

  void submit(std::function<void()> job) {
    {
      std::lock_guard lock(mutex_);
      jobs_.push_back(std::move(job));
    }
    ready_.notify_one();
  }

  /// body(lo, hi) is called on disjoint chunks covering [0, n).
  template <class Body>
  void parallelFor(std::size_t n, Body&& body, std::size_t chunksPerWorker = 4) {
    if (n == 0) return;
    const std::size_t chunks = std::min(n, std::max<std::size_t>(1, size() * chunksPerWorker));
    const std::size_t base = n / chunks;
    const std::size_t extra = n % chunks;

    std::latch done(static_cast<std::ptrdiff_t>(chunks));
    std::exception_ptr failure;
    std::mutex failureMutex;

    std::size_t lo = 0;
    for (std::size_t c = 0; c < chunks; ++c) {
      const std::size_t hi = lo + base + (c < extra ? 1 : 0);
      submit([&, lo, hi] {
        try {
          body(lo, hi);
        } catch (...) {
          std::lock_guard lock(failureMutex);
          if (!failure) failure = std::current_exception();
        }
        done.count_down();
      });
      lo = hi;
    }
    done.wait();
    if (failure) std::rethrow_exception(failure);
  }

 private:
  void workerLoop() {
    for (;;) {
      std::function<void()> job;
      {
        std::unique_lock lock(mutex_);
        ready_.wait(lock, [this] { return stopping_ || !jobs_.empty(); });
        if (stopping_ && jobs_.empty()) return;
        job = std::move(jobs_.front());
        jobs_.pop_front();
      }
      job();
    }
  }

  std::vector<std::thread> threads_;
  std::deque<std::function<void()>> jobs_;
  std::mutex mutex_;
  std::condition_variable ready_;
  bool stopping_ = false;
};

}  // namespace fvk
