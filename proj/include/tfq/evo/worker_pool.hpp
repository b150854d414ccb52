#pragma once

#include <condition_variable>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "tfq/error.hpp"

namespace tfq::evo {

/// Fixed set of long-lived worker threads executing index-parallel jobs.
/// The coordinator scatters indices [0, n) and blocks until all are gathered.
/// Workers keep no state between tasks.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers) {
    if (workers < 1) throw ConfigError("worker count must be at least 1");
    threads_.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) threads_.emplace_back([this] { worker_loop(); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    wake_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const { return threads_.size(); }

  /// Runs task(i) for every i in [0, n). If any task throws, rethrows as a
  /// RunError naming the lowest failing index, after all tasks finish.
  void run(std::size_t n, const std::function<void(std::size_t)>& task) {
    if (n == 0) return;
    std::vector<std::exception_ptr> errors(n);
    {
      std::lock_guard lock(mutex_);
      task_ = &task;
      errors_ = &errors;
      total_ = n;
      next_ = 0;
      remaining_ = n;
    }
    wake_.notify_all();
    {
      std::unique_lock lock(mutex_);
      done_.wait(lock, [this] { return remaining_ == 0; });
      task_ = nullptr;
      errors_ = nullptr;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!errors[i]) continue;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        throw RunError("task " + std::to_string(i) + " failed: " + e.what());
      } catch (...) {
        throw RunError("task " + std::to_string(i) + " failed");
      }
    }
  }

 private:
  void worker_loop() {
    std::unique_lock lock(mutex_);
    for (;;) {
      wake_.wait(lock, [this] { return stopping_ || (task_ && next_ < total_); });
      if (stopping_) return;
      const std::size_t i = next_++;
      const auto* task = task_;
      auto* errors = errors_;
      lock.unlock();
      try {
        (*task)(i);
      } catch (...) {
        (*errors)[i] = std::current_exception();
      }
      lock.lock();
      if (--remaining_ == 0) done_.notify_all();
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::vector<std::exception_ptr>* errors_ = nullptr;
  std::size_t total_ = 0;
  std::size_t next_ = 0;
  std::size_t remaining_ = 0;
  bool stopping_ = false;
};

}  // namespace tfq::evo
