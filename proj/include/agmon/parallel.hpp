#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace agmon {

// Bounded worker handle passed down by the caller. Work is split into
// contiguous static chunks, so results written by index are independent
// of the thread count.
class Parallelism {
 public:
  Parallelism() : threads_(default_threads()) {}
  explicit Parallelism(unsigned threads) : threads_(threads == 0 ? default_threads() : threads) {}

  unsigned threads() const { return threads_; }

  static Parallelism serial() { return Parallelism(1); }

  template <class F>
  void for_each(std::size_t count, F&& body) const {
    unsigned workers = std::min<std::size_t>(threads_, count);
    if (workers <= 1) {
      for (std::size_t i = 0; i < count; ++i) body(i);
      return;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
      std::size_t begin = count * w / workers;
      std::size_t end = count * (w + 1) / workers;
      pool.emplace_back([&, w, begin, end] {
        try {
          for (std::size_t i = begin; i < end; ++i) body(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

 private:
  static unsigned default_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
  }

  unsigned threads_;
};

}  // namespace agmon
