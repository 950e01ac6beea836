#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace splatprune {

/// 0 means "one worker per hardware thread".
inline std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Splits [0, count) into at most `workers` contiguous chunks and runs
/// fn(chunk, begin, end) on each, one thread per chunk. The partition depends
/// only on (count, workers). The first exception by chunk order is rethrown.
template <typename Fn>
void parallel_chunks(std::size_t count, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(resolve_workers(workers), count));
  if (count == 0) return;
  if (workers == 1) {
    fn(std::size_t{0}, std::size_t{0}, count);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = count * w / workers;
      const std::size_t end = count * (w + 1) / workers;
      threads.emplace_back([&, w, begin, end] {
        try {
          fn(w, begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace splatprune
