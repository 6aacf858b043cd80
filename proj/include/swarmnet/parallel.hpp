#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace swarmnet
{

/// Runs body(i) for i in [0, n) on up to `workers` threads; the first
/// exception is rethrown on the caller's thread.
template <typename Body>
void parallel_for(int n, int workers, Body body)
{
  workers = std::clamp(workers, 1, std::max(1, n));
  if (workers == 1)
  {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++)
      {
        try
        {
          body(i);
        }
        catch (...)
        {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace swarmnet
