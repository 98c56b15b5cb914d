#pragma once

#include "rpost/model.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rpost {

/// n x p design. With `intercept` the first column is ones and the remaining columns
/// are iid N(mean, sd^2); otherwise every column is.
MatrixXd gaussian_design(Index n, Index p, double mean, double sd, bool intercept, Rng& rng);

/// Responses drawn from f_{i,theta_g} for every design row.
Dataset simulate_dataset(const ModelFamily& family, const MatrixXd& design,
                         const VectorXd& theta_g, Rng& rng);

/// Replaces the responses of rows `rows` with `value`.
void contaminate(Dataset& data, const std::vector<Index>& rows, double value);

/// Default number of workers for parallel_for (the hardware thread count).
unsigned worker_count();

/// Calls fn(k) for k in [0, count) on a pool of threads. Work items must write to
/// disjoint outputs; the first exception thrown is rethrown after all workers join.
template <typename F>
void parallel_for(Index count, F&& fn, unsigned threads = 0) {
  if (threads == 0) threads = worker_count();
  threads = static_cast<unsigned>(std::min<Index>(std::max<Index>(1, count), threads));
  if (threads <= 1) {
    for (Index k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<Index> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (Index k = next++; k < count; k = next++) {
      try {
        fn(k);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace rpost
