#pragma once

#include <algorithm>
#include <mutex>

#include "cqed/numerics.hpp"

namespace cqed {

template <class T>
MappedEnsemble<T> map_ensemble(const SimConfig& config, const DriveTables& tables, std::size_t n,
                               std::uint64_t base_seed, const std::function<T(const TrajectoryRecord&)>& fn,
                               unsigned threads) {
  MappedEnsemble<T> out;
  out.results.resize(n);
  std::mutex failures_mutex;
  numerics::parallel_for(
      n,
      [&](std::size_t i) {
        const std::uint64_t seed = trajectory_seed(base_seed, i);
        try {
          out.results[i] = fn(run_transit(config, tables, seed));
        } catch (const std::exception& e) {
          std::lock_guard lock(failures_mutex);
          out.failures.push_back({i, seed, e.what()});
        }
      },
      threads);
  std::sort(out.failures.begin(), out.failures.end(),
            [](const EnsembleFailure& a, const EnsembleFailure& b) { return a.index < b.index; });
  return out;
}

}  // namespace cqed
