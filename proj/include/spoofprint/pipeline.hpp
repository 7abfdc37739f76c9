#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "spoofprint/audio.hpp"
#include "spoofprint/corpus.hpp"
#include "spoofprint/features.hpp"

namespace spoofprint {

/// Extracts every utterance of a dataset with `jobs` worker threads. The result
/// is keyed by utt_id, so its content does not depend on the worker count.
/// The first failure (in manifest order) is rethrown after all workers stop.
inline FeatureTable extract_dataset(const Dataset& ds, std::size_t jobs = 1, const ExtractConfig& cfg = {},
                                    const std::function<void(std::size_t done, std::size_t total)>& progress = {}) {
  const auto& records = ds.records();
  std::vector<std::optional<FeatureVector>> results(records.size());
  std::vector<std::exception_ptr> errors(records.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> failed{false};
  std::mutex progress_mutex;

  auto worker = [&]() {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= records.size()) return;
      const auto& r = records[i];
      try {
        auto fv = extract_all(load_audio(ds.root() / r.path, r.utt_id), default_registry(), cfg);
        fv.label = r.label;
        fv.attack = r.attack;
        results[i] = std::move(fv);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
      const std::size_t n = done.fetch_add(1) + 1;
      if (progress) {
        std::lock_guard lock(progress_mutex);
        progress(n, records.size());
      }
    }
  };

  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(1, records.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  FeatureTable table;
  for (auto& fv : results) {
    const auto id = fv->utt_id;
    table.emplace(id, std::move(*fv));
  }
  return table;
}

}  // namespace spoofprint
