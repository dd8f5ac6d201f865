// SPDX-License-Identifier: Apache-2.0
#include "deapsim/cost_provider.hpp"

#include <algorithm>

#include "deapsim/error.hpp"

namespace deapsim {

ProcCost AnalyticalCostProvider::estimate(const WorkloadPayload& payload, const ChipConfig& chip,
                                          std::uint64_t seed) const {
  if (payload.is_nop()) return {};
  Rng rng(seed);
  const MappingResult best = best_mapping(payload, chip, rng, options_);
  return process_cost(payload, chip, best.mapping);
}

ProcCost MockCostProvider::estimate(const WorkloadPayload& payload, const ChipConfig&, std::uint64_t) const {
  if (payload.is_nop()) return {};
  auto it = table_.find(payload);
  if (it == table_.end()) throw SimulationError("mock cost provider has no entry for payload type " + payload.type);
  return it->second;
}

ProcCost MemoizingCostProvider::estimate(const WorkloadPayload& payload, const ChipConfig& chip,
                                         std::uint64_t seed) const {
  Key key{payload, 0, seed};
  {
    std::lock_guard lock(mutex_);
    auto it = std::find(chips_.begin(), chips_.end(), chip);
    if (it == chips_.end()) it = chips_.insert(chips_.end(), chip);
    key.chip_index = static_cast<std::size_t>(it - chips_.begin());
    if (auto hit = memo_.find(key); hit != memo_.end()) return hit->second;
  }
  // Computed outside the lock; a concurrent duplicate computes the same value.
  const ProcCost cost = inner_.estimate(payload, chip, seed);
  std::lock_guard lock(mutex_);
  if (memo_.emplace(key, cost).second) ++evaluations_;
  return cost;
}

std::size_t MemoizingCostProvider::evaluations() const {
  std::lock_guard lock(mutex_);
  return evaluations_;
}

}  // namespace deapsim
