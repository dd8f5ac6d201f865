// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <tuple>
#include <vector>

#include "deapsim/procmodel.hpp"

namespace deapsim {

/// Prices one payload on one chip. Implementations must be pure per
/// (payload, chip, seed) and safe to call concurrently.
class CostProvider {
 public:
  virtual ~CostProvider() = default;
  virtual ProcCost estimate(const WorkloadPayload& payload, const ChipConfig& chip, std::uint64_t seed) const = 0;
};

/// best_mapping over random mappings, then process_cost of the winner.
class AnalyticalCostProvider final : public CostProvider {
 public:
  explicit AnalyticalCostProvider(MappingSearchOptions options = {}) : options_(options) {}

  ProcCost estimate(const WorkloadPayload& payload, const ChipConfig& chip, std::uint64_t seed) const override;
  const MappingSearchOptions& options() const { return options_; }

 private:
  MappingSearchOptions options_;
};

/// Fixed lookup table; unknown payloads throw SimulationError.
class MockCostProvider final : public CostProvider {
 public:
  MockCostProvider() = default;

  void set(const WorkloadPayload& payload, ProcCost cost) { table_[payload] = cost; }
  ProcCost estimate(const WorkloadPayload& payload, const ChipConfig& chip, std::uint64_t seed) const override;

 private:
  std::map<WorkloadPayload, ProcCost> table_;
};

/// Thread-safe memo in front of another provider; shared across the
/// candidates of a search so repeated sub-layers are priced once.
class MemoizingCostProvider final : public CostProvider {
 public:
  explicit MemoizingCostProvider(const CostProvider& inner) : inner_(inner) {}

  ProcCost estimate(const WorkloadPayload& payload, const ChipConfig& chip, std::uint64_t seed) const override;
  std::size_t evaluations() const;

 private:
  struct Key {
    WorkloadPayload payload;
    std::size_t chip_index;
    std::uint64_t seed;
    auto operator<=>(const Key&) const = default;
  };

  const CostProvider& inner_;
  mutable std::mutex mutex_;
  mutable std::vector<ChipConfig> chips_;
  mutable std::map<Key, ProcCost> memo_;
  mutable std::size_t evaluations_ = 0;
};

}  // namespace deapsim
