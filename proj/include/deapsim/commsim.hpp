// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "deapsim/partition.hpp"
#include "deapsim/topology.hpp"

namespace deapsim {

/// Which end of a transfer sets its per-link bandwidth.
enum class BandwidthPolicy { SourceSide, DestSide, PathMinimum };

/// Record of which tensors live on which chip, plus the HBM copy of every
/// tensor ever produced or initially loaded.
class DataLog {
 public:
  DataLog() = default;
  DataLog(std::size_t num_chips, std::vector<Count> capacity_bytes);

  std::size_t num_chips() const { return chips_.size(); }
  Count capacity(ChipId chip) const { return capacity_.at(chip); }
  Count resident_bytes(ChipId chip) const { return used_.at(chip); }

  bool in_hbm(const TensorId& id) const { return hbm_.count(id) > 0; }
  bool resident(ChipId chip, const TensorId& id) const { return chips_.at(chip).count(id) > 0; }
  /// Chips holding the tensor, ascending.
  std::vector<ChipId> holders(const TensorId& id) const;
  std::vector<TensorId> resident_tensors(ChipId chip) const;

  void put_hbm(const TensorRef& tensor);

  /// Makes the tensor resident on `chip` (refreshing its last use), evicting
  /// least-recently-used tensors as needed. Throws SimulationError when the
  /// tensor alone exceeds the chip's capacity.
  void place(ChipId chip, const TensorRef& tensor, std::int64_t step);

  bool operator==(const DataLog&) const = default;

 private:
  struct Entry {
    Count bytes = 0;
    std::int64_t last_use = 0;
    std::uint64_t seq = 0;
    bool operator==(const Entry&) const = default;
  };

  void evict_one(ChipId chip, const TensorId& keep);

  std::vector<std::map<TensorId, Entry>> chips_;
  std::vector<Count> capacity_;
  std::vector<Count> used_;
  std::map<TensorId, Count> hbm_;
  std::map<TensorId, std::set<ChipId>> holders_;
  std::uint64_t seq_ = 0;
};

/// A resolved data movement into `dest`. source == nullopt means HBM.
struct Transfer {
  TensorId tensor;
  Count bytes = 0;
  std::optional<ChipId> source;
  ChipId dest = 0;
  double distance = 0.0;
  double bandwidth_Bps = 1.0;

  bool from_hbm() const { return !source.has_value(); }
  bool operator==(const Transfer&) const = default;
};

/// Everything the communication stage needs about the interconnect.
struct Interconnect {
  const Topology& topology;
  const RoutingTable& routing;
  LinkBandwidthTable table;
  BandwidthPolicy policy = BandwidthPolicy::SourceSide;
};

/// step_tasks[c] is the task chip c runs this step (nullptr for a NOP).
/// Inputs already on the requester need nothing; otherwise the reachable
/// holder with the lowest transfer latency (then distance, then id) sends it;
/// with no reachable holder it comes from HBM at NIC bandwidth, distance 1.
std::vector<Transfer> resolve_transfers(std::span<const Task* const> step_tasks, const DataLog& log,
                                        const Interconnect& net);

/// bytes * distance / bandwidth.
double transfer_latency(const Transfer& transfer);

/// max latency of transfers touching `chip` + their total bytes / mem_bw.
/// HBM reads into the chip share its single NIC port, so they count as one
/// stream whose latency is the sum of theirs.
double chip_comm_latency(ChipId chip, std::span<const Transfer> transfers, double onchip_mem_bw_Bps);

/// Number of active connections (distance > 0) terminating at `chip`.
std::size_t active_connections(ChipId chip, std::span<const Transfer> transfers);

/// Fetched inputs become resident on their requesters, each producer gains
/// its output, and every output is written through to HBM.
void apply_step(DataLog& log, std::span<const Task* const> step_tasks, std::span<const Transfer> transfers,
                std::int64_t step);

/// Value-returning form of apply_step.
DataLog update_data_log(DataLog log, std::span<const Task* const> step_tasks, std::span<const Transfer> transfers,
                        std::int64_t step);

}  // namespace deapsim
