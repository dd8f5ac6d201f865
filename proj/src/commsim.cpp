// SPDX-License-Identifier: Apache-2.0
#include "deapsim/commsim.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "deapsim/error.hpp"

namespace deapsim {
namespace {

constexpr double kGiga = 1e9;

double bandwidth_for(const Interconnect& net, ChipId source, ChipId dest) {
  const auto& topo = net.topology;
  switch (net.policy) {
    case BandwidthPolicy::SourceSide:
      return link_bandwidth(net.table, topo.degree(source)) * kGiga;
    case BandwidthPolicy::DestSide:
      return link_bandwidth(net.table, topo.degree(dest)) * kGiga;
    case BandwidthPolicy::PathMinimum: {
      const auto path = shortest_path(topo, source, dest);
      double bw = std::numeric_limits<double>::infinity();
      for (ChipId c : path->chips) bw = std::min(bw, link_bandwidth(net.table, topo.degree(c)));
      return bw * kGiga;
    }
  }
  return link_bandwidth(net.table, topo.degree(source)) * kGiga;
}

}  // namespace

DataLog::DataLog(std::size_t num_chips, std::vector<Count> capacity_bytes)
    : chips_(num_chips), capacity_(std::move(capacity_bytes)), used_(num_chips, 0) {
  if (capacity_.size() != num_chips) throw ConfigError("one capacity per chip required");
}

std::vector<ChipId> DataLog::holders(const TensorId& id) const {
  auto it = holders_.find(id);
  if (it == holders_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::vector<TensorId> DataLog::resident_tensors(ChipId chip) const {
  std::vector<TensorId> out;
  for (const auto& [id, entry] : chips_.at(chip)) out.push_back(id);
  return out;
}

void DataLog::put_hbm(const TensorRef& tensor) { hbm_[tensor.id] = tensor.bytes; }

void DataLog::evict_one(ChipId chip, const TensorId& keep) {
  auto& table = chips_[chip];
  auto victim = table.end();
  for (auto it = table.begin(); it != table.end(); ++it) {
    if (it->first == keep) continue;
    if (victim == table.end() || std::tie(it->second.last_use, it->second.seq) <
                                     std::tie(victim->second.last_use, victim->second.seq)) {
      victim = it;
    }
  }
  if (victim == table.end()) throw SimulationError("nothing left to evict");
  if (!in_hbm(victim->first)) hbm_[victim->first] = victim->second.bytes;  // write back
  used_[chip] -= victim->second.bytes;
  holders_[victim->first].erase(chip);
  table.erase(victim);
}

void DataLog::place(ChipId chip, const TensorRef& tensor, std::int64_t step) {
  auto& table = chips_.at(chip);
  if (auto it = table.find(tensor.id); it != table.end()) {
    it->second.last_use = step;
    it->second.seq = ++seq_;
    return;
  }
  if (tensor.bytes > capacity_[chip]) {
    throw SimulationError(fmt::format("tensor {} ({} B) exceeds on-chip memory of chip {} ({} B)", tensor.id.name,
                                      tensor.bytes, chip, capacity_[chip]));
  }
  while (used_[chip] + tensor.bytes > capacity_[chip]) evict_one(chip, tensor.id);
  table.emplace(tensor.id, Entry{tensor.bytes, step, ++seq_});
  used_[chip] += tensor.bytes;
  holders_[tensor.id].insert(chip);
}

std::vector<Transfer> resolve_transfers(std::span<const Task* const> step_tasks, const DataLog& log,
                                        const Interconnect& net) {
  std::vector<Transfer> out;
  for (std::size_t c = 0; c < step_tasks.size(); ++c) {
    const Task* task = step_tasks[c];
    if (!task) continue;
    const auto dest = static_cast<ChipId>(c);
    for (const auto& input : task->inputs) {
      if (log.resident(dest, input.id)) continue;

      std::optional<Transfer> best;
      for (ChipId h : log.holders(input.id)) {
        const auto d = net.routing.distance(h, dest);
        if (!d) continue;
        Transfer t{input.id, input.bytes, h, dest, *d, bandwidth_for(net, h, dest)};
        if (!best) {
          best = t;
          continue;
        }
        const double lt = transfer_latency(t);
        const double lb = transfer_latency(*best);
        if (lt < lb || (lt == lb && t.distance < best->distance)) best = t;
      }
      if (!best) {
        if (!log.in_hbm(input.id)) {
          throw SimulationError(fmt::format("tensor {} needed by task {} on chip {} exists nowhere", input.id.name,
                                            task->id, dest));
        }
        best = Transfer{input.id, input.bytes, std::nullopt, dest, 1.0, net.table.nic_GBps * kGiga};
      }
      out.push_back(std::move(*best));
    }
  }
  return out;
}

double transfer_latency(const Transfer& transfer) {
  if (transfer.distance == 0.0) return 0.0;
  return static_cast<double>(transfer.bytes) * transfer.distance / transfer.bandwidth_Bps;
}

double chip_comm_latency(ChipId chip, std::span<const Transfer> transfers, double onchip_mem_bw_Bps) {
  double worst = 0.0;
  double hbm_stream = 0.0;
  Count bytes = 0;
  bool any = false;
  for (const auto& t : transfers) {
    if (t.dest != chip && t.source != chip) continue;
    any = true;
    if (t.from_hbm()) {
      hbm_stream += transfer_latency(t);
    } else {
      worst = std::max(worst, transfer_latency(t));
    }
    bytes += t.bytes;
  }
  if (!any) return 0.0;
  return std::max(worst, hbm_stream) + static_cast<double>(bytes) / onchip_mem_bw_Bps;
}

std::size_t active_connections(ChipId chip, std::span<const Transfer> transfers) {
  return static_cast<std::size_t>(std::count_if(transfers.begin(), transfers.end(), [chip](const Transfer& t) {
    return t.dest == chip && t.distance > 0.0;
  }));
}

void apply_step(DataLog& log, std::span<const Task* const> step_tasks, std::span<const Transfer> transfers,
                std::int64_t step) {
  for (const auto& t : transfers) log.place(t.dest, {t.tensor, t.bytes}, step);
  for (std::size_t c = 0; c < step_tasks.size(); ++c) {
    const Task* task = step_tasks[c];
    if (!task) continue;
    const auto chip = static_cast<ChipId>(c);
    for (const auto& input : task->inputs) {
      if (log.resident(chip, input.id)) log.place(chip, input, step);
    }
    log.put_hbm(task->output);
    log.place(chip, task->output, step);
  }
}

DataLog update_data_log(DataLog log, std::span<const Task* const> step_tasks, std::span<const Transfer> transfers,
                        std::int64_t step) {
  apply_step(log, step_tasks, transfers, step);
  return log;
}

}  // namespace deapsim
