// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>
#include <string>

#include "deapsim/partition.hpp"

namespace deapsim {

inline constexpr const char* kLinearLayerType = "LinearLayer";
inline constexpr const char* kNopType = "NOP";

/// Per-task accelerator workload in the conv-style field convention
/// (R/S weight width/height, P/Q output width/height, C/K in/out channels, N batch).
struct WorkloadPayload {
  Count C = 1;
  Count K = 1;
  Count N = 1;
  Count P = 1;
  Count Q = 1;
  Count R = 1;
  Count S = 1;
  Count Wdilation = 1;
  Count Wstride = 1;
  Count Hdilation = 1;
  Count Hstride = 1;
  std::string type = kLinearLayerType;

  static WorkloadPayload nop();
  bool is_nop() const { return type == kNopType; }
  auto operator<=>(const WorkloadPayload&) const = default;
};

enum class PayloadConvention {
  /// {N:1, C:in, K:out, P:rows}; drives the cost model.
  Canonical,
  /// {C:rows, K:rows, P:out}; the historical Timeloop-facing layout, which
  /// drops the input-feature count and so cannot be priced.
  Legacy,
};

/// Throws ConfigError for tasks that are not GEMM-shaped.
WorkloadPayload to_payload(const Task& task, PayloadConvention convention = PayloadConvention::Canonical);

struct GemmShape {
  Count rows = 0;  // M
  Count in = 0;    // reduction dim
  Count out = 0;   // N
  bool operator==(const GemmShape&) const = default;
};

/// Canonical payload of a GEMM.
WorkloadPayload gemm_payload(const GemmShape& gemm);

/// GEMM dims of a canonical payload. Throws ConfigError when the payload uses
/// convolution parameters or is not a LinearLayer.
GemmShape gemm_shape(const WorkloadPayload& payload);

}  // namespace deapsim
