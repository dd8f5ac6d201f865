// SPDX-License-Identifier: Apache-2.0
#include "deapsim/payload.hpp"

#include <fmt/format.h>

#include "deapsim/error.hpp"

namespace deapsim {

WorkloadPayload WorkloadPayload::nop() {
  WorkloadPayload p;
  p.type = kNopType;
  return p;
}

WorkloadPayload to_payload(const Task& task, PayloadConvention convention) {
  if (!task.is_gemm()) {
    throw ConfigError(fmt::format("task {} ({}) is not GEMM-shaped", task.id, to_string(task.kind)));
  }
  WorkloadPayload p;
  if (convention == PayloadConvention::Canonical) {
    p.C = task.in_features;
    p.K = task.out_features;
    p.P = task.rows;
  } else {
    p.C = task.rows;
    p.K = task.rows;
    p.P = task.out_features;
  }
  return p;
}

WorkloadPayload gemm_payload(const GemmShape& gemm) {
  WorkloadPayload p;
  p.C = gemm.in;
  p.K = gemm.out;
  p.P = gemm.rows;
  return p;
}

GemmShape gemm_shape(const WorkloadPayload& payload) {
  if (payload.type != kLinearLayerType) {
    throw ConfigError("payload type '" + payload.type + "' is not a LinearLayer");
  }
  if (payload.N != 1 || payload.Q != 1 || payload.R != 1 || payload.S != 1 || payload.Wdilation != 1 ||
      payload.Wstride != 1 || payload.Hdilation != 1 || payload.Hstride != 1) {
    throw ConfigError("convolution parameters (N, Q, R, S, dilation, stride) must all be 1");
  }
  if (payload.C < 1 || payload.K < 1 || payload.P < 1) throw ConfigError("payload C, K, P must be >= 1");
  return {payload.P, payload.C, payload.K};
}

}  // namespace deapsim
