// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace deapsim {

/// Selects between the OpenMP kernel and the serial reference loop.
/// Both produce identical results; the serial path is the one tests trust.
enum class Exec { Serial, Parallel };

/// Runs body(i) for i in [0, n). Parallel mode uses an OpenMP loop; the first
/// exception (by index) is rethrown after the loop completes.
template <typename Body>
void for_each_index(Exec exec, std::size_t n, Body&& body) {
  if (exec == Exec::Serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace deapsim
