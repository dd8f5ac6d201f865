// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <type_traits>
#include <vector>

#include <fmt/format.h>

namespace deapsim {

/// Shortest round-trip text for doubles ("inf" for infinities), decimal for integers.
template <typename T>
std::string csv_field(T value) {
  if constexpr (std::is_floating_point_v<T>) {
    return fmt::format("{}", static_cast<double>(value));
  } else {
    return fmt::format("{}", value);
  }
}

/// Writes a header row on construction and enforces the column count.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);
  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

}  // namespace deapsim
