#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

#include "jpis/parameter.hpp"

namespace jpis {

// Container layout:
//
//   JPIS-CHECKPOINT 1\n
//   metadata <byte count>\n
//   <metadata bytes>\n
//   parameters <count>\n
//   <name> f64 <rank> <dim>... <byte offset>\n      (one line per parameter)
//   data <byte count>\n
//   <raw little-endian float64 payload>
//
// Offsets are relative to the first payload byte. Gradients are not stored.

struct ParameterArchive {
  std::string metadata;
  ParameterStore params;
};

void write_parameters(std::ostream& out, const ParameterStore& params,
                      std::string_view metadata);
ParameterArchive read_parameters(std::istream& in);

void save_parameters(const std::filesystem::path& path,
                     const ParameterStore& params, std::string_view metadata);
ParameterArchive load_parameters(const std::filesystem::path& path);

}  // namespace jpis
