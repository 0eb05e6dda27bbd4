// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "centerscan/parameters.hpp"
#include "centerscan/tensor.hpp"

namespace centerscan {

/// One named array in a checkpoint container.
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double> data;
  bool frozen = false;
};

// Container layout (all integers little-endian):
//   8 bytes   magic "CSCKPT01"
//   8 bytes   uint64 header length L
//   L bytes   JSON header {"arrays":[{"name","offset","shape","frozen"}...],"meta":{...}}
//   payload   float64 values; each array's offset is in bytes from payload start
void write_container(const std::filesystem::path& path, const std::vector<NamedArray>& arrays,
                     const std::string& meta_json = "{}");
std::vector<NamedArray> read_container(const std::filesystem::path& path, std::string* meta_json = nullptr);

std::vector<NamedArray> to_arrays(const ParameterSet& params, const std::string& prefix = "");
/// Loads values into a set with matching names/shapes; throws on mismatch.
void load_arrays(ParameterSet& params, const std::vector<NamedArray>& arrays, const std::string& prefix = "");

}  // namespace centerscan
